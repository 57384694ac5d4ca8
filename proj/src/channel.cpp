#include "csilab/channel.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "csilab/binio.hpp"
#include "csilab/numerics.hpp"

namespace csilab::channel {

namespace {

constexpr double kPi = std::numbers::pi;

Cplx complex_gauss(std::mt19937_64& rng, std::normal_distribution<double>& gauss, double std_total) {
  const double s = std_total / std::sqrt(2.0);
  const double re = gauss(rng) * s;
  const double im = gauss(rng) * s;
  return {re, im};
}

// One multipath realization. Draw order per ray is fixed (angle, tap, gain)
// so generation stays bit-reproducible. Used both for the first timeslot and
// for AR(1) innovations, which keeps the delay support exact when leakage = 0.
CMat synth_multipath(const ChannelConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uang(-kPi, kPi);
  std::uniform_int_distribution<Index> utap(0, cfg.max_delay_tap);

  CMat h = CMat::Zero(cfg.n_b, cfg.n_f);
  CVec steer(cfg.n_b);
  Eigen::RowVectorXcd freq(cfg.n_f);

  auto add_ray = [&](double angle, Index tap, Cplx gain) {
    for (Index k = 0; k < cfg.n_b; ++k)
      steer(k) = std::polar(1.0, -kPi * static_cast<double>(k) * std::sin(angle));
    const double fscale = 1.0 / std::sqrt(static_cast<double>(cfg.n_f));
    for (Index m = 0; m < cfg.n_f; ++m) {
      const long long r = (static_cast<long long>(m) * tap) % cfg.n_f;
      freq(m) = std::polar(fscale, -2.0 * kPi * static_cast<double>(r) / static_cast<double>(cfg.n_f));
    }
    h.noalias() += gain * (steer * freq);
  };

  const double main_std = std::sqrt((1.0 - cfg.leakage) / static_cast<double>(cfg.n_paths));
  for (Index p = 0; p < cfg.n_paths; ++p) {
    const double angle = uang(rng);
    const Index tap = utap(rng);
    add_ray(angle, tap, complex_gauss(rng, gauss, main_std));
  }
  if (cfg.leakage > 0.0) {
    std::uniform_int_distribution<Index> utail(cfg.n_t, cfg.n_f - 1);
    const double leak_std = std::sqrt(cfg.leakage / static_cast<double>(cfg.n_paths));
    for (Index p = 0; p < cfg.n_paths; ++p) {
      const double angle = uang(rng);
      const Index tap = utail(rng);
      add_ray(angle, tap, complex_gauss(rng, gauss, leak_std));
    }
  }
  // E||H||_F^2 = n_b * n_f, i.e. unit variance per entry
  h *= std::sqrt(static_cast<double>(cfg.n_f));
  return h;
}

} // namespace

void ChannelConfig::validate() const {
  if (n_b < 1 || n_f < 1 || n_t < 1) throw ConfigError("channel: dimensions must be >= 1");
  if (n_t > n_f) throw ConfigError("channel: n_t must not exceed n_f");
  if (n_paths < 1) throw ConfigError("channel: n_paths must be >= 1");
  if (max_delay_tap < 0 || max_delay_tap >= n_t)
    throw ConfigError("channel: max_delay_tap must be in [0, n_t)");
  if (!(ar >= 0.0 && ar <= 1.0)) throw ConfigError("channel: ar must be in [0, 1]");
  if (!(leakage >= 0.0 && leakage < 1.0)) throw ConfigError("channel: leakage must be in [0, 1)");
  if (noise_std < 0.0) throw ConfigError("channel: noise_std must be non-negative");
}

Dataset generate(const ChannelConfig& cfg, std::size_t n_samples, std::size_t n_timeslots,
                 double train_fraction) {
  cfg.validate();
  if (n_samples < 1 || n_timeslots < 1)
    throw ConfigError("generate: n_samples and n_timeslots must be >= 1");
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0))
    throw ConfigError("generate: train_fraction must be in [0, 1]");

  Dataset d;
  d.samples.resize(n_samples);
  d.n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n_samples)));

  const double innov = std::sqrt(1.0 - cfg.ar * cfg.ar);
  for (std::size_t s = 0; s < n_samples; ++s) {
    std::mt19937_64 rng(derive_seed(cfg.seed, s));
    std::normal_distribution<double> gauss(0.0, 1.0);
    ChannelSequence& seq = d.samples[s];
    seq.timeslots.reserve(n_timeslots);
    CMat clean = synth_multipath(cfg, rng);
    for (std::size_t t = 0; t < n_timeslots; ++t) {
      if (t > 0) clean = cfg.ar * clean + innov * synth_multipath(cfg, rng);
      CMat stored = clean;
      if (cfg.noise_std > 0.0) {
        for (Index c = 0; c < stored.cols(); ++c)
          for (Index r = 0; r < stored.rows(); ++r)
            stored(r, c) += complex_gauss(rng, gauss, cfg.noise_std);
      }
      seq.timeslots.push_back(std::move(stored));
    }
  }
  return d;
}

CMat evolve(const CMat& h, double a, std::uint64_t seed) {
  if (!(a >= 0.0 && a <= 1.0)) throw ParameterError("evolve: a must be in [0, 1]");
  if (a == 1.0) return h;
  const double var = h.squaredNorm() / static_cast<double>(h.size());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  CMat w(h.rows(), h.cols());
  for (Index c = 0; c < w.cols(); ++c)
    for (Index r = 0; r < w.rows(); ++r)
      w(r, c) = complex_gauss(rng, gauss, std::sqrt(var));
  return a * h + std::sqrt(1.0 - a * a) * w;
}

CMat to_angular_delay(const CMat& h, Index n_t) {
  if (n_t < 1 || n_t > h.cols())
    throw DimensionError("to_angular_delay: n_t must be in [1, n_f]");
  const CMat fcols = numerics::dft_columns(h.cols(), n_t);
  const CMat delay = h * fcols.conjugate();
  const CMat fb = numerics::dft_matrix(h.rows());
  return fb * delay;
}

CMat from_angular_delay(const CMat& h_ang, Index n_f) {
  if (n_f < h_ang.cols())
    throw DimensionError("from_angular_delay: n_f must be >= the delay width");
  const CMat fb = numerics::dft_matrix(h_ang.rows());
  CMat padded = CMat::Zero(h_ang.rows(), n_f);
  padded.leftCols(h_ang.cols()) = fb.adjoint() * h_ang;
  return padded * numerics::dft_matrix(n_f);
}

Dataset phase_augment(const Dataset& d, std::size_t n_phase, std::uint64_t seed) {
  if (n_phase < 1) throw ParameterError("phase_augment: n_phase must be >= 1");
  if (n_phase == 1) return d;

  Dataset out;
  out.n_train = d.n_train * n_phase;
  out.samples.reserve(out.n_train + d.n_val());
  for (std::size_t i = 0; i < d.n_train; ++i) out.samples.push_back(d.samples[i]);
  for (std::size_t round = 1; round < n_phase; ++round) {
    for (std::size_t i = 0; i < d.n_train; ++i) {
      std::mt19937_64 rng(derive_seed(seed, round * d.n_train + i));
      std::uniform_real_distribution<double> uang(-kPi, kPi);
      const Cplx factor = std::polar(1.0, -uang(rng));
      ChannelSequence copy = d.samples[i];
      for (CMat& slot : copy.timeslots) slot *= factor;
      out.samples.push_back(std::move(copy));
    }
  }
  for (std::size_t i = d.n_train; i < d.samples.size(); ++i) out.samples.push_back(d.samples[i]);
  return out;
}

namespace {
constexpr char kMagic[4] = {'D', 'C', 'S', 'T'};
constexpr std::uint16_t kVersion = 1;
} // namespace

void save(const Dataset& d, const std::string& path) {
  if (d.samples.empty()) throw DegenerateInputError("save: dataset is empty");
  const std::size_t n_timeslots = d.samples.front().timeslots.size();
  const Index n_b = d.samples.front().timeslots.front().rows();
  const Index n_f = d.samples.front().timeslots.front().cols();

  binio::Writer w(path);
  w.bytes(kMagic, 4);
  w.pod<std::uint16_t>(kVersion);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(d.samples.size()));
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(n_timeslots));
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(n_b));
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(n_f));
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(d.n_train));
  for (const ChannelSequence& seq : d.samples) {
    if (seq.timeslots.size() != n_timeslots)
      throw DimensionError("save: inconsistent timeslot count across samples");
    for (const CMat& m : seq.timeslots) {
      if (m.rows() != n_b || m.cols() != n_f)
        throw DimensionError("save: inconsistent matrix shape across samples");
      for (Index r = 0; r < n_b; ++r) {
        for (Index c = 0; c < n_f; ++c) {
          w.pod<double>(m(r, c).real());
          w.pod<double>(m(r, c).imag());
        }
      }
    }
  }
}

Dataset load(const std::string& path) {
  binio::Reader in(path);
  char magic[4];
  in.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad magic at byte 0, expected \"DCST\": " + path);
  const auto version = in.pod<std::uint16_t>();
  if (version != kVersion)
    throw FormatError("unsupported dataset version " + std::to_string(version) + ": " + path);
  const auto n_samples = in.pod<std::uint32_t>();
  const auto n_timeslots = in.pod<std::uint32_t>();
  const auto n_b = in.pod<std::uint32_t>();
  const auto n_f = in.pod<std::uint32_t>();
  const auto n_train = in.pod<std::uint32_t>();
  if (n_samples == 0 || n_timeslots == 0 || n_b == 0 || n_f == 0)
    throw FormatError("corrupt header (zero dimension) at byte 6: " + path);
  if (n_train > n_samples)
    throw FormatError("corrupt header (n_train > n_samples) at byte 22: " + path);

  Dataset d;
  d.n_train = n_train;
  d.samples.resize(n_samples);
  for (std::uint32_t s = 0; s < n_samples; ++s) {
    d.samples[s].timeslots.reserve(n_timeslots);
    for (std::uint32_t t = 0; t < n_timeslots; ++t) {
      CMat m(n_b, n_f);
      for (std::uint32_t r = 0; r < n_b; ++r) {
        for (std::uint32_t c = 0; c < n_f; ++c) {
          const double re = in.pod<double>();
          const double im = in.pod<double>();
          m(r, c) = Cplx(re, im);
        }
      }
      d.samples[s].timeslots.push_back(std::move(m));
    }
  }
  if (!in.at_eof())
    throw FormatError("trailing bytes at byte " + std::to_string(in.offset()) + ": " + path);
  return d;
}

} // namespace csilab::channel
