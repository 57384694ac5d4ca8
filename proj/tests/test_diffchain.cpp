#include <doctest.h>

#include <filesystem>
#include <random>

#include "csilab/channel.hpp"
#include "csilab/diffchain.hpp"
#include "csilab/pilots.hpp"

using namespace csilab;
using namespace csilab::diffchain;

namespace {

CMat random_complex(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  CMat m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = Cplx(g(rng), g(rng));
  return m;
}

// Lossless codec at full rate: square orthonormal measurement, one gradient
// block with rho = 1 and a negligible threshold, residual branch removed.
std::unique_ptr<codec::Codec> identity_codec(Index n_total, std::uint64_t seed) {
  cs::IstaConfig cfg;
  cfg.n_total = n_total;
  cfg.cr = 1.0;
  cfg.k = 1;
  cfg.hidden = 16;
  cfg.seed = seed;
  cfg.init_noise = 0.0;
  cs::IstaModel m = cs::IstaModel::create(cfg);
  m.blocks[0].rho = 1.0;
  m.blocks[0].theta_raw = -60.0;
  m.blocks[0].project.setZero();
  m.q_init = RMat::Zero(n_total, n_total);
  return std::make_unique<codec::IstaCodec>(std::move(m));
}

// Always decodes to zero.
std::unique_ptr<codec::Codec> zero_codec(Index n_total, std::uint64_t seed) {
  training::AeConfig cfg;
  cfg.n_total = n_total;
  cfg.cr = 0.25;
  cfg.seed = seed;
  training::DenseAutoencoder ae = training::DenseAutoencoder::create(cfg);
  ae.w3.setZero();
  ae.b3.setZero();
  return std::make_unique<codec::AeCodec>(std::move(ae));
}

channel::ChannelConfig chain_cfg() {
  channel::ChannelConfig cfg;
  cfg.n_b = 8;
  cfg.n_f = 32;
  cfg.n_t = 8;
  cfg.n_paths = 4;
  cfg.max_delay_tap = 6;
  cfg.ar = 0.9;
  cfg.leakage = 0.0;
  cfg.noise_std = 0.0;
  cfg.seed = 404;
  return cfg;
}

} // namespace

TEST_CASE("vectorize round-trips") {
  const CMat m = random_complex(4, 6, 1);
  const RVec v = vectorize(m);
  CHECK(v.size() == 48);
  CHECK((unvectorize(v, 4, 6) - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fit_gamma") {
  std::vector<CMat> prev, truth;
  for (int i = 0; i < 5; ++i) prev.push_back(random_complex(4, 4, 10 + i));

  SUBCASE("static channel gives gamma = 1") {
    CHECK(fit_gamma(prev, prev) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("exact scaling is recovered") {
    truth.clear();
    for (const auto& p : prev) truth.push_back(0.7 * p);
    CHECK(fit_gamma(prev, truth) == doctest::Approx(0.7).epsilon(1e-12));
  }
  SUBCASE("ar(1) data with perfect previous estimates lands near the coefficient") {
    auto cfg = chain_cfg();
    const auto data = channel::generate(cfg, 100, 2);
    std::vector<CMat> h1, h2;
    for (const auto& s : data.samples) {
      h1.push_back(channel::to_angular_delay(s.timeslots[0], cfg.n_t));
      h2.push_back(channel::to_angular_delay(s.timeslots[1], cfg.n_t));
    }
    const double gamma = fit_gamma(h1, h2);
    CHECK(gamma >= 0.85);
    CHECK(gamma <= 0.95);
  }
  SUBCASE("gamma is the least-squares minimizer") {
    truth.clear();
    for (int i = 0; i < 5; ++i) truth.push_back(random_complex(4, 4, 50 + i));
    const double gamma = fit_gamma(prev, truth);
    auto obj = [&](double g) {
      double acc = 0.0;
      for (std::size_t i = 0; i < prev.size(); ++i) acc += (truth[i] - g * prev[i]).squaredNorm();
      return acc;
    };
    CHECK(obj(gamma) <= obj(gamma * 1.01));
    CHECK(obj(gamma) <= obj(gamma * 0.99));
  }
  SUBCASE("zero previous energy is degenerate") {
    std::vector<CMat> zeros(3, CMat::Zero(2, 2));
    CHECK_THROWS_AS(fit_gamma(zeros, zeros), DegenerateInputError);
  }
}

TEST_CASE("residual energy matches the ar(1) closed form") {
  auto cfg = chain_cfg();
  const auto data = channel::generate(cfg, 150, 2);
  std::vector<CMat> h1, h2;
  for (const auto& s : data.samples) {
    h1.push_back(channel::to_angular_delay(s.timeslots[0], cfg.n_t));
    h2.push_back(channel::to_angular_delay(s.timeslots[1], cfg.n_t));
  }
  const double gamma = fit_gamma(h1, h2);
  double err = 0.0, tot = 0.0;
  for (std::size_t i = 0; i < h1.size(); ++i) {
    err += (h2[i] - gamma * h1[i]).squaredNorm();
    tot += h2[i].squaredNorm();
  }
  const double ratio = err / tot;
  CHECK(ratio > 0.19 * 0.8);
  CHECK(ratio < 0.19 * 1.2);
  // variance reduction with margin >= 0.5 * a^2 * E
  CHECK(tot - err >= 0.5 * 0.81 * tot);
}

TEST_CASE("chain config validation") {
  ChainConfig cfg;
  cfg.t = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.t = 3;
  cfg.cr_t1 = 0.25;
  cfg.cr_rest = 0.5; // violates cr_t1 >= cr_rest
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.cr_rest = 0.25;
  cfg.plan = {"ista", "nope"};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.plan = {"ista", "ae"};
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.label() == "mn-ie");
  cfg.plan = {"ista"};
  CHECK(cfg.label() == "mn-i");
  cfg.plan = {"ae"};
  CHECK(cfg.label() == "mn-e");
  cfg.plan = {"ae", "ista"};
  CHECK(cfg.label() == "chain");
}

TEST_CASE("identity chain reproduces the truth on supported noiseless data") {
  auto cfg = chain_cfg();
  const auto data = channel::generate(cfg, 3, 4);
  const auto pattern = pilots::build_pattern(cfg.n_f, cfg.n_t, 2); // m_f = n_t exact regime
  const auto est = p2d::build_estimator(pattern, cfg.n_t, 0.0);

  DifferentialChain chain;
  chain.cfg.t = 4;
  chain.cfg.cr_t1 = 1.0;
  chain.cfg.cr_rest = 1.0;
  chain.estimator = est;
  chain.n_b = cfg.n_b;
  const Index n_total = 2 * cfg.n_b * cfg.n_t;
  for (int t = 0; t < 4; ++t) chain.codecs.push_back(identity_codec(n_total, 900 + t));
  chain.gamma_ls = {0.9, 0.9, 0.9};

  for (const auto& s : data.samples) {
    std::vector<CMat> obs;
    for (int t = 0; t < 4; ++t) obs.push_back(pilots::sample_pilots(s.timeslots[t], pattern));
    const auto inf = chain_infer(chain, obs);
    for (int t = 0; t < 4; ++t) {
      const CMat truth = channel::to_angular_delay(s.timeslots[t], cfg.n_t);
      CHECK((inf.h_hat[t] - truth).norm() / truth.norm() < 1e-10);
    }
    // reconstruction identity up to rounding
    for (int t = 1; t < 4; ++t) {
      const CMat lhs = inf.h_hat[t] - chain.gamma_ls[t - 1] * inf.h_hat[t - 1];
      CHECK((lhs - inf.e_hat[t]).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("zero residual codecs with gamma = 1 hold the estimate constant") {
  auto cfg = chain_cfg();
  const auto data = channel::generate(cfg, 2, 3);
  const auto pattern = pilots::build_pattern(cfg.n_f, cfg.n_t, 1);
  const auto est = p2d::build_estimator(pattern, cfg.n_t, 0.0);

  DifferentialChain chain;
  chain.cfg.t = 3;
  chain.cfg.cr_t1 = 1.0;
  chain.cfg.cr_rest = 0.25;
  chain.estimator = est;
  chain.n_b = cfg.n_b;
  const Index n_total = 2 * cfg.n_b * cfg.n_t;
  chain.codecs.push_back(identity_codec(n_total, 1));
  chain.codecs.push_back(zero_codec(n_total, 2));
  chain.codecs.push_back(zero_codec(n_total, 3));
  chain.gamma_ls = {1.0, 1.0};

  std::vector<CMat> obs;
  for (int t = 0; t < 3; ++t)
    obs.push_back(pilots::sample_pilots(data.samples[0].timeslots[t], pattern));
  const auto inf = chain_infer(chain, obs);
  CHECK((inf.h_hat[1] - inf.h_hat[0]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((inf.h_hat[2] - inf.h_hat[0]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("chain_train rejects bad setups") {
  auto cfg = chain_cfg();
  const auto data = channel::generate(cfg, 6, 2);
  const auto pattern = pilots::build_pattern(cfg.n_f, cfg.n_t, 1);
  const auto est = p2d::build_estimator(pattern, cfg.n_t, 0.0);
  ChainConfig cc;
  cc.t = 4; // longer than the 2 available timeslots
  CHECK_THROWS_AS(chain_train(data, est, cc), ConfigError);
}

TEST_CASE("trained chain improves on static channels and round-trips through disk") {
  auto cfg = chain_cfg();
  cfg.ar = 1.0; // static: residuals are exactly zero
  // 150 training samples keep the full-rate initializer full-rank
  // (n_total = 128), so the first-slot codec is essentially lossless.
  const auto data = channel::generate(cfg, 200, 2);
  const auto pattern = pilots::build_pattern(cfg.n_f, cfg.n_t, 1);
  const auto est = p2d::build_estimator(pattern, cfg.n_t, 0.0);

  ChainConfig cc;
  cc.t = 2;
  cc.cr_t1 = 1.0;
  cc.cr_rest = 0.25;
  cc.plan = {"ista"};
  cc.k = 3;
  cc.hidden = 32;
  cc.train.epochs = 4;
  cc.train.batch_size = 32;
  cc.train.seed = 5;
  cc.seed = 6;
  const auto chain = chain_train(data, est, cc);
  REQUIRE(chain.gamma_ls.size() == 1);
  CHECK(chain.gamma_ls[0] == doctest::Approx(1.0).epsilon(0.2));

  // static channel: slot-2 NMSE should not be worse than slot 1
  double nmse1 = 0.0, nmse2 = 0.0;
  int count = 0;
  for (std::size_t i = data.n_train; i < data.samples.size(); ++i) {
    std::vector<CMat> obs;
    for (int t = 0; t < 2; ++t)
      obs.push_back(pilots::sample_pilots(data.samples[i].timeslots[t], pattern));
    const auto inf = chain_infer(chain, obs);
    for (int t = 0; t < 2; ++t) {
      const CMat truth = channel::to_angular_delay(data.samples[i].timeslots[t], cfg.n_t);
      const double e = (inf.h_hat[t] - truth).squaredNorm() / truth.squaredNorm();
      (t == 0 ? nmse1 : nmse2) += e;
    }
    ++count;
  }
  CHECK(nmse2 <= nmse1 * 1.05 + 1e-12);

  const auto dir = (std::filesystem::temp_directory_path() / "csilab_chain_rt").string();
  save_chain(chain, dir);
  const auto back = load_chain(dir);
  CHECK(back.cfg.t == 2);
  CHECK(back.gamma_ls.size() == 1);
  CHECK(back.gamma_ls[0] == chain.gamma_ls[0]);
  std::vector<CMat> obs;
  for (int t = 0; t < 2; ++t)
    obs.push_back(pilots::sample_pilots(data.samples.back().timeslots[t], pattern));
  const auto a = chain_infer(chain, obs);
  const auto b = chain_infer(back, obs);
  for (int t = 0; t < 2; ++t) CHECK((a.h_hat[t] - b.h_hat[t]).cwiseAbs().maxCoeff() == 0.0);
  std::filesystem::remove_all(dir);
}
