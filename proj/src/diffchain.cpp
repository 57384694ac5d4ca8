#include "csilab/diffchain.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "csilab/pilots.hpp"

namespace csilab::diffchain {

using nlohmann::json;

RVec vectorize(const CMat& m) {
  const Index n = m.size();
  RVec v(2 * n);
  Eigen::Map<const Eigen::ArrayXcd> flat(m.data(), n);
  v.head(n) = flat.real();
  v.tail(n) = flat.imag();
  return v;
}

CMat unvectorize(const RVec& v, Index rows, Index cols) {
  const Index n = rows * cols;
  if (v.size() != 2 * n) throw DimensionError("unvectorize: length mismatch");
  CMat m(rows, cols);
  Eigen::Map<Eigen::ArrayXcd> flat(m.data(), n);
  flat.real() = v.head(n);
  flat.imag() = v.tail(n);
  return m;
}

double fit_gamma(const std::vector<CMat>& prev_estimates, const std::vector<CMat>& current_truth) {
  if (prev_estimates.empty() || prev_estimates.size() != current_truth.size())
    throw DimensionError("fit_gamma: lists must be non-empty and of equal length");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < prev_estimates.size(); ++i) {
    num += (prev_estimates[i].conjugate().cwiseProduct(current_truth[i])).sum().real();
    den += prev_estimates[i].squaredNorm();
  }
  if (!(den > 0.0)) throw DegenerateInputError("fit_gamma: zero previous-estimate energy");
  return num / den;
}

void ChainConfig::validate() const {
  if (t < 2) throw ConfigError("chain: t must be >= 2 (use a plain codec for a single slot)");
  if (!(cr_t1 > 0.0 && cr_t1 <= 1.0) || !(cr_rest > 0.0 && cr_rest <= 1.0))
    throw ConfigError("chain: compression ratios must be in (0, 1]");
  if (cr_t1 < cr_rest) throw ConfigError("chain: cr_t1 must be >= cr_rest");
  if (plan.empty()) throw ConfigError("chain: codec plan must not be empty");
  for (const std::string& kind : plan)
    if (kind != "ista" && kind != "ae")
      throw ConfigError("chain: unknown codec kind \"" + kind + "\" in plan");
}

std::string ChainConfig::kind_at(int slot) const {
  const std::size_t idx = std::min<std::size_t>(slot - 1, plan.size() - 1);
  return plan[idx];
}

std::string ChainConfig::label() const {
  bool all_ista = true, all_ae = true;
  for (int slot = 1; slot <= t; ++slot) {
    if (kind_at(slot) != "ista") all_ista = false;
    if (kind_at(slot) != "ae") all_ae = false;
  }
  if (all_ista) return "mn-i";
  if (all_ae) return "mn-e";
  bool ista_then_ae = kind_at(1) == "ista";
  for (int slot = 2; slot <= t; ++slot)
    if (kind_at(slot) != "ae") ista_then_ae = false;
  if (ista_then_ae) return "mn-ie";
  return "chain";
}

namespace {

RMat stack_vectors(const std::vector<CMat>& mats, const std::vector<std::size_t>& idx) {
  if (idx.empty()) return {};
  RMat out(2 * mats[idx[0]].size(), static_cast<Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) out.col(static_cast<Index>(c)) = vectorize(mats[idx[c]]);
  return out;
}

} // namespace

DifferentialChain chain_train(const channel::Dataset& data, const p2d::P2dEstimator& estimator,
                              const ChainConfig& cfg, std::vector<training::History>* histories) {
  cfg.validate();
  if (data.samples.empty()) throw DegenerateInputError("chain_train: empty dataset");
  for (const auto& s : data.samples)
    if (s.timeslots.size() < static_cast<std::size_t>(cfg.t))
      throw ConfigError("chain_train: dataset sequences are shorter than t = " + std::to_string(cfg.t));

  const Index n_b = data.samples.front().timeslots.front().rows();
  const Index n_t = estimator.n_t;
  const std::size_t n = data.samples.size();

  // P2D-side inputs and ground-truth angular-delay targets for every slot.
  std::vector<std::vector<CMat>> p2d_est(cfg.t), truth(cfg.t);
  for (int t = 0; t < cfg.t; ++t) {
    p2d_est[t].reserve(n);
    truth[t].reserve(n);
    for (const auto& s : data.samples) {
      const CMat& h = s.timeslots[t];
      p2d_est[t].push_back(p2d::estimate(pilots::sample_pilots(h, estimator.pattern), estimator));
      truth[t].push_back(channel::to_angular_delay(h, n_t));
    }
  }

  std::vector<std::size_t> train_idx(data.n_train), val_idx(data.n_val());
  for (std::size_t i = 0; i < data.n_train; ++i) train_idx[i] = i;
  for (std::size_t i = 0; i < data.n_val(); ++i) val_idx[i] = data.n_train + i;

  DifferentialChain chain;
  chain.cfg = cfg;
  chain.estimator = estimator;
  chain.n_b = n_b;

  // Slot 1: full CSI at cr_t1, targets are ground truth.
  codec::CodecSpec spec;
  spec.kind = cfg.kind_at(1);
  spec.n_total = 2 * n_b * n_t;
  spec.cr = cfg.cr_t1;
  spec.k = cfg.k;
  spec.hidden = cfg.hidden;
  spec.seed = derive_seed(cfg.seed, 1);
  chain.codecs.push_back(codec::make_codec(spec));
  {
    training::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, 101);
    auto hist = chain.codecs[0]->train(stack_vectors(p2d_est[0], train_idx),
                                       stack_vectors(truth[0], train_idx),
                                       stack_vectors(p2d_est[0], val_idx),
                                       stack_vectors(truth[0], val_idx), tc);
    if (histories) histories->push_back(std::move(hist));
  }

  // Rolling previous-slot reconstruction for every sample (teacher outputs,
  // not ground truth).
  std::vector<CMat> h_hat(n);
  for (std::size_t i = 0; i < n; ++i)
    h_hat[i] = unvectorize(chain.codecs[0]->reconstruct(vectorize(p2d_est[0][i])), n_b, n_t);

  for (int t = 2; t <= cfg.t; ++t) {
    std::vector<CMat> prev_train, truth_train;
    for (std::size_t i : train_idx) {
      prev_train.push_back(h_hat[i]);
      truth_train.push_back(truth[t - 1][i]);
    }
    const double gamma = fit_gamma(prev_train, truth_train);
    chain.gamma_ls.push_back(gamma);

    // Residuals: inputs on the P2D side, targets on the ground-truth side.
    std::vector<CMat> res_in(n), res_tgt(n);
    for (std::size_t i = 0; i < n; ++i) {
      res_in[i] = p2d_est[t - 1][i] - gamma * h_hat[i];
      res_tgt[i] = truth[t - 1][i] - gamma * h_hat[i];
    }

    spec.kind = cfg.kind_at(t);
    spec.cr = cfg.cr_rest;
    spec.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(t));
    chain.codecs.push_back(codec::make_codec(spec));
    training::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(t));
    auto hist = chain.codecs.back()->train(stack_vectors(res_in, train_idx),
                                           stack_vectors(res_tgt, train_idx),
                                           stack_vectors(res_in, val_idx),
                                           stack_vectors(res_tgt, val_idx), tc);
    if (histories) histories->push_back(std::move(hist));

    for (std::size_t i = 0; i < n; ++i) {
      const CMat e_hat = unvectorize(chain.codecs.back()->reconstruct(vectorize(res_in[i])), n_b, n_t);
      h_hat[i] = e_hat + gamma * h_hat[i];
    }
  }
  return chain;
}

ChainInference chain_infer(const DifferentialChain& chain, const std::vector<CMat>& pilot_obs) {
  if (pilot_obs.empty() || pilot_obs.size() > static_cast<std::size_t>(chain.cfg.t))
    throw ConfigError("chain_infer: sequence length must be in [1, t]");
  const Index n_b = chain.n_b;
  const Index n_t = chain.estimator.n_t;

  ChainInference out;
  for (std::size_t t = 0; t < pilot_obs.size(); ++t) {
    const CMat p2d_t = p2d::estimate(pilot_obs[t], chain.estimator);
    if (t == 0) {
      const CMat rec = unvectorize(chain.codecs[0]->reconstruct(vectorize(p2d_t)), n_b, n_t);
      out.e_hat.push_back(rec);
      out.h_hat.push_back(rec);
    } else {
      const double gamma = chain.gamma_ls[t - 1];
      const CMat residual = p2d_t - gamma * out.h_hat.back();
      const CMat e_hat = unvectorize(chain.codecs[t]->reconstruct(vectorize(residual)), n_b, n_t);
      out.e_hat.push_back(e_hat);
      out.h_hat.push_back(e_hat + gamma * out.h_hat.back());
    }
  }
  return out;
}

void save_chain(const DifferentialChain& chain, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create chain directory: " + dir);

  json manifest = {
      {"t", chain.cfg.t},
      {"cr_t1", chain.cfg.cr_t1},
      {"cr_rest", chain.cfg.cr_rest},
      {"plan", chain.cfg.plan},
      {"k", chain.cfg.k},
      {"hidden", chain.cfg.hidden},
      {"seed", chain.cfg.seed},
      {"gamma_ls", chain.gamma_ls},
      {"n_b", chain.n_b},
      {"pattern", {{"n_f", chain.estimator.pattern.n_f},
                   {"m_f", chain.estimator.pattern.m_f},
                   {"d", chain.estimator.pattern.d}}},
      {"n_t", chain.estimator.n_t},
      {"delta", chain.estimator.delta},
  };
  std::vector<std::string> files;
  for (std::size_t t = 0; t < chain.codecs.size(); ++t) {
    const std::string name = "codec_t" + std::to_string(t + 1) + ".ckpt";
    chain.codecs[t]->save((fs::path(dir) / name).string());
    files.push_back(name);
  }
  manifest["codec_files"] = files;
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw IoError("cannot write chain manifest in: " + dir);
  out << manifest.dump(2) << "\n";
}

DifferentialChain load_chain(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw IoError("cannot open chain manifest in: " + dir);
  json manifest = json::parse(in, nullptr, false);
  if (manifest.is_discarded()) throw FormatError("chain manifest is not valid JSON: " + dir);

  DifferentialChain chain;
  chain.cfg.t = manifest.at("t").get<int>();
  chain.cfg.cr_t1 = manifest.at("cr_t1").get<double>();
  chain.cfg.cr_rest = manifest.at("cr_rest").get<double>();
  chain.cfg.plan = manifest.at("plan").get<std::vector<std::string>>();
  chain.cfg.k = manifest.at("k").get<int>();
  chain.cfg.hidden = manifest.at("hidden").get<Index>();
  chain.cfg.seed = manifest.at("seed").get<std::uint64_t>();
  chain.gamma_ls = manifest.at("gamma_ls").get<std::vector<double>>();
  chain.n_b = manifest.at("n_b").get<Index>();

  const auto& pj = manifest.at("pattern");
  const auto pattern = pilots::build_pattern(pj.at("n_f").get<Index>(), pj.at("m_f").get<Index>(),
                                             pj.at("d").get<int>());
  chain.estimator = p2d::build_estimator(pattern, manifest.at("n_t").get<Index>(),
                                         manifest.at("delta").get<double>());
  for (const auto& name : manifest.at("codec_files").get<std::vector<std::string>>())
    chain.codecs.push_back(codec::load_codec((fs::path(dir) / name).string()));
  if (chain.codecs.size() != static_cast<std::size_t>(chain.cfg.t))
    throw FormatError("chain manifest lists " + std::to_string(chain.codecs.size()) +
                      " codecs for t = " + std::to_string(chain.cfg.t) + ": " + dir);
  return chain;
}

} // namespace csilab::diffchain
