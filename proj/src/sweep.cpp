#include "csilab/sweep.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "csilab/diffchain.hpp"
#include "csilab/metrics.hpp"
#include "csilab/p2d.hpp"
#include "csilab/pilots.hpp"
#include "csilab/svg.hpp"

namespace csilab::harness {

using nlohmann::json;
namespace fs = std::filesystem;

void ExperimentConfig::validate() const {
  chan.validate();
  if (n_samples < 2) throw ConfigError("sweep: n_samples must be >= 2");
  if (n_timeslots < 1) throw ConfigError("sweep: n_timeslots must be >= 1");
  if (dr_f.empty() || d.empty() || cr.empty() || n_phase.empty())
    throw ConfigError("sweep: grids must be non-empty");
  for (double r : dr_f)
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("sweep: dr_f values must be in (0, 1]");
  for (double r : cr)
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("sweep: cr values must be in (0, 1]");
  for (int p : n_phase)
    if (p < 1) throw ConfigError("sweep: n_phase values must be >= 1");
  if (mode != "p2d" && mode != "codec" && mode != "chain")
    throw ConfigError("sweep: mode must be p2d, codec or chain");
  if (mode == "chain" && n_timeslots < static_cast<std::size_t>(chain.t))
    throw ConfigError("sweep: chain mode needs n_timeslots >= chain.t");
  if (workers < 1) throw ConfigError("sweep: workers must be >= 1");
  if (output_dir.empty()) throw ConfigError("sweep: output_dir must be set");
}

namespace {

void get_if(const json& j, const char* key, auto& out) {
  if (j.contains(key)) out = j.at(key).get<std::remove_reference_t<decltype(out)>>();
}

} // namespace

ExperimentConfig config_from_json_string(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw FormatError("config is not valid JSON");
  ExperimentConfig cfg;
  if (j.contains("channel")) {
    const json& c = j.at("channel");
    get_if(c, "n_b", cfg.chan.n_b);
    get_if(c, "n_f", cfg.chan.n_f);
    get_if(c, "n_t", cfg.chan.n_t);
    get_if(c, "n_paths", cfg.chan.n_paths);
    get_if(c, "max_delay_tap", cfg.chan.max_delay_tap);
    get_if(c, "ar", cfg.chan.ar);
    get_if(c, "leakage", cfg.chan.leakage);
    get_if(c, "noise_std", cfg.chan.noise_std);
    get_if(c, "seed", cfg.chan.seed);
  }
  get_if(j, "n_samples", cfg.n_samples);
  get_if(j, "n_timeslots", cfg.n_timeslots);
  get_if(j, "train_fraction", cfg.train_fraction);
  get_if(j, "dataset", cfg.dataset_path);
  get_if(j, "dr_f", cfg.dr_f);
  get_if(j, "d", cfg.d);
  get_if(j, "delta", cfg.delta);
  get_if(j, "cr", cfg.cr);
  get_if(j, "n_phase", cfg.n_phase);
  get_if(j, "mode", cfg.mode);
  if (j.contains("codec")) {
    const json& c = j.at("codec");
    get_if(c, "kind", cfg.codec_kind);
    get_if(c, "k", cfg.k);
    get_if(c, "hidden", cfg.hidden);
  }
  if (j.contains("chain")) {
    const json& c = j.at("chain");
    get_if(c, "t", cfg.chain.t);
    get_if(c, "cr_t1", cfg.chain.cr_t1);
    get_if(c, "plan", cfg.chain.plan);
  }
  if (j.contains("train")) {
    const json& c = j.at("train");
    get_if(c, "epochs", cfg.train.epochs);
    get_if(c, "batch_size", cfg.train.batch_size);
    get_if(c, "learning_rate", cfg.train.learning_rate);
    get_if(c, "sym_weight", cfg.train.sym_weight);
    get_if(c, "seed", cfg.train.seed);
  }
  get_if(j, "output_dir", cfg.output_dir);
  get_if(j, "stable_timing", cfg.stable_timing);
  get_if(j, "workers", cfg.workers);
  return cfg;
}

ExperimentConfig config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_string(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j = {
      {"channel",
       {{"n_b", cfg.chan.n_b},
        {"n_f", cfg.chan.n_f},
        {"n_t", cfg.chan.n_t},
        {"n_paths", cfg.chan.n_paths},
        {"max_delay_tap", cfg.chan.max_delay_tap},
        {"ar", cfg.chan.ar},
        {"leakage", cfg.chan.leakage},
        {"noise_std", cfg.chan.noise_std},
        {"seed", cfg.chan.seed}}},
      {"n_samples", cfg.n_samples},
      {"n_timeslots", cfg.n_timeslots},
      {"train_fraction", cfg.train_fraction},
      {"dataset", cfg.dataset_path},
      {"dr_f", cfg.dr_f},
      {"d", cfg.d},
      {"delta", cfg.delta},
      {"cr", cfg.cr},
      {"n_phase", cfg.n_phase},
      {"mode", cfg.mode},
      {"codec", {{"kind", cfg.codec_kind}, {"k", cfg.k}, {"hidden", cfg.hidden}}},
      {"chain", {{"t", cfg.chain.t}, {"cr_t1", cfg.chain.cr_t1}, {"plan", cfg.chain.plan}}},
      {"train",
       {{"epochs", cfg.train.epochs},
        {"batch_size", cfg.train.batch_size},
        {"learning_rate", cfg.train.learning_rate},
        {"sym_weight", cfg.train.sym_weight},
        {"seed", cfg.train.seed}}},
      {"output_dir", cfg.output_dir},
      {"stable_timing", cfg.stable_timing},
      {"workers", cfg.workers},
  };
  return j.dump(2);
}

void apply_profile(ExperimentConfig& cfg, const std::string& profile) {
  if (profile == "desk") {
    cfg.chan.n_b = 32;
    cfg.chan.n_f = 256;
    cfg.chan.n_t = 32;
    cfg.n_samples = 2000;
  } else if (profile == "paper") {
    cfg.chan.n_b = 32;
    cfg.chan.n_f = 1024;
    cfg.chan.n_t = 32;
    cfg.n_samples = 10000;
  } else {
    throw ConfigError("unknown profile \"" + profile + "\" (expected desk or paper)");
  }
}

void apply_master_seed(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.chan.seed = derive_seed(seed, 1);
  cfg.train.seed = derive_seed(seed, 2);
}

void write_csv(const std::vector<MetricRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "dr_f,d,cr,timeslot,codec,nmse_db,wall_seconds\n";
  char buf[256];
  for (const MetricRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.6f,%d,%.6f,%d,%s,%.6f,%.6f\n", r.dr_f, r.d, r.cr,
                  r.timeslot, r.codec.c_str(), r.nmse_db, r.wall_seconds);
    out << buf;
  }
}

std::vector<MetricRow> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty CSV: " + path);
  if (line != "dr_f,d,cr,timeslot,codec,nmse_db,wall_seconds")
    throw FormatError("unexpected CSV header: " + path);
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MetricRow r;
    char codec[64] = {0};
    if (std::sscanf(line.c_str(), "%lf,%d,%lf,%d,%63[^,],%lf,%lf", &r.dr_f, &r.d, &r.cr,
                    &r.timeslot, codec, &r.nmse_db, &r.wall_seconds) != 7)
      throw FormatError("malformed CSV row \"" + line + "\": " + path);
    r.codec = codec;
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

struct GridPoint {
  double dr_f;
  int d;
  double cr;
  int n_phase;
  std::size_t index;
};

struct SlotData {
  std::vector<CMat> truth;    // angular-delay ground truth per sample
  std::vector<CMat> p2d_est;  // P2D estimate per sample
};

// Validation-only view of one timeslot under a given pattern.
SlotData eval_slot(const channel::Dataset& data, const p2d::P2dEstimator& est, std::size_t slot) {
  SlotData out;
  for (std::size_t i = data.n_train; i < data.samples.size(); ++i) {
    const CMat& h = data.samples[i].timeslots[slot];
    out.truth.push_back(channel::to_angular_delay(h, est.n_t));
    out.p2d_est.push_back(p2d::estimate(pilots::sample_pilots(h, est.pattern), est));
  }
  return out;
}

std::vector<MetricRow> run_point(const ExperimentConfig& cfg, const channel::Dataset& data,
                                 const GridPoint& g) {
  const Index m_f = static_cast<Index>(std::llround(g.dr_f * static_cast<double>(cfg.chan.n_f)));
  const auto pattern = pilots::build_pattern(cfg.chan.n_f, m_f, g.d);
  const auto estimator = p2d::build_estimator(pattern, cfg.chan.n_t, cfg.delta);

  std::vector<MetricRow> rows;
  if (cfg.mode == "p2d") {
    const SlotData slot = eval_slot(data, estimator, 0);
    MetricRow r;
    r.dr_f = g.dr_f;
    r.d = g.d;
    r.cr = 1.0;
    r.timeslot = 1;
    r.codec = "p2d";
    r.nmse_db = metrics::nmse_db(slot.truth, slot.p2d_est);
    rows.push_back(std::move(r));
    return rows;
  }

  const channel::Dataset aug =
      g.n_phase > 1 ? channel::phase_augment(data, g.n_phase, derive_seed(cfg.chan.seed, 7000 + g.index))
                    : data;
  const Index n_b = cfg.chan.n_b, n_t = cfg.chan.n_t;
  const Index n_total = 2 * n_b * n_t;

  if (cfg.mode == "codec") {
    RMat in(n_total, aug.n_train), tgt(n_total, aug.n_train);
    for (std::size_t i = 0; i < aug.n_train; ++i) {
      const CMat& h = aug.samples[i].timeslots[0];
      in.col(i) = diffchain::vectorize(p2d::estimate(pilots::sample_pilots(h, pattern), estimator));
      tgt.col(i) = diffchain::vectorize(channel::to_angular_delay(h, n_t));
    }
    const SlotData val = eval_slot(aug, estimator, 0);
    RMat vin(n_total, val.truth.size()), vtgt(n_total, val.truth.size());
    for (std::size_t i = 0; i < val.truth.size(); ++i) {
      vin.col(i) = diffchain::vectorize(val.p2d_est[i]);
      vtgt.col(i) = diffchain::vectorize(val.truth[i]);
    }

    codec::CodecSpec spec;
    spec.kind = cfg.codec_kind;
    spec.n_total = n_total;
    spec.cr = g.cr;
    spec.k = cfg.k;
    spec.hidden = cfg.hidden;
    spec.seed = derive_seed(cfg.train.seed, 9000 + g.index);
    auto cdc = codec::make_codec(spec);
    training::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.train.seed, 11000 + g.index);
    cdc->train(in, tgt, vin, vtgt, tc);

    std::vector<CMat> est;
    est.reserve(val.truth.size());
    const RMat recon = cdc->reconstruct(vin);
    for (std::size_t i = 0; i < val.truth.size(); ++i)
      est.push_back(diffchain::unvectorize(recon.col(i), n_b, n_t));

    MetricRow r;
    r.dr_f = g.dr_f;
    r.d = g.d;
    r.cr = g.cr;
    r.timeslot = 1;
    r.codec = cfg.codec_kind;
    r.nmse_db = metrics::nmse_db(val.truth, est);
    rows.push_back(std::move(r));
    return rows;
  }

  // chain mode
  diffchain::ChainConfig cc;
  cc.t = cfg.chain.t;
  cc.cr_t1 = cfg.chain.cr_t1;
  cc.cr_rest = g.cr;
  cc.plan = cfg.chain.plan;
  cc.k = cfg.k;
  cc.hidden = cfg.hidden;
  cc.train = cfg.train;
  cc.seed = derive_seed(cfg.train.seed, 13000 + g.index);
  const auto chain = diffchain::chain_train(aug, estimator, cc);

  std::vector<std::vector<CMat>> truth(cc.t), est(cc.t);
  for (std::size_t i = aug.n_train; i < aug.samples.size(); ++i) {
    std::vector<CMat> obs;
    for (int t = 0; t < cc.t; ++t)
      obs.push_back(pilots::sample_pilots(aug.samples[i].timeslots[t], pattern));
    const auto inf = diffchain::chain_infer(chain, obs);
    for (int t = 0; t < cc.t; ++t) {
      truth[t].push_back(channel::to_angular_delay(aug.samples[i].timeslots[t], n_t));
      est[t].push_back(inf.h_hat[t]);
    }
  }
  for (int t = 0; t < cc.t; ++t) {
    MetricRow r;
    r.dr_f = g.dr_f;
    r.d = g.d;
    r.cr = g.cr;
    r.timeslot = t + 1;
    r.codec = cc.label();
    r.nmse_db = metrics::nmse_db(truth[t], est[t]);
    rows.push_back(std::move(r));
  }
  return rows;
}

} // namespace

std::vector<MetricRow> run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();

  // Fail on an unwritable output directory before any work starts.
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  const fs::path out_dir(cfg.output_dir);
  {
    std::ofstream manifest(out_dir / "manifest.json");
    if (!manifest) throw IoError("output_dir is not writable: " + cfg.output_dir);
    manifest << config_to_json(cfg) << "\n";
  }

  const channel::Dataset data =
      cfg.dataset_path.empty()
          ? channel::generate(cfg.chan, cfg.n_samples, cfg.n_timeslots, cfg.train_fraction)
          : channel::load(cfg.dataset_path);

  std::vector<GridPoint> grid;
  for (double dr : cfg.dr_f)
    for (int dd : cfg.d)
      for (double crv : cfg.cr)
        for (int np : cfg.n_phase)
          grid.push_back({dr, dd, crv, np, grid.size()});

  std::vector<std::vector<MetricRow>> results(grid.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;

  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= grid.size()) return;
      const auto start = std::chrono::steady_clock::now();
      try {
        results[i] = run_point(cfg, data, grid[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      for (MetricRow& r : results[i]) r.wall_seconds = cfg.stable_timing ? 0.0 : secs;
    }
  };

  const int n_workers = std::min<int>(cfg.workers, static_cast<int>(grid.size()));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  std::vector<MetricRow> rows;
  for (auto& part : results)
    for (MetricRow& r : part) rows.push_back(std::move(r));

  write_csv(rows, (out_dir / "results.csv").string());
  write_charts(rows, cfg.output_dir);
  return rows;
}

void write_charts(const std::vector<MetricRow>& rows, const std::string& dir) {
  const fs::path out_dir(dir);

  // Estimator rows: NMSE vs dr_f, one series per d.
  {
    std::map<int, svg::Series> by_d;
    for (const MetricRow& r : rows) {
      if (r.codec != "p2d") continue;
      auto& s = by_d[r.d];
      s.name = "d=" + std::to_string(r.d);
      s.points.emplace_back(r.dr_f, r.nmse_db);
    }
    if (!by_d.empty()) {
      svg::LineChart chart;
      chart.title = "Estimator accuracy vs frequency downsampling";
      chart.x_label = "dr_f";
      chart.y_label = "NMSE [dB]";
      chart.log2_x = true;
      for (auto& [_, s] : by_d) chart.series.push_back(std::move(s));
      svg::write_line_chart(chart, (out_dir / "p2d_nmse_vs_drf.svg").string());
    }
  }

  // Codec rows at timeslot 1: NMSE vs cr, one series per (codec, dr_f, d, n_phase...).
  {
    std::map<std::string, svg::Series> by_key;
    for (const MetricRow& r : rows) {
      if (r.codec == "p2d" || r.timeslot != 1) continue;
      char key[96];
      std::snprintf(key, sizeof(key), "%s dr_f=%.4g d=%d", r.codec.c_str(), r.dr_f, r.d);
      auto& s = by_key[key];
      s.name = key;
      s.points.emplace_back(r.cr, r.nmse_db);
    }
    if (!by_key.empty()) {
      svg::LineChart chart;
      chart.title = "Feedback accuracy vs compression ratio";
      chart.x_label = "cr";
      chart.y_label = "NMSE [dB]";
      chart.log2_x = true;
      for (auto& [_, s] : by_key) chart.series.push_back(std::move(s));
      svg::write_line_chart(chart, (out_dir / "codec_nmse_vs_cr.svg").string());
    }
  }

  // Chain rows: NMSE vs timeslot, one series per (codec, cr).
  {
    std::map<std::string, svg::Series> by_key;
    bool any_multislot = false;
    for (const MetricRow& r : rows) {
      if (r.codec == "p2d") continue;
      if (r.timeslot > 1) any_multislot = true;
    }
    if (any_multislot) {
      for (const MetricRow& r : rows) {
        if (r.codec == "p2d") continue;
        char key[96];
        std::snprintf(key, sizeof(key), "%s cr=%.4g", r.codec.c_str(), r.cr);
        auto& s = by_key[key];
        s.name = key;
        s.points.emplace_back(static_cast<double>(r.timeslot), r.nmse_db);
      }
      svg::LineChart chart;
      chart.title = "Differential encoding accuracy per timeslot";
      chart.x_label = "timeslot";
      chart.y_label = "NMSE [dB]";
      for (auto& [_, s] : by_key) chart.series.push_back(std::move(s));
      svg::write_line_chart(chart, (out_dir / "chain_nmse_vs_timeslot.svg").string());
    }
  }
}

} // namespace csilab::harness
