// Command-line front end: dataset generation, estimator evaluation, codec
// and chain training, grid sweeps and chart emission.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "csilab/channel.hpp"
#include "csilab/diffchain.hpp"
#include "csilab/metrics.hpp"
#include "csilab/p2d.hpp"
#include "csilab/pilots.hpp"
#include "csilab/sweep.hpp"
#include "csilab/training.hpp"

namespace fs = std::filesystem;
using namespace csilab;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::string profile;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool config_required = true) {
  auto* c = cmd->add_option("--config", o.config_path, "JSON experiment config");
  if (config_required) c->required();
  cmd->add_option("--out", o.out_dir, "output directory")->required();
  cmd->add_option("--profile", o.profile, "channel scale profile: desk or paper");
  std::uint64_t* slot = nullptr;
  (void)slot;
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&o](std::uint64_t s) { o.seed = s; }, "master seed override");
}

harness::ExperimentConfig resolve_config(const CommonOpts& o) {
  harness::ExperimentConfig cfg;
  if (!o.profile.empty()) harness::apply_profile(cfg, o.profile);
  if (!o.config_path.empty()) {
    harness::ExperimentConfig file_cfg = harness::config_from_json_file(o.config_path);
    if (!o.profile.empty()) {
      // profile fills only what the file leaves at defaults; file wins
      harness::ExperimentConfig base = cfg;
      cfg = file_cfg;
      harness::ExperimentConfig defaults;
      if (cfg.chan.n_b == defaults.chan.n_b && cfg.chan.n_f == defaults.chan.n_f &&
          cfg.chan.n_t == defaults.chan.n_t && cfg.n_samples == defaults.n_samples) {
        cfg.chan.n_b = base.chan.n_b;
        cfg.chan.n_f = base.chan.n_f;
        cfg.chan.n_t = base.chan.n_t;
        cfg.n_samples = base.n_samples;
      }
    } else {
      cfg = file_cfg;
    }
  }
  cfg.output_dir = o.out_dir;
  if (o.seed) harness::apply_master_seed(cfg, *o.seed);
  return cfg;
}

void write_manifest(const harness::ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  std::ofstream out(fs::path(cfg.output_dir) / "manifest.json");
  if (!out) throw IoError("output_dir is not writable: " + cfg.output_dir);
  out << harness::config_to_json(cfg) << "\n";
}

int cmd_generate(const CommonOpts& o) {
  auto cfg = resolve_config(o);
  write_manifest(cfg);
  const auto data = channel::generate(cfg.chan, cfg.n_samples, cfg.n_timeslots, cfg.train_fraction);
  const std::string path = (fs::path(cfg.output_dir) / "dataset.bin").string();
  channel::save(data, path);
  std::printf("wrote %zu samples x %zu timeslots (%lldx%lld) to %s\n", data.size(),
              data.samples.front().timeslots.size(), static_cast<long long>(cfg.chan.n_b),
              static_cast<long long>(cfg.chan.n_f), path.c_str());
  return 0;
}

int cmd_p2d_eval(const CommonOpts& o) {
  auto cfg = resolve_config(o);
  cfg.mode = "p2d";
  const auto rows = harness::run_sweep(cfg);
  for (const auto& r : rows)
    std::printf("dr_f=%.4f d=%d  nmse=%.2f dB\n", r.dr_f, r.d, r.nmse_db);
  std::printf("results in %s/results.csv\n", cfg.output_dir.c_str());
  return 0;
}

int cmd_train(const CommonOpts& o) {
  auto cfg = resolve_config(o);
  cfg.mode = "codec";
  const auto rows = harness::run_sweep(cfg);
  for (const auto& r : rows)
    std::printf("dr_f=%.4f d=%d cr=%.4f %s  nmse=%.2f dB\n", r.dr_f, r.d, r.cr, r.codec.c_str(),
                r.nmse_db);
  return 0;
}

int cmd_chain_train(const CommonOpts& o) {
  auto cfg = resolve_config(o);
  cfg.mode = "chain";
  write_manifest(cfg);

  const auto data = cfg.dataset_path.empty()
                        ? channel::generate(cfg.chan, cfg.n_samples, cfg.n_timeslots, cfg.train_fraction)
                        : channel::load(cfg.dataset_path);
  const Index m_f =
      static_cast<Index>(std::llround(cfg.dr_f.front() * static_cast<double>(cfg.chan.n_f)));
  const auto pattern = pilots::build_pattern(cfg.chan.n_f, m_f, cfg.d.front());
  const auto estimator = p2d::build_estimator(pattern, cfg.chan.n_t, cfg.delta);

  diffchain::ChainConfig cc;
  cc.t = cfg.chain.t;
  cc.cr_t1 = cfg.chain.cr_t1;
  cc.cr_rest = cfg.cr.front();
  cc.plan = cfg.chain.plan;
  cc.k = cfg.k;
  cc.hidden = cfg.hidden;
  cc.train = cfg.train;
  cc.seed = cfg.train.seed;

  std::vector<training::History> histories;
  const auto chain = diffchain::chain_train(data, estimator, cc, &histories);
  const std::string dir = (fs::path(cfg.output_dir) / "chain").string();
  diffchain::save_chain(chain, dir);
  for (std::size_t t = 0; t < histories.size(); ++t)
    training::write_history_csv(
        histories[t], (fs::path(cfg.output_dir) / ("history_t" + std::to_string(t + 1) + ".csv")).string());
  std::printf("chain (%s) saved to %s\n", cc.label().c_str(), dir.c_str());
  for (std::size_t i = 0; i < chain.gamma_ls.size(); ++i)
    std::printf("gamma_ls[t=%zu] = %.6f\n", i + 2, chain.gamma_ls[i]);
  return 0;
}

int cmd_sweep(const CommonOpts& o) {
  auto cfg = resolve_config(o);
  const auto rows = harness::run_sweep(cfg);
  std::printf("%zu rows -> %s/results.csv\n", rows.size(), cfg.output_dir.c_str());
  return 0;
}

int cmd_plot(const std::string& csv, const std::string& out_dir) {
  const auto rows = harness::read_csv(csv);
  fs::create_directories(out_dir);
  harness::write_charts(rows, out_dir);
  std::printf("charts written to %s\n", out_dir.c_str());
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"csilab: pilot-downsampled CSI estimation and compressive feedback laboratory"};
  app.require_subcommand(1);

  CommonOpts gen_o, p2d_o, train_o, chain_o, sweep_o;
  std::string plot_csv, plot_out;

  auto* gen = app.add_subcommand("generate", "generate a synthetic channel dataset");
  add_common(gen, gen_o, false);
  auto* p2d_cmd = app.add_subcommand("p2d-eval", "evaluate the pilots-to-delay estimator grid");
  add_common(p2d_cmd, p2d_o);
  auto* train_cmd = app.add_subcommand("train", "train a feedback codec on estimator outputs");
  add_common(train_cmd, train_o);
  auto* chain_cmd = app.add_subcommand("chain-train", "train a differential encoding chain");
  add_common(chain_cmd, chain_o);
  auto* sweep_cmd = app.add_subcommand("sweep", "run the full experiment grid from a config");
  add_common(sweep_cmd, sweep_o);
  auto* plot_cmd = app.add_subcommand("plot", "render SVG charts from a results CSV");
  plot_cmd->add_option("--csv", plot_csv, "results.csv from a sweep")->required();
  plot_cmd->add_option("--out", plot_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(gen_o);
    if (p2d_cmd->parsed()) return cmd_p2d_eval(p2d_o);
    if (train_cmd->parsed()) return cmd_train(train_o);
    if (chain_cmd->parsed()) return cmd_chain_train(chain_o);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_o);
    if (plot_cmd->parsed()) return cmd_plot(plot_csv, plot_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
