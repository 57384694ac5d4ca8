#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "csilab/metrics.hpp"
#include "csilab/sweep.hpp"

using namespace csilab;
namespace fs = std::filesystem;

namespace {

std::vector<CMat> one_matrix_list(const CMat& m) { return {m}; }

CMat random_complex(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  CMat m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = Cplx(g(rng), g(rng));
  return m;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

harness::ExperimentConfig tiny_p2d_config(const std::string& out) {
  harness::ExperimentConfig cfg;
  cfg.chan.n_b = 16;
  cfg.chan.n_f = 64;
  cfg.chan.n_t = 8;
  cfg.chan.n_paths = 4;
  cfg.chan.max_delay_tap = 6;
  cfg.chan.leakage = 0.05;
  cfg.chan.noise_std = 0.01;
  cfg.chan.seed = 71;
  cfg.n_samples = 400;
  cfg.dr_f = {0.125};
  cfg.d = {1, 4};
  cfg.delta = 0.0;
  cfg.mode = "p2d";
  cfg.stable_timing = true;
  cfg.output_dir = out;
  return cfg;
}

} // namespace

TEST_CASE("nmse_db") {
  const CMat h = random_complex(4, 8, 1);

  SUBCASE("exact match clamps to the sentinel") {
    CHECK(metrics::nmse_db(one_matrix_list(h), one_matrix_list(h)) == metrics::kNmseFloorDb);
  }
  SUBCASE("zero estimate is exactly 0 dB") {
    CHECK(metrics::nmse_db(one_matrix_list(h), one_matrix_list(CMat(CMat::Zero(4, 8)))) == 0.0);
  }
  SUBCASE("uniform 1% scaling error is -40 dB") {
    const CMat est = h * 1.01;
    CHECK(metrics::nmse_db(one_matrix_list(h), one_matrix_list(est)) ==
          doctest::Approx(-40.0).epsilon(1e-9));
  }
  SUBCASE("scale diagnostic identity") {
    for (double alpha : {0.5, 0.9, 1.5, 2.0}) {
      const CMat est = h * alpha;
      CHECK(metrics::nmse_db(one_matrix_list(h), one_matrix_list(est)) ==
            doctest::Approx(20.0 * std::log10(std::abs(1.0 - alpha))).epsilon(1e-12));
    }
  }
  SUBCASE("zero-energy truth names the sample") {
    std::vector<CMat> truth{h, CMat::Zero(4, 8)};
    std::vector<CMat> est{h, h};
    try {
      metrics::nmse_db(truth, est);
      FAIL("expected DegenerateInputError");
    } catch (const DegenerateInputError& e) {
      CHECK(std::string(e.what()).find("1") != std::string::npos);
    }
  }
  SUBCASE("shape and length mismatches") {
    std::vector<CMat> est{random_complex(4, 7, 2)};
    CHECK_THROWS_AS(metrics::nmse_db(one_matrix_list(h), est), DimensionError);
    std::vector<CMat> empty;
    CHECK_THROWS_AS(metrics::nmse_db(empty, empty), DegenerateInputError);
  }
}

TEST_CASE("spherical normalization") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  RVec x(32);
  for (Index i = 0; i < 32; ++i) x(i) = g(rng);

  SUBCASE("unit vectors pass through") {
    const RVec u = x / x.norm();
    const auto [unit, norm] = metrics::spherical_normalize(u);
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((unit - u).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("round-trip is exact to 1e-15 relative") {
    const auto [unit, norm] = metrics::spherical_normalize(x);
    const RVec back = metrics::spherical_denormalize(unit, norm);
    CHECK((back - x).norm() / x.norm() < 1e-15);
  }
  SUBCASE("batch of normalized vectors has unit norms") {
    for (int trial = 0; trial < 20; ++trial) {
      RVec v(8);
      for (Index i = 0; i < 8; ++i) v(i) = g(rng) * std::pow(10.0, trial % 5);
      const auto [unit, norm] = metrics::spherical_normalize(v);
      CHECK(std::abs(unit.norm() - 1.0) < 1e-12);
    }
  }
  SUBCASE("zero vector is degenerate") {
    CHECK_THROWS_AS(metrics::spherical_normalize(RVec(RVec::Zero(4))), DegenerateInputError);
  }
}

TEST_CASE("csv round-trip") {
  std::vector<harness::MetricRow> rows;
  harness::MetricRow r;
  r.dr_f = 0.125;
  r.d = 4;
  r.cr = 0.25;
  r.timeslot = 2;
  r.codec = "mn-ie";
  r.nmse_db = -17.25;
  r.wall_seconds = 1.5;
  rows.push_back(r);
  const auto path = (fs::temp_directory_path() / "csilab_rows.csv").string();
  harness::write_csv(rows, path);
  const auto back = harness::read_csv(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].codec == "mn-ie");
  CHECK(back[0].d == 4);
  CHECK(back[0].timeslot == 2);
  CHECK(back[0].nmse_db == doctest::Approx(-17.25));
  std::remove(path.c_str());
}

TEST_CASE("p2d sweep: two rows, diagonal ordering, bit-exact rerun") {
  const auto out1 = (fs::temp_directory_path() / "csilab_sweep_a").string();
  const auto out2 = (fs::temp_directory_path() / "csilab_sweep_b").string();
  auto cfg = tiny_p2d_config(out1);
  const auto rows = harness::run_sweep(cfg);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].d == 1);
  CHECK(rows[1].d == 4);
  CHECK(rows[1].nmse_db >= rows[0].nmse_db - 0.1);
  for (const auto& r : rows) CHECK(std::isfinite(r.nmse_db));

  cfg.output_dir = out2;
  harness::run_sweep(cfg);
  CHECK(slurp(out1 + "/results.csv") == slurp(out2 + "/results.csv"));

  // chart only references data present in the csv: one polyline point per row
  const std::string svg = slurp(out1 + "/p2d_nmse_vs_drf.svg");
  CHECK(svg.find("polyline") != std::string::npos);
  std::size_t circles = 0;
  for (std::size_t pos = svg.find("<circle"); pos != std::string::npos;
       pos = svg.find("<circle", pos + 1))
    ++circles;
  CHECK(circles == rows.size());

  fs::remove_all(out1);
  fs::remove_all(out2);
}

TEST_CASE("sweep fails fast on an unwritable output dir") {
  const auto file_path = (fs::temp_directory_path() / "csilab_blocker").string();
  std::ofstream(file_path) << "x";
  auto cfg = tiny_p2d_config(file_path + "/nested");
  CHECK_THROWS_AS(harness::run_sweep(cfg), IoError);
  std::remove(file_path.c_str());
}

TEST_CASE("config json round-trip preserves the grid") {
  auto cfg = tiny_p2d_config("/tmp/unused");
  cfg.n_phase = {2, 4};
  cfg.cr = {0.5, 0.25};
  const std::string text = harness::config_to_json(cfg);
  const auto back = harness::config_from_json_string(text);
  CHECK(back.dr_f == cfg.dr_f);
  CHECK(back.d == cfg.d);
  CHECK(back.cr == cfg.cr);
  CHECK(back.n_phase == cfg.n_phase);
  CHECK(back.mode == cfg.mode);
  CHECK(back.chan.n_f == cfg.chan.n_f);
  CHECK(back.stable_timing == cfg.stable_timing);
}

TEST_CASE("profiles and master seed") {
  harness::ExperimentConfig cfg;
  harness::apply_profile(cfg, "desk");
  CHECK(cfg.chan.n_f == 256);
  CHECK(cfg.n_samples == 2000);
  harness::apply_profile(cfg, "paper");
  CHECK(cfg.chan.n_f == 1024);
  CHECK(cfg.n_samples == 10000);
  CHECK_THROWS_AS(harness::apply_profile(cfg, "huge"), ConfigError);

  const auto before = cfg.chan.seed;
  harness::apply_master_seed(cfg, 123);
  CHECK(cfg.chan.seed != before);
  harness::ExperimentConfig cfg2;
  harness::apply_master_seed(cfg2, 123);
  CHECK(cfg.chan.seed == cfg2.chan.seed);
  CHECK(cfg.train.seed == cfg2.train.seed);
}

TEST_CASE("worker pool merges rows in grid order") {
  const auto out = (fs::temp_directory_path() / "csilab_sweep_mt").string();
  auto cfg = tiny_p2d_config(out);
  cfg.dr_f = {0.5, 0.25, 0.125};
  cfg.d = {1, 2};
  cfg.workers = 4;
  const auto rows = harness::run_sweep(cfg);
  REQUIRE(rows.size() == 6);
  std::size_t idx = 0;
  for (double dr : cfg.dr_f)
    for (int d : cfg.d) {
      CHECK(rows[idx].dr_f == doctest::Approx(dr));
      CHECK(rows[idx].d == d);
      ++idx;
    }
  fs::remove_all(out);
}
