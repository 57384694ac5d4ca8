#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "csilab/training.hpp"

using namespace csilab;
using namespace csilab::training;

namespace {

RMat sparse_batch(Index n, Index count, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<Index> pos(0, n - 1);
  const Index nnz = std::max<Index>(1, static_cast<Index>(std::llround(density * n)));
  RMat x = RMat::Zero(n, count);
  for (Index c = 0; c < count; ++c)
    for (Index k = 0; k < nnz; ++k) x(pos(rng), c) = g(rng);
  return x;
}

cs::IstaModel small_ista(std::uint64_t seed) {
  cs::IstaConfig cfg;
  cfg.n_total = 48;
  cfg.cr = 0.25;
  cfg.k = 9;
  cfg.hidden = 32;
  cfg.seed = seed;
  cs::IstaModel m = cs::IstaModel::create(cfg);
  m.fit_initializer(sparse_batch(48, 96, 0.1, seed + 1));
  return m;
}

RVec flat_params(std::vector<ParamView> views) {
  RVec out(param_count(views));
  Index off = 0;
  for (const auto& v : views)
    for (Index i = 0; i < v.size; ++i) out(off++) = v.data[i];
  return out;
}

} // namespace

TEST_CASE("loss is zero with zero data and a zero-bias model") {
  cs::IstaModel m = small_ista(1);
  const RMat y = RMat::Zero(m.m(), 4);
  const RMat target = RMat::Zero(48, 4);
  const LossResult lr = loss_total(m, y, target, 1e-3);
  CHECK(lr.total == 0.0);
  CHECK(lr.grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("symmetry loss vanishes for exact inverse pairs") {
  cs::IstaModel m = small_ista(2);
  // orthogonal transform, inverse = transpose
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& b : m.blocks) {
    RMat a(32, 32);
    for (Index c = 0; c < 32; ++c)
      for (Index r = 0; r < 32; ++r) a(r, c) = g(rng);
    const Eigen::HouseholderQR<RMat> qr(a);
    b.transform = qr.householderQ() * RMat::Identity(32, 32);
    b.transform_inv = b.transform.transpose();
  }
  const RMat x = sparse_batch(48, 6, 0.1, 5);
  const LossResult lr = loss_total(m, m.phi * x, x, 1.0);
  CHECK(lr.sym < 1e-24);
}

TEST_CASE("analytic gradients match central finite differences") {
  SUBCASE("unrolled model with both loss terms") {
    cs::IstaModel m = small_ista(7);
    const RMat x = sparse_batch(48, 5, 0.1, 8);
    CHECK(grad_check(m, m.phi * x, x, 1e-3, 60, 99) < 1e-5);
  }
  SUBCASE("dense autoencoder") {
    AeConfig cfg;
    cfg.n_total = 40;
    cfg.cr = 0.25;
    cfg.seed = 4;
    DenseAutoencoder ae = DenseAutoencoder::create(cfg);
    const RMat x = sparse_batch(40, 6, 0.2, 9);
    CHECK(grad_check(ae, x, x, 60, 100) < 1e-5);
  }
}

TEST_CASE("zero-input batch produces exactly zero gradients") {
  cs::IstaModel m = small_ista(11);
  const LossResult lr = loss_total(m, RMat::Zero(m.m(), 3), RMat::Zero(48, 3), 1e-3);
  CHECK(lr.grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("learning_rate = 0 leaves parameters bitwise unchanged") {
  cs::IstaModel m = small_ista(12);
  const RVec before = flat_params(param_views(m));
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.0;
  cfg.seed = 1;
  const RMat x = sparse_batch(48, 32, 0.1, 13);
  train(m, x, x, RMat(), RMat(), cfg);
  const RVec after = flat_params(param_views(m));
  CHECK((before.array() == after.array()).all());
}

TEST_CASE("training is deterministic under a fixed seed") {
  auto run = [&]() {
    cs::IstaModel m = small_ista(14);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.seed = 42;
    const RMat x = sparse_batch(48, 40, 0.1, 15);
    train(m, x, x, RMat(), RMat(), cfg);
    return flat_params(param_views(m));
  };
  const RVec a = run();
  const RVec b = run();
  CHECK((a.array() == b.array()).all());
}

TEST_CASE("adam with a zero gradient is a no-op") {
  cs::IstaModel m = small_ista(16);
  const RVec before = flat_params(param_views(m));
  auto views = param_views(m);
  Adam adam(param_count(views), 1e-3);
  adam.step(views, RVec::Zero(param_count(views)));
  const RVec after = flat_params(param_views(m));
  CHECK((before.array() == after.array()).all());
}

TEST_CASE("small sparse instance converges") {
  // deep inside the recoverable region: 4 of 128 nonzero at half-rate sampling
  cs::IstaConfig mc;
  mc.n_total = 128;
  mc.cr = 0.5;
  mc.k = 5;
  mc.hidden = 128;
  mc.rho_init = 1.0;
  mc.theta_init = 0.1;
  mc.seed = 17;
  cs::IstaModel m = cs::IstaModel::create(mc);

  const RMat x_train = sparse_batch(128, 800, 0.03125, 18);
  const RMat x_val = sparse_batch(128, 200, 0.03125, 19);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 32;
  cfg.learning_rate = 1e-3;
  cfg.seed = 20;
  const History h = train(m, x_train, x_train, x_val, x_val, cfg);
  REQUIRE(!h.empty());

  const double val_nmse_db =
      10.0 * std::log10(h.back().val_mse * 128.0 * 200.0 / x_val.squaredNorm());
  CHECK(val_nmse_db <= -10.0);

  SUBCASE("smoothed training loss never jumps by more than 5%") {
    auto smooth = [&](std::size_t i) {
      const std::size_t lo = i >= 4 ? i - 4 : 0;
      double acc = 0.0;
      for (std::size_t k = lo; k <= i; ++k) acc += h[k].train_mse;
      return acc / static_cast<double>(i - lo + 1);
    };
    for (std::size_t i = 1; i < h.size(); ++i) CHECK(smooth(i) <= smooth(i - 1) * 1.05);
  }
}

TEST_CASE("diverging training reports epoch and batch") {
  cs::IstaModel m = small_ista(21);
  for (auto& b : m.blocks) b.rho = 1e120;
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  cfg.seed = 3;
  const RMat x = sparse_batch(48, 16, 0.1, 22);
  try {
    train(m, x, x, RMat(), RMat(), cfg);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch") != std::string::npos);
  }
}

TEST_CASE("dense autoencoder forward") {
  SUBCASE("code length honors the compression ratio") {
    AeConfig cfg;
    cfg.n_total = 2048;
    cfg.cr = 0.25;
    cfg.seed = 1;
    const DenseAutoencoder ae = DenseAutoencoder::create(cfg);
    CHECK(ae.code_length() == 512);
  }
  SUBCASE("zero input yields a finite bias-path output") {
    AeConfig cfg;
    cfg.n_total = 32;
    cfg.cr = 0.5;
    cfg.seed = 2;
    const DenseAutoencoder ae = DenseAutoencoder::create(cfg);
    const RVec out = ae_forward(ae, RVec(RVec::Zero(32)));
    CHECK(out.allFinite());
  }
  SUBCASE("shape mismatch is rejected") {
    AeConfig cfg;
    cfg.n_total = 32;
    cfg.cr = 0.5;
    cfg.seed = 2;
    const DenseAutoencoder ae = DenseAutoencoder::create(cfg);
    CHECK_THROWS_AS(ae_forward(ae, RVec(RVec::Zero(16))), DimensionError);
  }
  SUBCASE("full-rate autoencoder learns a line of data") {
    AeConfig cfg;
    cfg.n_total = 16;
    cfg.cr = 1.0;
    cfg.seed = 3;
    DenseAutoencoder ae = DenseAutoencoder::create(cfg);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    RVec dir(16);
    for (Index i = 0; i < 16; ++i) dir(i) = u(rng);
    dir.normalize();
    RMat x(16, 256);
    for (Index c = 0; c < 256; ++c) x.col(c) = (0.25 * u(rng)) * dir;
    TrainConfig tc;
    tc.epochs = 4000;
    tc.batch_size = 64;
    tc.learning_rate = 2e-3;
    tc.seed = 5;
    train(ae, x, x, RMat(), RMat(), tc);
    double worst = 0.0;
    for (Index c = 0; c < 16; ++c)
      worst = std::max(worst, (ae_forward(ae, RVec(x.col(c))) - x.col(c)).norm());
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("history csv has the expected columns") {
  cs::IstaModel m = small_ista(23);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.seed = 6;
  const RMat x = sparse_batch(48, 16, 0.1, 24);
  const History h = train(m, x, x, x, x, cfg);
  const auto path = (std::filesystem::temp_directory_path() / "csilab_history.csv").string();
  write_history_csv(h, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "epoch,train_mse,val_mse,l_sym");
  std::remove(path.c_str());
}
