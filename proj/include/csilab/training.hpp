#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csilab/cs.hpp"
#include "csilab/types.hpp"

namespace csilab::training {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double sym_weight = 1e-3; // weight on the transform-pair round-trip loss
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  double l_sym = 0.0;
};
using History = std::vector<EpochStats>;

void write_history_csv(const History& h, const std::string& path);

/// Flat view over one parameter buffer; the order of views defines the
/// canonical flat parameter indexing shared by ADAM, the tape gradient and
/// the finite-difference prober.
struct ParamView {
  double* data = nullptr;
  Index size = 0;
};

std::vector<ParamView> param_views(cs::IstaModel& m); // trainable params only
Index param_count(const std::vector<ParamView>& views);
double param_get(const std::vector<ParamView>& views, Index flat);
void param_set(const std::vector<ParamView>& views, Index flat, double v);

/// Shallow dense autoencoder: encoder = tanh(W1 x + b1) of length
/// round(n_total * cr); decoder = W3 tanh(W2 z + b2) + b3.
struct AeConfig {
  Index n_total = 0;
  double cr = 0.25;
  Index decoder_hidden = 0; // 0 -> n_total
  std::uint64_t seed = 0;

  Index resolved_hidden() const { return decoder_hidden > 0 ? decoder_hidden : n_total; }
};

struct DenseAutoencoder {
  AeConfig cfg;
  RMat w1;
  RVec b1;
  RMat w2;
  RVec b2;
  RMat w3;
  RVec b3;

  static DenseAutoencoder create(const AeConfig& cfg);
  Index code_length() const { return w1.rows(); }
};

RVec ae_forward(const DenseAutoencoder& ae, const RVec& x);
RMat ae_forward(const DenseAutoencoder& ae, const RMat& x_batch);

std::vector<ParamView> param_views(DenseAutoencoder& ae);

struct LossResult {
  double total = 0.0;
  double mse = 0.0;
  double sym = 0.0;
  RVec grad; // flat, in param_views order
};

/// L = L_MSE + sym_weight * L_sym with
/// L_MSE = sum_i ||x_i^(K) - target_i||^2 / (N_batch * N_total) and L_sym the
/// per-block round-trip defect of the transform pair on the lifted
/// intermediates, same normalization. Gradients are exact reverse-mode.
LossResult loss_total(const cs::IstaModel& m, const RMat& y_batch, const RMat& target_batch,
                      double sym_weight);
LossResult loss_total(const DenseAutoencoder& ae, const RMat& x_batch, const RMat& target_batch);

/// Loss values without gradients (used for validation and finite differences).
double loss_value(const cs::IstaModel& m, const RMat& y_batch, const RMat& target_batch,
                  double sym_weight);
double loss_value(const DenseAutoencoder& ae, const RMat& x_batch, const RMat& target_batch);
double mse_value(const cs::IstaModel& m, const RMat& y_batch, const RMat& target_batch);
double mse_value(const DenseAutoencoder& ae, const RMat& x_batch, const RMat& target_batch);

/// ADAM loop over shuffled mini-batches (beta1 = 0.9, beta2 = 0.999,
/// eps = 1e-8), deterministic under cfg.seed. Inputs/targets are columns.
/// For the ISTA model the initializer is fitted on the inputs first if it
/// has not been fitted yet.
History train(cs::IstaModel& m, const RMat& inputs, const RMat& targets, const RMat& val_inputs,
              const RMat& val_targets, const TrainConfig& cfg);
History train(DenseAutoencoder& ae, const RMat& inputs, const RMat& targets,
              const RMat& val_inputs, const RMat& val_targets, const TrainConfig& cfg);

/// Central finite differences (step 1e-6) at n_probes randomly chosen
/// parameters against the analytic gradient; returns the max relative error
/// with denominator max(1, |fd|, |analytic|).
double grad_check(cs::IstaModel& m, const RMat& y_batch, const RMat& target_batch,
                  double sym_weight, int n_probes, std::uint64_t seed);
double grad_check(DenseAutoencoder& ae, const RMat& x_batch, const RMat& target_batch,
                  int n_probes, std::uint64_t seed);

/// Standard ADAM with bias correction; a zero gradient leaves parameters
/// bitwise unchanged.
class Adam {
 public:
  Adam(Index n, double learning_rate);
  void step(const std::vector<ParamView>& views, const RVec& grad);

 private:
  double lr_;
  RVec m_;
  RVec v_;
  long t_ = 0;
};

} // namespace csilab::training
