#pragma once

#include <memory>
#include <string>
#include <vector>

#include "csilab/channel.hpp"
#include "csilab/codec.hpp"
#include "csilab/p2d.hpp"
#include "csilab/types.hpp"

namespace csilab::diffchain {

/// Stacked real/imaginary vectorization of a complex matrix (column-major
/// planes); the codecs operate on these real vectors of length 2*rows*cols.
RVec vectorize(const CMat& m);
CMat unvectorize(const RVec& v, Index rows, Index cols);

/// Scalar least-squares coefficient minimizing
/// sum_t ||truth_t - gamma * prev_t||_F^2.
double fit_gamma(const std::vector<CMat>& prev_estimates, const std::vector<CMat>& current_truth);

struct ChainConfig {
  int t = 5;             // timeslots, >= 2
  double cr_t1 = 0.5;    // first-slot compression ratio
  double cr_rest = 0.25; // compression ratio for t > 1, <= cr_t1
  std::vector<std::string> plan{"ista"}; // codec kind per slot; last repeats
  int k = 9;
  Index hidden = 0;
  training::TrainConfig train;
  std::uint64_t seed = 0;

  void validate() const;
  std::string kind_at(int slot) const; // slot in [1, t]
  /// mn-i / mn-e / mn-ie per the codec composition, otherwise "chain".
  std::string label() const;
};

/// Differential temporal encoder: the full first-slot CSI is compressed at
/// cr_t1; every later slot compresses the residual against gamma times the
/// previous reconstruction at cr_rest.
struct DifferentialChain {
  ChainConfig cfg;
  p2d::P2dEstimator estimator;
  Index n_b = 0;
  std::vector<std::unique_ptr<codec::Codec>> codecs; // one per timeslot
  std::vector<double> gamma_ls;                      // t - 1 entries

  Index n_total() const { return 2 * n_b * estimator.n_t; }
};

/// Trains the chain slot by slot. Slot 1 maps the vectorized angular-delay
/// estimate to the ground truth; slots t > 1 fit gamma on the training split,
/// build residual input/target pairs from the already-trained prefix chain
/// (never from ground truth), and train the slot codec on them.
/// Per-slot histories are appended to `histories` when non-null.
DifferentialChain chain_train(const channel::Dataset& data, const p2d::P2dEstimator& estimator,
                              const ChainConfig& cfg,
                              std::vector<training::History>* histories = nullptr);

struct ChainInference {
  std::vector<CMat> h_hat; // reconstruction per timeslot
  std::vector<CMat> e_hat; // decoded residual per timeslot (slot 1: full CSI)
};

/// Runs the chain on one sequence of downsampled pilot observations
/// (N_b x M_f per slot, at most cfg.t of them).
ChainInference chain_infer(const DifferentialChain& chain, const std::vector<CMat>& pilot_obs);

void save_chain(const DifferentialChain& chain, const std::string& dir);
DifferentialChain load_chain(const std::string& dir);

} // namespace csilab::diffchain
