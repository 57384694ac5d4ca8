#pragma once

#include <memory>
#include <string>

#include "csilab/cs.hpp"
#include "csilab/training.hpp"
#include "csilab/types.hpp"

namespace csilab::codec {

/// Feedback codec over real vectors. Every sample is spherically normalized
/// before encoding; the scalar norm travels as uncompressed side information,
/// so the code length excludes it and the decoder output is rescaled.
/// Training targets are scaled by the matching input norms.
class Codec {
 public:
  virtual ~Codec() = default;

  virtual std::string kind() const = 0;
  virtual double cr() const = 0;
  virtual Index n_total() const = 0;
  virtual Index code_length() const = 0;

  virtual training::History train(const RMat& inputs, const RMat& targets, const RMat& val_inputs,
                                  const RMat& val_targets, const training::TrainConfig& cfg) = 0;

  /// encode + decode of each column, norm handling included.
  virtual RMat reconstruct(const RMat& inputs) const = 0;
  RVec reconstruct(const RVec& input) const { return reconstruct(RMat(input)).col(0); }

  virtual void save(const std::string& path) const = 0;
};

struct CodecSpec {
  std::string kind = "ista"; // "ista" | "ae"
  Index n_total = 0;
  double cr = 0.25;
  int k = 9;         // ista blocks
  Index hidden = 0;  // ista hidden width / ae decoder width (0 -> defaults)
  std::uint64_t seed = 0;
};

std::unique_ptr<Codec> make_codec(const CodecSpec& spec);

/// Checkpoint container: one line of JSON (kind, dims, cr, seed, parameter
/// count) followed by a raw little-endian f64 parameter payload.
std::unique_ptr<Codec> load_codec(const std::string& path);

class IstaCodec final : public Codec {
 public:
  explicit IstaCodec(cs::IstaModel model) : model_(std::move(model)) {}

  std::string kind() const override { return "ista"; }
  double cr() const override { return model_.cfg.cr; }
  Index n_total() const override { return model_.cfg.n_total; }
  Index code_length() const override { return model_.m(); }

  training::History train(const RMat& inputs, const RMat& targets, const RMat& val_inputs,
                          const RMat& val_targets, const training::TrainConfig& cfg) override;
  RMat reconstruct(const RMat& inputs) const override;
  void save(const std::string& path) const override;

  cs::IstaModel& model() { return model_; }
  const cs::IstaModel& model() const { return model_; }

 private:
  cs::IstaModel model_;
};

class AeCodec final : public Codec {
 public:
  explicit AeCodec(training::DenseAutoencoder ae) : ae_(std::move(ae)) {}

  std::string kind() const override { return "ae"; }
  double cr() const override { return ae_.cfg.cr; }
  Index n_total() const override { return ae_.cfg.n_total; }
  Index code_length() const override { return ae_.code_length(); }

  training::History train(const RMat& inputs, const RMat& targets, const RMat& val_inputs,
                          const RMat& val_targets, const training::TrainConfig& cfg) override;
  RMat reconstruct(const RMat& inputs) const override;
  void save(const std::string& path) const override;

  training::DenseAutoencoder& model() { return ae_; }

 private:
  training::DenseAutoencoder ae_;
};

/// Column-wise spherical normalization helpers shared by the codecs.
/// Zero columns pass through untouched (norm recorded as 0, decode gives 0).
struct NormalizedBatch {
  RMat unit;
  RVec norms;
};
NormalizedBatch normalize_columns(const RMat& x);

} // namespace csilab::codec
