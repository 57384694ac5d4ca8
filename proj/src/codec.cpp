#include "csilab/codec.hpp"

#include <json.hpp>

#include "csilab/binio.hpp"

namespace csilab::codec {

using nlohmann::json;

NormalizedBatch normalize_columns(const RMat& x) {
  NormalizedBatch nb;
  nb.unit = x;
  nb.norms = RVec::Zero(x.cols());
  for (Index c = 0; c < x.cols(); ++c) {
    const double n = x.col(c).norm();
    if (n > 0.0) {
      nb.unit.col(c) /= n;
      nb.norms(c) = n;
    }
  }
  return nb;
}

namespace {

// Targets are divided by the matching input norms so that rescaling the
// decoder output by the side-information norm reproduces the target scale.
RMat scale_targets(const RMat& targets, const RVec& norms) {
  RMat out = targets;
  for (Index c = 0; c < out.cols(); ++c)
    if (norms(c) > 0.0) out.col(c) /= norms(c);
  return out;
}

RMat rescale(RMat recon, const RVec& norms) {
  for (Index c = 0; c < recon.cols(); ++c) recon.col(c) *= norms(c);
  return recon;
}

void write_params(binio::Writer& w, const std::vector<training::ParamView>& views) {
  for (const auto& v : views) w.bytes(v.data, sizeof(double) * static_cast<std::size_t>(v.size));
}

void read_params(binio::Reader& r, const std::vector<training::ParamView>& views) {
  for (const auto& v : views) r.bytes(v.data, sizeof(double) * static_cast<std::size_t>(v.size));
}

json read_header(binio::Reader& in) {
  std::string line;
  char c;
  while (true) {
    in.bytes(&c, 1);
    if (c == '\n') break;
    line.push_back(c);
    if (line.size() > 4096)
      throw FormatError("checkpoint header exceeds 4096 bytes: " + in.path());
  }
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded())
    throw FormatError("checkpoint header is not valid JSON: " + in.path());
  return j;
}

} // namespace

training::History IstaCodec::train(const RMat& inputs, const RMat& targets, const RMat& val_inputs,
                                   const RMat& val_targets, const training::TrainConfig& cfg) {
  const NormalizedBatch in = normalize_columns(inputs);
  const RMat tgt = scale_targets(targets, in.norms);
  const NormalizedBatch vin = normalize_columns(val_inputs);
  const RMat vtgt = scale_targets(val_targets, vin.norms);
  model_.fit_initializer(in.unit);
  return training::train(model_, in.unit, tgt, vin.unit, vtgt, cfg);
}

RMat IstaCodec::reconstruct(const RMat& inputs) const {
  const NormalizedBatch in = normalize_columns(inputs);
  const RMat recon = cs::ista_forward(model_, model_.encode(in.unit)).xk();
  return rescale(recon, in.norms);
}

training::History AeCodec::train(const RMat& inputs, const RMat& targets, const RMat& val_inputs,
                                 const RMat& val_targets, const training::TrainConfig& cfg) {
  const NormalizedBatch in = normalize_columns(inputs);
  const RMat tgt = scale_targets(targets, in.norms);
  const NormalizedBatch vin = normalize_columns(val_inputs);
  const RMat vtgt = scale_targets(val_targets, vin.norms);
  return training::train(ae_, in.unit, tgt, vin.unit, vtgt, cfg);
}

RMat AeCodec::reconstruct(const RMat& inputs) const {
  const NormalizedBatch in = normalize_columns(inputs);
  return rescale(training::ae_forward(ae_, in.unit), in.norms);
}

std::unique_ptr<Codec> make_codec(const CodecSpec& spec) {
  if (spec.kind == "ista") {
    cs::IstaConfig cfg;
    cfg.n_total = spec.n_total;
    cfg.cr = spec.cr;
    cfg.k = spec.k;
    cfg.hidden = spec.hidden;
    cfg.seed = spec.seed;
    return std::make_unique<IstaCodec>(cs::IstaModel::create(cfg));
  }
  if (spec.kind == "ae") {
    training::AeConfig cfg;
    cfg.n_total = spec.n_total;
    cfg.cr = spec.cr;
    cfg.decoder_hidden = spec.hidden;
    cfg.seed = spec.seed;
    return std::make_unique<AeCodec>(training::DenseAutoencoder::create(cfg));
  }
  throw ConfigError("make_codec: unknown codec kind \"" + spec.kind + "\"");
}

void IstaCodec::save(const std::string& path) const {
  auto& m = const_cast<cs::IstaModel&>(model_);
  auto views = training::param_views(m);
  json header = {
      {"kind", "ista"},
      {"n_total", model_.cfg.n_total},
      {"m", model_.m()},
      {"cr", model_.cfg.cr},
      {"k", model_.cfg.k},
      {"hidden", model_.cfg.resolved_hidden()},
      {"seed", model_.cfg.seed},
      {"params", param_count(views) + model_.phi.size() + model_.q_init.size()},
  };
  binio::Writer w(path);
  const std::string line = header.dump() + "\n";
  w.bytes(line.data(), line.size());
  w.bytes(m.phi.data(), sizeof(double) * static_cast<std::size_t>(m.phi.size()));
  w.bytes(m.q_init.data(), sizeof(double) * static_cast<std::size_t>(m.q_init.size()));
  write_params(w, views);
}

void AeCodec::save(const std::string& path) const {
  auto& ae = const_cast<training::DenseAutoencoder&>(ae_);
  auto views = training::param_views(ae);
  json header = {
      {"kind", "ae"},
      {"n_total", ae_.cfg.n_total},
      {"m", ae_.code_length()},
      {"cr", ae_.cfg.cr},
      {"hidden", ae_.cfg.resolved_hidden()},
      {"seed", ae_.cfg.seed},
      {"params", param_count(views)},
  };
  binio::Writer w(path);
  const std::string line = header.dump() + "\n";
  w.bytes(line.data(), line.size());
  write_params(w, views);
}

std::unique_ptr<Codec> load_codec(const std::string& path) {
  binio::Reader in(path);
  const json h = read_header(in);
  if (!h.contains("kind")) throw FormatError("checkpoint header missing \"kind\": " + path);
  const std::string kind = h.at("kind").get<std::string>();

  if (kind == "ista") {
    cs::IstaConfig cfg;
    cfg.n_total = h.at("n_total").get<Index>();
    cfg.cr = h.at("cr").get<double>();
    cfg.k = h.at("k").get<int>();
    cfg.hidden = h.at("hidden").get<Index>();
    cfg.seed = h.at("seed").get<std::uint64_t>();
    cs::IstaModel m = cs::IstaModel::create(cfg);
    if (m.m() != h.at("m").get<Index>())
      throw FormatError("checkpoint measurement size mismatch: " + path);
    in.bytes(m.phi.data(), sizeof(double) * static_cast<std::size_t>(m.phi.size()));
    m.q_init.resize(cfg.n_total, m.phi.rows());
    in.bytes(m.q_init.data(), sizeof(double) * static_cast<std::size_t>(m.q_init.size()));
    read_params(in, training::param_views(m));
    if (!in.at_eof()) throw FormatError("trailing bytes in checkpoint: " + path);
    return std::make_unique<IstaCodec>(std::move(m));
  }
  if (kind == "ae") {
    training::AeConfig cfg;
    cfg.n_total = h.at("n_total").get<Index>();
    cfg.cr = h.at("cr").get<double>();
    cfg.decoder_hidden = h.at("hidden").get<Index>();
    cfg.seed = h.at("seed").get<std::uint64_t>();
    training::DenseAutoencoder ae = training::DenseAutoencoder::create(cfg);
    read_params(in, training::param_views(ae));
    if (!in.at_eof()) throw FormatError("trailing bytes in checkpoint: " + path);
    return std::make_unique<AeCodec>(std::move(ae));
  }
  throw FormatError("checkpoint has unknown kind \"" + kind + "\": " + path);
}

} // namespace csilab::codec
