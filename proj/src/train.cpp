#include "flowbind/train.hpp"

#include <mutex>
#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace flowbind {

using nlohmann::json;

Adam::Adam(std::size_t n, double beta1, double beta2, double eps)
    : m_(n, 0.0), v_(n, 0.0), b1_(beta1), b2_(beta2), eps_(eps) {}

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw ArgumentError("Adam: size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * grad[i];
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

TrainingDivergedError::TrainingDivergedError(int s, double loss)
    : NumericError("training diverged at step " + std::to_string(s) + " (loss " + std::to_string(loss) + ")"),
      step(s) {}

double trace_tail_mean(const std::vector<double>& trace, double fraction) {
  if (trace.empty()) return 0.0;
  const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * trace.size())));
  double s = 0.0;
  for (std::size_t i = trace.size() - k; i < trace.size(); ++i) s += trace[i];
  return s / static_cast<double>(k);
}

void tune_allocator() {
#ifdef __GLIBC__
  // Batched training allocates many short-lived blocks of a few hundred KB.
  // Above the default mmap threshold each one costs a map/unmap pair and
  // fresh page faults, which dominated the run time.
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
  });
#endif
}

TrainResult train_field(TrainableField& field, std::span<const TrainingItem> dataset, const TrainConfig& cfg) {
  tune_allocator();
  if (dataset.empty()) throw ArgumentError("train_field: dataset is empty");
  if (cfg.batch < 1 || cfg.steps < 0 || cfg.lr < 0.0) throw ArgumentError("train_field: invalid configuration");
  Adam opt(field.num_parameters());
  const StreamKey root{cfg.seed};
  TrainResult out;
  out.loss_trace.reserve(static_cast<std::size_t>(cfg.steps));
  std::vector<TrainingItem> batch(static_cast<std::size_t>(cfg.batch));
  for (int s = 0; s < cfg.steps; ++s) {
    Random pick(root.derive("batch", static_cast<std::uint64_t>(s)));
    for (auto& item : batch) item = dataset[pick.index(dataset.size())];
    const StreamKey loss_key = root.derive("loss", static_cast<std::uint64_t>(s));
    LossResult r = cfg.translation_noise ? cfm_loss(field, batch, loss_key, cfg.c_d)
                                         : cfm_loss_untranslated(field, batch, loss_key);
    if (!(r.loss <= cfg.divergence_threshold)) throw TrainingDivergedError(s, r.loss);
    out.loss_trace.push_back(r.loss);
    opt.step(field.parameters(), r.grad, cfg.lr);
  }
  out.final_loss = trace_tail_mean(out.loss_trace);
  return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << text;
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

json read_json(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw CheckpointError("cannot open checkpoint " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
}

void check_header(const json& j, const std::string& kind, const std::filesystem::path& path) {
  if (j.value("format", "") != "flowbind-checkpoint")
    throw CheckpointError(path.string() + ": not a flowbind checkpoint");
  if (j.value("version", -1) != kCheckpointVersion)
    throw CheckpointError(path.string() + ": unsupported checkpoint version " + j.value("version", json()).dump());
  if (j.value("kind", "") != kind)
    throw CheckpointError(path.string() + ": expected kind '" + kind + "', found '" + j.value("kind", "") + "'");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const MlpField& field) {
  const MlpArchitecture& a = field.architecture();
  json j;
  j["format"] = "flowbind-checkpoint";
  j["version"] = kCheckpointVersion;
  j["kind"] = "mlp";
  j["architecture"] = {{"latent_dim", a.latent_dim},
                       {"hidden", a.hidden},
                       {"layers", a.layers},
                       {"binder_com_feature", a.binder_com_feature},
                       {"target_summary", a.target_summary},
                       {"num_classes", a.num_classes}};
  const auto p = field.parameters();
  j["parameters"] = std::vector<double>(p.begin(), p.end());
  write_file_atomic(path, j.dump() + "\n");
}

MlpField load_mlp_checkpoint(const std::filesystem::path& path) {
  const json j = read_json(path);
  check_header(j, "mlp", path);
  try {
    const json& a = j.at("architecture");
    MlpArchitecture arch;
    arch.latent_dim = a.at("latent_dim").get<int>();
    arch.hidden = a.at("hidden").get<int>();
    arch.layers = a.at("layers").get<int>();
    arch.binder_com_feature = a.at("binder_com_feature").get<bool>();
    arch.target_summary = a.at("target_summary").get<bool>();
    arch.num_classes = a.at("num_classes").get<int>();
    return MlpField(arch, j.at("parameters").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  } catch (const ArgumentError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ToyCodec& codec) {
  json j;
  j["format"] = "flowbind-checkpoint";
  j["version"] = kCheckpointVersion;
  j["kind"] = "codec";
  j["latent_dim"] = codec.latent_dim();
  const auto p = codec.parameters();
  j["parameters"] = std::vector<double>(p.begin(), p.end());
  write_file_atomic(path, j.dump() + "\n");
}

ToyCodec load_codec_checkpoint(const std::filesystem::path& path) {
  const json j = read_json(path);
  check_header(j, "codec", path);
  try {
    ToyCodec c(j.at("latent_dim").get<int>());
    const auto p = j.at("parameters").get<std::vector<double>>();
    if (p.size() != c.parameters().size()) throw CheckpointError(path.string() + ": parameter count mismatch");
    std::copy(p.begin(), p.end(), c.parameters().begin());
    return c;
  } catch (const json::exception& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace flowbind
