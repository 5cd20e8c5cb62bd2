#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "flowbind/codec.hpp"
#include "flowbind/flow.hpp"
#include "flowbind/mlp_field.hpp"

namespace flowbind {

class Adam {
 public:
  explicit Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::span<double> params, std::span<const double> grad, double lr);

 private:
  std::vector<double> m_, v_;
  double b1_, b2_, eps_;
  long t_ = 0;
};

class TrainingDivergedError : public NumericError {
 public:
  TrainingDivergedError(int step, double loss);
  int step;
};

struct TrainConfig {
  double lr = 2e-3;
  int steps = 1000;
  int batch = 32;
  double c_d = kDefaultTranslationStd;
  bool translation_noise = true;
  std::uint64_t seed = 0;
  double divergence_threshold = 1e6;
};

struct TrainResult {
  std::vector<double> loss_trace;
  // Mean of the last 10% of the trace.
  double final_loss = 0.0;
};

// Adam on the flow matching loss. Minibatch indices for step s come from
// stream (seed, "batch", s) and the loss draws from (seed, "loss", s), so runs
// with and without translation noise share every other random draw.
// Raises the allocator's mmap and trim thresholds (glibc only); called by
// train_field, safe to call repeatedly.
void tune_allocator();

TrainResult train_field(TrainableField& field, std::span<const TrainingItem> dataset, const TrainConfig& cfg);

double trace_tail_mean(const std::vector<double>& trace, double fraction = 0.1);

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_checkpoint(const std::filesystem::path& path, const MlpField& field);
MlpField load_mlp_checkpoint(const std::filesystem::path& path);
void save_checkpoint(const std::filesystem::path& path, const ToyCodec& codec);
ToyCodec load_codec_checkpoint(const std::filesystem::path& path);

// Writes `text` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace flowbind
