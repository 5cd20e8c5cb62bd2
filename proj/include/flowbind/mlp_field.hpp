#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flowbind/autodiff.hpp"
#include "flowbind/field.hpp"

namespace flowbind {

struct MlpArchitecture {
  int latent_dim = kDefaultLatentDim;
  int hidden = 64;
  int layers = 2;
  // Mean of the noisy binder coordinates as a per-token input.
  bool binder_com_feature = true;
  // Hotspot centroid and target mean as per-token inputs.
  bool target_summary = true;
  int num_classes = 4;

  int input_width() const;
  int output_width() const { return 3 + latent_dim; }
  bool operator==(const MlpArchitecture&) const = default;
};

inline constexpr int kTimeFeatures = 16;
inline constexpr int kPositionFeatures = 4;

// Per-token MLP: token features (noisy coordinates and latents, pooled binder
// and target summaries, class one-hot, relative position, time embeddings) go
// through `layers` SiLU layers, each scaled by an affine function of the time
// embedding, plus a linear skip from the features to the output.
class MlpField final : public TrainableField {
 public:
  explicit MlpField(const MlpArchitecture& arch);
  MlpField(const MlpArchitecture& arch, std::vector<double> parameters);

  static MlpField random(const MlpArchitecture& arch, std::uint64_t seed, double output_scale = 0.1);

  Velocity forward(const NoisyState& noisy, const TargetContext& ctx) const override;
  int latent_dim() const override { return arch_.latent_dim; }
  std::string kind() const override { return "mlp"; }

  std::size_t num_parameters() const override { return params_.size(); }
  std::span<const double> parameters() const override { return params_; }
  std::span<double> parameters() override { return params_; }

  double squared_error(std::span<const FieldExample> batch, std::vector<double>* grad) const override;

  const MlpArchitecture& architecture() const { return arch_; }

  // Token features for one noisy state; rows are residues.
  Matrix features(const NoisyState& noisy, const TargetContext& ctx) const;
  static Eigen::RowVectorXd time_features(double t_x, double t_z);

 private:
  struct Block {
    std::size_t offset;
    Eigen::Index rows;
    Eigen::Index cols;
  };
  struct Layer {
    Block w, b, film_w, film_b;
  };

  void layout();
  Matrix block(const Block& b) const;
  ad::Var run(ad::Tape& tape, const Matrix& feats, const Matrix& tfeats, std::vector<Matrix>* sinks) const;

  MlpArchitecture arch_;
  std::vector<Layer> layers_;
  Block out_w_{}, out_b_{}, skip_w_{}, skip_b_{};
  std::vector<Block> blocks_;
  std::vector<double> params_;
};

}  // namespace flowbind
