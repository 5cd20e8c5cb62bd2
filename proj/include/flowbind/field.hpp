#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "flowbind/types.hpp"

namespace flowbind {

// Velocity approximator v(x_t, z_t, t_x, t_z; target) for both branches.
class VelocityField {
 public:
  virtual ~VelocityField() = default;
  virtual Velocity forward(const NoisyState& noisy, const TargetContext& ctx) const = 0;
  virtual int latent_dim() const = 0;
  virtual std::string kind() const = 0;
};

// One supervised item for squared-error training: the field is evaluated at
// `input` and compared against `target`.
struct FieldExample {
  NoisyState input;
  const TargetContext* context = nullptr;
  Velocity target;
};

class TrainableField : public VelocityField {
 public:
  virtual std::size_t num_parameters() const = 0;
  virtual std::span<const double> parameters() const = 0;
  virtual std::span<double> parameters() = 0;

  // Mean over examples of the summed squared error of both branches. When
  // `grad` is non-null it receives d(loss)/d(parameters).
  virtual double squared_error(std::span<const FieldExample> batch, std::vector<double>* grad) const = 0;

  // Per-example squared errors, used to locate non-finite losses.
  virtual std::vector<double> example_errors(std::span<const FieldExample> batch) const;
};

// Counts every denoiser evaluation. All sampling and search code evaluates
// the field through this wrapper, so `forward_calls` is the compute account.
class Model {
 public:
  explicit Model(std::shared_ptr<const VelocityField> field) : field_(std::move(field)) {}

  Velocity velocity(const NoisyState& noisy, const TargetContext& ctx) const {
    forward_calls_.fetch_add(1, std::memory_order_relaxed);
    return field_->forward(noisy, ctx);
  }

  const VelocityField& field() const { return *field_; }
  std::shared_ptr<const VelocityField> shared_field() const { return field_; }
  std::uint64_t forward_calls() const { return forward_calls_.load(); }
  void reset_counter() { forward_calls_.store(0); }

 private:
  std::shared_ptr<const VelocityField> field_;
  mutable std::atomic<std::uint64_t> forward_calls_{0};
};

// Returns zero velocities; used for degenerate sampler checks.
class ZeroField final : public VelocityField {
 public:
  explicit ZeroField(int latent_dim = kDefaultLatentDim) : latent_dim_(latent_dim) {}
  Velocity forward(const NoisyState& noisy, const TargetContext& ctx) const override;
  int latent_dim() const override { return latent_dim_; }
  std::string kind() const override { return "zero"; }

 private:
  int latent_dim_;
};

}  // namespace flowbind
