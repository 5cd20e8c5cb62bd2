#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowbind/field.hpp"
#include "flowbind/rng.hpp"
#include "flowbind/types.hpp"

namespace flowbind {

enum class Branch { X, Z };

// w·Unif(0,1) + (1-w)·Beta(a, b).
struct TimeMixture {
  double uniform_weight;
  double beta_a;
  double beta_b;

  double mean() const { return uniform_weight * 0.5 + (1.0 - uniform_weight) * beta_a / (beta_a + beta_b); }
};

inline constexpr TimeMixture kCoordTimeMixture{0.02, 1.9, 1.0};
inline constexpr TimeMixture kLatentTimeMixture{0.02, 1.0, 1.5};

double sample_time(Random& rng, const TimeMixture& mix);
double sample_time(Random& rng, Branch which);

inline constexpr double kDefaultTranslationStd = 0.2;

// Source draws for one interpolant: x0, z0 ~ N(0, I) and a global
// translation d ~ N(0, c_d^2 I) applied to every coordinate row.
struct InterpolantDraw {
  Coords x0;
  Matrix z0;
  Vec3 d = Vec3::Zero();
  double c_d = kDefaultTranslationStd;

  // Draw order is x0, z0, then d, so c_d = 0 leaves the other draws unchanged.
  static InterpolantDraw sample(Random& rng, std::size_t n, int latent_dim, double c_d);
  Coords shifted_x0() const;
};

// x_t = t_x x + (1 - t_x)(x0 + d 1^T),  z_t = t_z z + (1 - t_z) z0.
NoisyState interpolate(const BinderState& clean, const InterpolantDraw& draw, double t_x, double t_z);

// Regression targets (x - x0 - d, z - z0).
Velocity regression_target(const BinderState& clean, const InterpolantDraw& draw);

enum class ScheduleKind { Linear, Exponential, Quadratic };

struct ScheduleSpec {
  int steps = 400;
  ScheduleKind kind_x = ScheduleKind::Exponential;
  ScheduleKind kind_z = ScheduleKind::Quadratic;
  double gamma_x = 3.0;
  double beta_clamp = 1e3;
};

// Time grids t(0) = 0 < ... < t(S) = 1 for both branches.
struct Schedule {
  ScheduleSpec spec;
  std::vector<double> t_x;
  std::vector<double> t_z;

  explicit Schedule(const ScheduleSpec& spec = {});
  int steps() const { return spec.steps; }
};

double schedule_time(ScheduleKind kind, double u, double gamma);

// Langevin scalings 1/t and (pi/2) tan(pi/2 (1 - t)), both clamped.
double langevin_scale_x(double t, double clamp);
double langevin_scale_z(double t, double clamp);

class SingularityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Marginal score implied by a velocity under the linear interpolant with a
// standard-normal source: -(x_t - t v) / (1 - t). t = 0 gives -x_t.
template <typename DV, typename DX>
typename DX::PlainObject velocity_to_score(const Eigen::MatrixBase<DV>& v, const Eigen::MatrixBase<DX>& x_t,
                                           double t) {
  if (t >= 1.0) throw SingularityError("velocity_to_score: score is singular at t = 1");
  if (t <= 0.0) return -x_t;
  return -(x_t - t * v) / (1.0 - t);
}

struct SamplerSettings {
  double eta_x = 0.1;
  double eta_z = 0.1;
  // When false the score terms are dropped, giving the Euler ODE update.
  bool langevin = true;

  static SamplerSettings ode() { return {0.0, 0.0, false}; }
};

// One Euler–Maruyama step from grid index `noisy.step` to `noisy.step + 1`.
// Noise for the step comes from the stream (noisy.rng_key, step).
NoisyState sde_step(const NoisyState& noisy, const Model& model, const TargetContext& ctx,
                    const Schedule& schedule, const SamplerSettings& settings);

// Advances up to `n_steps` grid steps, stopping at t = 1.
NoisyState advance(NoisyState noisy, const Model& model, const TargetContext& ctx, const Schedule& schedule,
                   const SamplerSettings& settings, int n_steps);

// Gaussian noise plus one fresh translation draw, at grid index 0.
NoisyState initial_state(StreamKey key, std::size_t n, int latent_dim, double c_d);

// Simulates from `from` (or a fresh initial state) to (1, 1).
NoisyState sample_trajectory(const Model& model, const TargetContext& ctx, const Schedule& schedule,
                             const SamplerSettings& settings, StreamKey key, std::size_t n, double c_d,
                             const std::optional<NoisyState>& from = std::nullopt);

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;
};

struct TrainingItem {
  BinderState clean;
  const TargetContext* context = nullptr;
};

// Conditional flow matching loss with translation noise. Item i draws its
// times, source noise and translation from stream key.derive(i).
LossResult cfm_loss(const TrainableField& field, std::span<const TrainingItem> batch, StreamKey key, double c_d,
                    bool with_grad = true);

// The same objective without the translation term; shares the random draws
// of cfm_loss so that c_d = 0 reproduces it.
LossResult cfm_loss_untranslated(const TrainableField& field, std::span<const TrainingItem> batch, StreamKey key,
                                 bool with_grad = true);

std::vector<FieldExample> make_cfm_examples(std::span<const TrainingItem> batch, StreamKey key, double c_d,
                                            bool translate);

}  // namespace flowbind
