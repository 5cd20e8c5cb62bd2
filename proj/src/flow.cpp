#include "flowbind/flow.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace flowbind {

double sample_time(Random& rng, const TimeMixture& mix) {
  // Both draws are always consumed so the stream layout is fixed.
  const double u = rng.uniform();
  const double b = rng.beta(mix.beta_a, mix.beta_b);
  const double pick = rng.uniform();
  return pick < mix.uniform_weight ? u : b;
}

double sample_time(Random& rng, Branch which) {
  return sample_time(rng, which == Branch::X ? kCoordTimeMixture : kLatentTimeMixture);
}

InterpolantDraw InterpolantDraw::sample(Random& rng, std::size_t n, int latent_dim, double c_d) {
  if (c_d < 0.0) throw ArgumentError("translation noise std must be non-negative");
  InterpolantDraw d;
  d.c_d = c_d;
  d.x0.resize(static_cast<Eigen::Index>(n), 3);
  d.z0.resize(static_cast<Eigen::Index>(n), latent_dim);
  rng.fill_normal(d.x0);
  rng.fill_normal(d.z0);
  for (int k = 0; k < 3; ++k) d.d(k) = c_d * rng.normal();
  return d;
}

Coords InterpolantDraw::shifted_x0() const {
  Coords out = x0;
  out.rowwise() += d.transpose();
  return out;
}

NoisyState interpolate(const BinderState& clean, const InterpolantDraw& draw, double t_x, double t_z) {
  if (draw.x0.rows() != clean.coords.rows() || draw.z0.rows() != clean.latents.rows() ||
      draw.z0.cols() != clean.latents.cols())
    throw ArgumentError("interpolate: draw shape does not match the clean state");
  if (t_x < 0.0 || t_x > 1.0 || t_z < 0.0 || t_z > 1.0) throw ArgumentError("interpolate: times must lie in [0, 1]");
  NoisyState out;
  out.t_x = t_x;
  out.t_z = t_z;
  out.state.coords = t_x * clean.coords + (1.0 - t_x) * draw.shifted_x0();
  out.state.latents = t_z * clean.latents + (1.0 - t_z) * draw.z0;
  return out;
}

Velocity regression_target(const BinderState& clean, const InterpolantDraw& draw) {
  return {clean.coords - draw.shifted_x0(), clean.latents - draw.z0};
}

double schedule_time(ScheduleKind kind, double u, double gamma) {
  switch (kind) {
    case ScheduleKind::Linear:
      return u;
    case ScheduleKind::Quadratic:
      return u * u;
    case ScheduleKind::Exponential:
      return (1.0 - std::exp(-gamma * u)) / (1.0 - std::exp(-gamma));
  }
  return u;
}

Schedule::Schedule(const ScheduleSpec& s) : spec(s) {
  if (spec.steps < 1) throw ArgumentError("schedule needs at least one step");
  if (spec.kind_x == ScheduleKind::Exponential && !(spec.gamma_x > 0.0))
    throw ArgumentError("exponential schedule needs gamma > 0");
  t_x.resize(static_cast<std::size_t>(spec.steps) + 1);
  t_z.resize(t_x.size());
  for (int i = 0; i <= spec.steps; ++i) {
    const double u = static_cast<double>(i) / spec.steps;
    t_x[static_cast<std::size_t>(i)] = schedule_time(spec.kind_x, u, spec.gamma_x);
    t_z[static_cast<std::size_t>(i)] = schedule_time(spec.kind_z, u, spec.gamma_x);
  }
  t_x.front() = t_z.front() = 0.0;
  t_x.back() = t_z.back() = 1.0;
}

double langevin_scale_x(double t, double clamp) {
  if (t <= 0.0) return clamp;
  return std::min(1.0 / t, clamp);
}

double langevin_scale_z(double t, double clamp) {
  if (t <= 0.0) return clamp;
  constexpr double half_pi = std::numbers::pi / 2.0;
  return std::min(half_pi * std::tan(half_pi * (1.0 - t)), clamp);
}

namespace {

template <typename M>
void check_finite(const M& m, int step, const char* branch) {
  if (!m.allFinite())
    throw NumericError("sde_step: non-finite update at step " + std::to_string(step) + " on branch " + branch);
}

}  // namespace

NoisyState sde_step(const NoisyState& noisy, const Model& model, const TargetContext& ctx, const Schedule& schedule,
                    const SamplerSettings& settings) {
  const int s = noisy.step;
  if (s < 0 || s >= schedule.steps()) throw ArgumentError("sde_step: step outside the schedule");
  if (settings.eta_x < 0.0 || settings.eta_z < 0.0) throw ArgumentError("sde_step: eta must be non-negative");
  const auto si = static_cast<std::size_t>(s);
  const double tx = schedule.t_x[si];
  const double tz = schedule.t_z[si];
  const double dtx = schedule.t_x[si + 1] - tx;
  const double dtz = schedule.t_z[si + 1] - tz;

  const Velocity v = model.velocity(noisy, ctx);
  const Coords& x = noisy.state.coords;
  const Matrix& z = noisy.state.latents;

  Random rng(noisy.rng_key.derive("step", static_cast<std::uint64_t>(s)));
  Coords xi_x(x.rows(), 3);
  Matrix xi_z(z.rows(), z.cols());
  rng.fill_normal(xi_x);
  rng.fill_normal(xi_z);

  NoisyState out;
  out.rng_key = noisy.rng_key;
  out.step = s + 1;
  out.t_x = schedule.t_x[si + 1];
  out.t_z = schedule.t_z[si + 1];
  if (settings.langevin) {
    const double bx = langevin_scale_x(tx, schedule.spec.beta_clamp);
    const double bz = langevin_scale_z(tz, schedule.spec.beta_clamp);
    const Coords score_x = velocity_to_score(v.v_x, x, tx);
    const Matrix score_z = velocity_to_score(v.v_z, z, tz);
    out.state.coords = x + (v.v_x + bx * score_x) * dtx + std::sqrt(2.0 * bx * dtx) * settings.eta_x * xi_x;
    out.state.latents = z + (v.v_z + bz * score_z) * dtz + std::sqrt(2.0 * bz * dtz) * settings.eta_z * xi_z;
  } else {
    out.state.coords = x + v.v_x * dtx;
    out.state.latents = z + v.v_z * dtz;
  }
  check_finite(out.state.coords, s, "x");
  check_finite(out.state.latents, s, "z");
  return out;
}

NoisyState advance(NoisyState noisy, const Model& model, const TargetContext& ctx, const Schedule& schedule,
                   const SamplerSettings& settings, int n_steps) {
  for (int k = 0; k < n_steps && noisy.step < schedule.steps(); ++k)
    noisy = sde_step(noisy, model, ctx, schedule, settings);
  return noisy;
}

NoisyState initial_state(StreamKey key, std::size_t n, int latent_dim, double c_d) {
  Random rng(key.child("init"));
  const InterpolantDraw draw = InterpolantDraw::sample(rng, n, latent_dim, c_d);
  NoisyState s;
  s.state.coords = draw.shifted_x0();
  s.state.latents = draw.z0;
  s.rng_key = key;
  return s;
}

NoisyState sample_trajectory(const Model& model, const TargetContext& ctx, const Schedule& schedule,
                             const SamplerSettings& settings, StreamKey key, std::size_t n, double c_d,
                             const std::optional<NoisyState>& from) {
  NoisyState s;
  if (from) {
    if (from->step < 0 || from->step > schedule.steps() ||
        from->t_x != schedule.t_x[static_cast<std::size_t>(from->step)] ||
        from->t_z != schedule.t_z[static_cast<std::size_t>(from->step)])
      throw ArgumentError("sample_trajectory: starting state is not on the schedule grid");
    s = *from;
  } else {
    s = initial_state(key, n, model.field().latent_dim(), c_d);
  }
  return advance(std::move(s), model, ctx, schedule, settings, schedule.steps());
}

std::vector<FieldExample> make_cfm_examples(std::span<const TrainingItem> batch, StreamKey key, double c_d,
                                            bool translate) {
  std::vector<FieldExample> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const BinderState& clean = batch[i].clean;
    Random rng(key.child(static_cast<std::uint64_t>(i)));
    const double tx = sample_time(rng, Branch::X);
    const double tz = sample_time(rng, Branch::Z);
    InterpolantDraw draw = InterpolantDraw::sample(rng, clean.size(), clean.latent_dim(), translate ? c_d : 0.0);
    if (!translate) draw.d.setZero();
    FieldExample ex;
    ex.input = interpolate(clean, draw, tx, tz);
    ex.context = batch[i].context;
    ex.target = regression_target(clean, draw);
    out.push_back(std::move(ex));
  }
  return out;
}

namespace {

LossResult evaluate(const TrainableField& field, const std::vector<FieldExample>& ex, bool with_grad) {
  LossResult r;
  r.loss = field.squared_error(ex, with_grad ? &r.grad : nullptr);
  if (!std::isfinite(r.loss)) {
    const auto errs = field.example_errors(ex);
    for (std::size_t i = 0; i < errs.size(); ++i)
      if (!std::isfinite(errs[i])) throw NumericError("cfm_loss: non-finite loss at batch index " + std::to_string(i));
    throw NumericError("cfm_loss: non-finite loss");
  }
  return r;
}

}  // namespace

LossResult cfm_loss(const TrainableField& field, std::span<const TrainingItem> batch, StreamKey key, double c_d,
                    bool with_grad) {
  return evaluate(field, make_cfm_examples(batch, key, c_d, true), with_grad);
}

LossResult cfm_loss_untranslated(const TrainableField& field, std::span<const TrainingItem> batch, StreamKey key,
                                 bool with_grad) {
  return evaluate(field, make_cfm_examples(batch, key, 0.0, false), with_grad);
}

std::vector<double> TrainableField::example_errors(std::span<const FieldExample> batch) const {
  std::vector<double> out;
  for (const auto& ex : batch) out.push_back(squared_error(std::span<const FieldExample>(&ex, 1), nullptr));
  return out;
}

Velocity ZeroField::forward(const NoisyState& noisy, const TargetContext&) const {
  return {Coords::Zero(noisy.state.coords.rows(), 3),
          Matrix::Zero(noisy.state.latents.rows(), noisy.state.latents.cols())};
}

}  // namespace flowbind
