#include "flowbind/toytask.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace flowbind {

void TaskSpec::validate() const {
  if (binder_length < 1) throw ArgumentError("task: binder_length must be >= 1");
  if (latent_dim < ToyCodec::input_width())
    throw ArgumentError("task: latent_dim must be >= " + std::to_string(ToyCodec::input_width()));
  if (target_points < 1 || !(target_radius > 0.0)) throw ArgumentError("task: invalid target geometry");
  if (sites.empty()) throw ArgumentError("task: at least one hotspot site is required");
  for (int s : sites)
    if (s < 0 || s >= target_points) throw ArgumentError("task: site index " + std::to_string(s) + " out of range");
  if (!site_weights.empty()) {
    if (site_weights.size() != sites.size()) throw ArgumentError("task: site_weights must match sites");
    double total = 0.0;
    for (double w : site_weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ArgumentError("task: site weights must be finite and >= 0");
      total += w;
    }
    if (!(total > 0.0)) throw ArgumentError("task: site weights sum to zero");
  }
  if (templates < 1) throw ArgumentError("task: templates must be >= 1");
  if (!(bond_length > 0.0) || standoff < 0.0 || sigma_data < 0.0 || tau_data < 0.0 || !(sigma_latent > 0.0))
    throw ArgumentError("task: invalid noise or spacing parameters");
  if (curvature_min > curvature_max || helix_radius_max < 0.0) throw ArgumentError("task: invalid template ranges");
}

std::vector<double> TaskSpec::normalized_site_weights() const {
  std::vector<double> w = site_weights.empty() ? std::vector<double>(sites.size(), 1.0) : site_weights;
  double total = 0.0;
  for (double x : w) total += x;
  for (double& x : w) x /= total;
  return w;
}

Coords target_points(const TaskSpec& spec) {
  const int m = spec.target_points;
  Coords p(m, 3);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < m; ++i) {
    const double y = 1.0 - 2.0 * (i + 0.5) / m;
    const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    const double th = golden * i;
    p.row(i) << r * std::cos(th), y, r * std::sin(th);
  }
  p *= spec.target_radius;
  p.rowwise() += spec.target_center.transpose();
  return p;
}

TargetContext make_context(const TaskSpec& spec, int site) {
  if (site < 0 || site >= static_cast<int>(spec.sites.size())) throw ArgumentError("make_context: site out of range");
  TargetContext c;
  c.points = target_points(spec);
  const auto n = static_cast<std::size_t>(c.points.rows());
  c.hotspot.assign(n, 0);
  c.chain_index.assign(n, 0);
  const Eigen::RowVector3d anchor = c.points.row(spec.sites[static_cast<std::size_t>(site)]);
  for (std::size_t i = 0; i < n; ++i)
    if ((c.points.row(static_cast<Eigen::Index>(i)) - anchor).norm() <= spec.hotspot_radius) c.hotspot[i] = 1;
  c.hotspot[static_cast<std::size_t>(spec.sites[static_cast<std::size_t>(site)])] = 1;
  return c;
}

std::vector<Coords> template_traces(const TaskSpec& spec) {
  std::vector<Coords> out;
  const int n = spec.binder_length;
  for (int j = 0; j < spec.templates; ++j) {
    Random rng(StreamKey{spec.task_seed}.derive("template", static_cast<std::uint64_t>(j)));
    const double kappa = spec.curvature_min + (spec.curvature_max - spec.curvature_min) * rng.uniform();
    const double radius = spec.helix_radius_max * rng.uniform();
    const double twist = 1.2 + 0.8 * rng.uniform();
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    const double phi = spec.random_orientation ? 2.0 * std::numbers::pi * rng.uniform() : 0.0;
    Coords c(n, 3);  // columns: u, w, n of the site frame
    for (int i = 0; i < n; ++i) {
      const double s = (i - 0.5 * (n - 1)) * spec.bond_length;
      double u = s, h = 0.0;
      if (std::abs(kappa) > 1e-12) {
        u = std::sin(s * kappa) / kappa;
        h = -(1.0 - std::cos(s * kappa)) / kappa;
      }
      const double w = radius * std::cos(twist * i + phase);
      h += radius * std::sin(twist * i + phase);
      c.row(i) << std::cos(phi) * u - std::sin(phi) * w, std::sin(phi) * u + std::cos(phi) * w, h;
    }
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

void site_frame(const Vec3& normal, Vec3& u, Vec3& w) {
  const Vec3 ref = std::abs(normal.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  u = normal.cross(ref).normalized();
  w = normal.cross(u);
}

}  // namespace

Coords component_mean(const TaskSpec& spec, const std::vector<Coords>& traces, int template_id, int site) {
  const Coords pts = target_points(spec);
  const Vec3 anchor = pts.row(spec.sites[static_cast<std::size_t>(site)]).transpose();
  const Vec3 rel = anchor - spec.target_center;
  const Vec3 nrm = rel.norm() > 0.0 ? Vec3(rel.normalized()) : Vec3(Vec3::UnitZ());
  Vec3 u, w;
  site_frame(nrm, u, w);
  const Coords& t = traces[static_cast<std::size_t>(template_id)];
  Coords m(t.rows(), 3);
  const Vec3 base = anchor + spec.standoff * nrm;
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    m.row(i) = (base + t(i, 0) * u + t(i, 1) * w + t(i, 2) * nrm).transpose();
  return m;
}

std::vector<int> interface_labels(const Coords& binder, const Coords& target) {
  const std::vector<char> near = within_cutoff(binder, target, kInterfaceCutoffUnits);
  std::vector<int> out(near.size());
  for (std::size_t i = 0; i < near.size(); ++i) out[i] = near[i] ? 0 : 1 + static_cast<int>(i % 3);
  return out;
}

Matrix latent_code(std::span<const int> labels, const Matrix& geometry, int latent_dim) {
  Matrix z = Matrix::Zero(geometry.rows(), latent_dim);
  for (Eigen::Index i = 0; i < geometry.rows(); ++i) z(i, labels[static_cast<std::size_t>(i)]) = 1.0;
  z.middleCols(kLabelAlphabet, kGeometryFeatures) = geometry;
  return z;
}

std::vector<ToyExample> gen_toy_binder_dataset(StreamKey key, const TaskSpec& spec, std::size_t count) {
  spec.validate();
  const std::vector<Coords> traces = template_traces(spec);
  const std::vector<double> weights = spec.normalized_site_weights();
  const Coords target = target_points(spec);
  std::vector<ToyExample> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Random rng(key.child(static_cast<std::uint64_t>(k)));
    const double u = rng.uniform();
    int site = static_cast<int>(weights.size()) - 1;
    double acc = 0.0;
    for (std::size_t s = 0; s < weights.size(); ++s) {
      acc += weights[s];
      if (u < acc) {
        site = static_cast<int>(s);
        break;
      }
    }
    const int tmpl = static_cast<int>(rng.index(static_cast<std::size_t>(spec.templates)));
    const Coords mean = component_mean(spec, traces, tmpl, site);
    ToyExample ex;
    ex.site = site;
    ex.template_id = tmpl;
    ex.context = make_context(spec, site);
    ex.labels = interface_labels(mean, target);
    const Matrix code = latent_code(ex.labels, local_geometry(mean), spec.latent_dim);

    Coords hot(static_cast<Eigen::Index>(ex.context.hotspot_count()), 3);
    for (std::size_t i = 0, r = 0; i < ex.context.size(); ++i)
      if (ex.context.hotspot[i]) hot.row(static_cast<Eigen::Index>(r++)) = target.row(static_cast<Eigen::Index>(i));

    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      Coords jitter(mean.rows(), 3);
      rng.fill_normal(jitter);
      Vec3 shift;
      for (int a = 0; a < 3; ++a) shift(a) = spec.tau_data * rng.normal();
      ex.clean.coords = mean + spec.sigma_data * jitter;
      ex.clean.coords.rowwise() += shift.transpose();
      for (char c : within_cutoff(ex.clean.coords, hot, kInterfaceCutoffUnits)) placed = placed || c;
    }
    if (!placed) throw ArgumentError("gen_toy_binder_dataset: binder cannot reach the hotspot; task parameters are infeasible");
    Matrix noise(mean.rows(), spec.latent_dim);
    rng.fill_normal(noise);
    ex.clean.latents = code + spec.sigma_latent * noise;
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<TrainingItem> training_items(const std::vector<ToyExample>& examples) {
  std::vector<TrainingItem> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back({e.clean, &e.context});
  return out;
}

std::vector<CodecItem> codec_items(const std::vector<ToyExample>& examples) {
  std::vector<CodecItem> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back({local_geometry(e.clean.coords), e.labels});
  return out;
}

std::shared_ptr<AnalyticMixtureField> task_mixture_field(const TaskSpec& spec, double c_d, std::optional<int> only_site) {
  spec.validate();
  const std::vector<Coords> traces = template_traces(spec);
  const std::vector<double> weights = spec.normalized_site_weights();
  const Coords target = target_points(spec);
  std::vector<MixtureComponent> comps;
  for (int s = 0; s < static_cast<int>(spec.sites.size()); ++s) {
    if (only_site && *only_site != s) continue;
    if (weights[static_cast<std::size_t>(s)] <= 0.0) continue;
    for (int j = 0; j < spec.templates; ++j) {
      const Coords m = component_mean(spec, traces, j, s);
      const std::vector<int> labels = interface_labels(m, target);
      comps.push_back({m, latent_code(labels, local_geometry(m), spec.latent_dim),
                       weights[static_cast<std::size_t>(s)] / spec.templates});
    }
  }
  if (comps.empty()) throw ArgumentError("task_mixture_field: no component has positive weight");
  return std::make_shared<AnalyticMixtureField>(
      std::move(comps), MixtureNoise{std::max(spec.sigma_data, 1e-6), spec.tau_data, spec.sigma_latent, c_d});
}

TaskSpec ablation_task() {
  TaskSpec t;
  t.binder_length = 32;
  return t;
}

TaskSpec hard_task() {
  TaskSpec t;
  t.binder_length = 10;
  t.target_points = 96;
  t.target_radius = 2.0;
  // Farthest-point selection on the sphere, at least 1.5 nm apart.
  t.sites = {0, 12, 19, 39, 43, 46, 49, 50, 61, 81, 83, 95};
  t.templates = 24;
  t.curvature_min = 0.0;
  t.curvature_max = 2.0;
  t.helix_radius_max = 0.45;
  t.random_orientation = true;
  t.standoff = 0.5;
  t.hotspot_radius = 0.8;
  t.sigma_data = 0.03;
  t.tau_data = 0.03;
  t.task_seed = 7;
  return t;
}

}  // namespace flowbind
