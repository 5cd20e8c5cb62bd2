#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "flowbind/analytic_field.hpp"
#include "flowbind/codec.hpp"
#include "flowbind/flow.hpp"

namespace flowbind {

// Synthetic binder placement task, all lengths in model units (nm).
// The target is a sphere of points; a binder is one of `templates` arc-like
// traces hovering `standoff` above an anchor site, jittered per residue by
// sigma_data and shifted as a whole by tau_data.
struct TaskSpec {
  int binder_length = 12;
  int latent_dim = kDefaultLatentDim;
  int target_points = 24;
  double target_radius = 1.2;
  std::vector<int> sites = {0, 5, 11, 17, 23};
  std::vector<double> site_weights;  // empty means uniform
  // Target points within this distance of the anchor are flagged as well.
  double hotspot_radius = 0.0;
  int templates = 1;
  double bond_length = 0.38;
  double curvature_min = 0.0;
  double curvature_max = 0.0;
  double helix_radius_max = 0.0;
  bool random_orientation = false;
  double standoff = 0.6;
  double sigma_data = 0.05;
  double tau_data = 0.1;
  double sigma_latent = 0.1;
  Vec3 target_center = Vec3::Zero();
  std::uint64_t task_seed = 1;

  void validate() const;
  std::vector<double> normalized_site_weights() const;
};

struct ToyExample {
  BinderState clean;
  std::vector<int> labels;
  TargetContext context;
  int site = 0;  // index into TaskSpec::sites
  int template_id = 0;
};

inline constexpr double kInterfaceCutoffUnits = 0.8;

Coords target_points(const TaskSpec& spec);
// Context with the hotspot patch around `site` (an index into spec.sites).
TargetContext make_context(const TaskSpec& spec, int site);
// Local-frame traces, one per template.
std::vector<Coords> template_traces(const TaskSpec& spec);
// Noise-free binder for (template, site).
Coords component_mean(const TaskSpec& spec, const std::vector<Coords>& traces, int template_id, int site);
// 0 for residues within the interface cutoff of the target, otherwise 1 + i mod 3.
std::vector<int> interface_labels(const Coords& binder, const Coords& target);
// [one-hot label, local geometry, 0...] of width latent_dim.
Matrix latent_code(std::span<const int> labels, const Matrix& geometry, int latent_dim);

std::vector<ToyExample> gen_toy_binder_dataset(StreamKey key, const TaskSpec& spec, std::size_t count);

// Pointers refer into `examples`, which must outlive the result.
std::vector<TrainingItem> training_items(const std::vector<ToyExample>& examples);
std::vector<CodecItem> codec_items(const std::vector<ToyExample>& examples);

// Exact velocity field of the task's data distribution. `only_site` keeps
// the components of a single site.
std::shared_ptr<AnalyticMixtureField> task_mixture_field(const TaskSpec& spec, double c_d,
                                                         std::optional<int> only_site = std::nullopt);

TaskSpec ablation_task();
TaskSpec hard_task();

}  // namespace flowbind
