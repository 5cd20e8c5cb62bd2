#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "flowbind/config.hpp"
#include "flowbind/curves.hpp"
#include "flowbind/pipeline.hpp"
#include "flowbind/search.hpp"

namespace flowbind {

inline constexpr const char* kSoftwareVersion = "0.3.0";
inline constexpr int kManifestVersion = 1;

// Leader clustering of the accepted binders in discovery order
// (evaluations_at, then provenance).
std::size_t count_unique_successes(const SuccessSet& set, double threshold = kDefaultClusterThreshold);
std::vector<SuccessRecord> discovery_order(const SuccessSet& set);

// Unique-success count after each success, one point per distinct compute
// value, closed by a point at `total_evaluations`.
ScalingCurve success_curve(const SuccessSet& set, const std::string& algorithm, std::uint64_t total_evaluations,
                           double threshold = kDefaultClusterThreshold);

nlohmann::json success_record_to_json(const SuccessRecord& r);

struct TrainedModel {
  std::shared_ptr<const VelocityField> field;
  std::optional<TrainResult> training;
};

// Builds the analytic field, or trains / loads the MLP.
TrainedModel build_model(const Config& cfg);
// Trains an MLP on the configured task regardless of model.kind.
TrainedModel train_model(const Config& cfg, MlpField** out_field = nullptr);

struct ExperimentResult {
  nlohmann::json manifest;
  SuccessSet successes;
  ScalingCurve curve;
  std::uint64_t evaluations = 0;
};

// Runs the configured algorithm and, when `out_dir` is non-empty, writes
// manifest.json, successes.jsonl, curve.csv and optional PDB dumps there.
// An existing manifest is never overwritten.
ExperimentResult run_experiment(const Config& cfg, const std::filesystem::path& out_dir = {},
                                const TrainedModel* model = nullptr);

struct PipelineOptions {
  std::filesystem::path input;
  // Optional JSON list of {"chain": "A", "ranges": [[start, end], ...]}.
  std::filesystem::path domains;
  double contact_dist = kDimerContactDistance;
  int min_contacts = kDimerMinContacts;
  CropConfig crop;
  std::uint64_t seed = 0;
};

std::vector<DomainAnnotation> parse_domain_annotations(const nlohmann::json& j);

// Splits domains (when annotated), extracts dimers and crops each one,
// writing crop_<k>.pdb files and manifest.json into `out_dir`.
nlohmann::json run_pipeline(const PipelineOptions& opt, const std::filesystem::path& out_dir);

// Manifest without the wall-clock fields, for reproducibility comparisons.
nlohmann::json strip_wall_clock(nlohmann::json manifest);

}  // namespace flowbind
