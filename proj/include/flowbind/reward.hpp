#pragma once

#include <map>
#include <string>
#include <vector>

#include "flowbind/types.hpp"

namespace flowbind {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kIpaeCeiling = 31.0;
inline constexpr double kIpaeScaleAngstrom = 10.0;
inline constexpr double kContactRadiusAngstrom = 3.5;
inline constexpr double kCropInterfaceAngstrom = 8.0;

// Binder, target and hotspot flags in Å.
struct RewardGeometry {
  Coords binder;
  Coords target;
  std::vector<char> hotspot;

  static RewardGeometry from_model_units(const Coords& binder, const TargetContext& ctx);
};

// 31 (1 - exp(-dbar / 10)) with dbar the mean distance from binder points
// to their nearest hotspot point.
double proxy_ipae(const RewardGeometry& g, double scale = kIpaeScaleAngstrom);
double proxy_ipae_from_distance(double mean_distance, double scale = kIpaeScaleAngstrom);
double contact_count_reward(const RewardGeometry& g, double radius = kContactRadiusAngstrom);
// -|CoM(binder) - hotspot centroid|
double com_placement_reward(const RewardGeometry& g);
// Fraction of residues whose label agrees with their position: label 0 on
// interface residues, a non-zero label elsewhere.
double interface_label_fraction(const RewardGeometry& g, const std::vector<int>& labels,
                                double cutoff = kCropInterfaceAngstrom);

struct RewardTerm {
  std::string name;  // proxy_ipae | contact_count | com_placement | custom
  double weight = 1.0;
  double normalizer = 1.0;
  // For custom terms: either a built-in scorer name or an external command.
  // The command receives a PDB file path as its last argument and must
  // print a single number on stdout.
  std::string scorer;
  std::string command;
};

struct RewardSpec {
  std::vector<RewardTerm> terms;
  double contact_radius = kContactRadiusAngstrom;
  double ipae_scale = kIpaeScaleAngstrom;

  void validate() const;
  static double default_normalizer(const std::string& name);
  static RewardSpec ipae_only();
};

// proxy_ipae enters as (31 - raw) / normalizer, everything else as raw / normalizer.
inline constexpr const char* kRewardConvention = "maximize; proxy_ipae term = (31 - raw)/normalizer; others raw/normalizer";

using RewardComponents = std::map<std::string, double>;

// Weighted sum of normalised components. Unknown or missing names are config errors.
double normalize_reward(const RewardComponents& raw, const RewardSpec& spec);

struct RewardBreakdown {
  RewardComponents raw;
  double total = 0.0;
};

// Runs `command path` through the shell and parses the first number printed.
double run_external_scorer(const std::string& command, const std::string& structure_path);

// Always fills proxy_ipae, contact_count and com_placement; custom terms are
// evaluated only when present in the spec.
RewardBreakdown evaluate_reward(const Sample& sample, const TargetContext& ctx, const RewardSpec& spec);

}  // namespace flowbind
