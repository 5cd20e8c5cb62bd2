#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace flowbind {

class CurveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CurvePoint {
  double compute = 0.0;
  double unique_successes = 0.0;
  bool operator==(const CurvePoint&) const = default;
};

// Unique successes against compute for one algorithm.
struct ScalingCurve {
  std::string algorithm;
  std::string compute_unit = "forward_calls";
  std::vector<CurvePoint> points;

  // Compute strictly increasing, successes nondecreasing.
  void validate() const;
  bool operator==(const ScalingCurve&) const = default;
};

ScalingCurve curve_from_manifest(const nlohmann::json& manifest);

// Curves sharing an algorithm are averaged as step functions over the union
// of their compute points. Mixed compute units are rejected.
std::vector<ScalingCurve> combine_curves(const std::vector<ScalingCurve>& curves);

std::string curves_to_csv(const std::vector<ScalingCurve>& curves);
std::vector<ScalingCurve> parse_curves_csv(const std::string& text);
std::string curves_to_svg(const std::vector<ScalingCurve>& curves);

struct CurveFiles {
  std::filesystem::path csv;
  std::filesystem::path svg;
};

// Writes <prefix>.csv and <prefix>.svg from run manifests.
CurveFiles emit_curves(const std::vector<nlohmann::json>& manifests, const std::filesystem::path& prefix);

}  // namespace flowbind
