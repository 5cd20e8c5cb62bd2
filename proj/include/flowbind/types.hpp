#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "flowbind/geom.hpp"
#include "flowbind/rng.hpp"

namespace flowbind {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kDefaultLatentDim = 8;
// Model units are nm; geometry and rewards work in Å.
inline constexpr double kAngstromPerUnit = 10.0;

// Alpha-carbon coordinates plus per-residue latents, in model units.
struct BinderState {
  Coords coords;
  Matrix latents;

  std::size_t size() const { return static_cast<std::size_t>(coords.rows()); }
  int latent_dim() const { return static_cast<int>(latents.cols()); }
  void validate() const;

  static BinderState zeros(std::size_t n, int latent_dim);
};

// A partially denoised state at times (t_x, t_z) on a schedule grid.
struct NoisyState {
  BinderState state;
  double t_x = 0.0;
  double t_z = 0.0;
  int step = 0;
  StreamKey rng_key;
};

struct TargetContext {
  Coords points;  // model units
  std::vector<char> hotspot;
  std::vector<int> chain_index;
  std::optional<int> class_label;

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  std::size_t hotspot_count() const;
  Vec3 hotspot_centroid() const;
  // Throws ArgumentError; `require_hotspot` enforces at least one flag.
  void validate(bool require_hotspot = true) const;
  TargetContext translated(const Vec3& shift) const;
};

struct Velocity {
  Coords v_x;
  Matrix v_z;
};

// Clean decoded output of one trajectory.
struct Sample {
  BinderState state;
  std::vector<int> labels;
};

PointChain to_angstrom_chain(const Coords& model_units, int chain_id = 0);

}  // namespace flowbind
