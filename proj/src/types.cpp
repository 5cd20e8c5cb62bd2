#include "flowbind/types.hpp"

#include <algorithm>
#include <array>
#include <string>

namespace flowbind {

void BinderState::validate() const {
  if (coords.rows() < 1) throw ArgumentError("binder state has no residues");
  if (latents.rows() != coords.rows())
    throw ArgumentError("binder state: latent rows (" + std::to_string(latents.rows()) +
                        ") differ from residue count (" + std::to_string(coords.rows()) + ")");
  if (latents.cols() < 1) throw ArgumentError("binder state: latent width must be >= 1");
  if (!coords.allFinite() || !latents.allFinite()) throw NumericError("binder state has non-finite entries");
}

BinderState BinderState::zeros(std::size_t n, int latent_dim) {
  BinderState s;
  s.coords = Coords::Zero(static_cast<Eigen::Index>(n), 3);
  s.latents = Matrix::Zero(static_cast<Eigen::Index>(n), latent_dim);
  return s;
}

std::size_t TargetContext::hotspot_count() const {
  return static_cast<std::size_t>(std::count_if(hotspot.begin(), hotspot.end(), [](char f) { return f != 0; }));
}

Vec3 TargetContext::hotspot_centroid() const {
  // Sum in lexicographic order so the result does not depend on point order.
  std::vector<std::array<double, 3>> pts;
  for (std::size_t i = 0; i < size(); ++i)
    if (hotspot[i]) pts.push_back({points(static_cast<Eigen::Index>(i), 0), points(static_cast<Eigen::Index>(i), 1),
                                   points(static_cast<Eigen::Index>(i), 2)});
  if (pts.empty()) throw ArgumentError("target context has no hotspots");
  std::sort(pts.begin(), pts.end());
  Vec3 s = Vec3::Zero();
  for (const auto& p : pts) s += Vec3(p[0], p[1], p[2]);
  return s / static_cast<double>(pts.size());
}

void TargetContext::validate(bool require_hotspot) const {
  if (points.rows() == 0) throw ArgumentError("target context has no points");
  if (hotspot.size() != size()) throw ArgumentError("target context: hotspot flag count mismatch");
  if (!chain_index.empty() && chain_index.size() != size())
    throw ArgumentError("target context: chain index count mismatch");
  if (!points.allFinite()) throw ArgumentError("target context has non-finite coordinates");
  if (require_hotspot && hotspot_count() == 0) throw ArgumentError("target context has no hotspots");
}

TargetContext TargetContext::translated(const Vec3& shift) const {
  TargetContext out = *this;
  out.points.rowwise() += shift.transpose();
  return out;
}

PointChain to_angstrom_chain(const Coords& model_units, int chain_id) {
  return PointChain::from_coords(model_units * kAngstromPerUnit, chain_id);
}

}  // namespace flowbind
