#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace flowbind {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
// N×3, one row per residue.
using Coords = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition the caller promised was violated.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Alpha-carbon trace of one chain. Coordinates are in Å.
struct PointChain {
  Coords coords;
  std::vector<int> residue_ids;
  int chain_id = 0;

  std::size_t size() const { return static_cast<std::size_t>(coords.rows()); }
  Vec3 point(std::size_t i) const { return coords.row(static_cast<Eigen::Index>(i)).transpose(); }

  // Throws ArgumentError when any invariant is broken.
  void validate() const;

  // Chain with residue ids 1..N.
  static PointChain from_coords(Coords coords, int chain_id = 0);
};

struct Complex {
  std::vector<PointChain> chains;
  std::optional<std::size_t> binder_index;

  void validate() const;
  std::size_t total_residues() const;
};

struct Alignment {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double rmsd = 0.0;
};

// Least-squares rigid superposition: fixed ≈ rotation * mobile + translation.
// When all mobile points coincide the rotation is undefined; identity and a
// zero translation are returned, with rmsd still the minimum over rigid motions.
Alignment kabsch_align(const Coords& mobile, const Coords& fixed);
Alignment kabsch_align(const PointChain& mobile, const PointChain& fixed);

Vec3 centroid(const Coords& c);

struct InterfaceSets {
  std::vector<std::size_t> a;
  std::vector<std::size_t> b;
};

// Indices of a within `cutoff` of some point of b, and vice versa (sorted).
InterfaceSets interface_residues(const PointChain& a, const PointChain& b, double cutoff);

// Number of (i, j) pairs with |binder_i - target_j| <= donor_acceptor_max.
std::size_t detect_contacts(const PointChain& binder, const PointChain& target,
                            double donor_acceptor_max);
std::size_t detect_contacts(const Coords& binder, const Coords& target, double donor_acceptor_max);

// For every point of `query`, whether some point of `ref` lies within `cutoff`.
std::vector<char> within_cutoff(const Coords& query, const Coords& ref, double cutoff);

// Minimum distance from each query point to the reference set.
std::vector<double> nearest_distances(const Coords& query, const Coords& ref);

struct ClusterAssignment {
  std::vector<int> labels;
  double threshold = 0.5;

  int num_clusters() const;
};

inline constexpr double kSimilarityScaleAngstrom = 3.0;
inline constexpr double kDefaultClusterThreshold = 0.5;

// 1 / (1 + rmsd / d0) after superposing the common prefix of both chains.
double structural_similarity(const Coords& a, const Coords& b,
                             double d0 = kSimilarityScaleAngstrom);

// Leader clustering in input order: an item joins the first cluster whose
// founding member has similarity >= threshold, otherwise founds a new one.
ClusterAssignment greedy_cluster(std::span<const PointChain> structures,
                                 double similarity_threshold = kDefaultClusterThreshold);

// Serial brute-force versions of the pairwise kernels. Kept as the reference
// the cell-list kernels are tested and benchmarked against.
namespace serial {
InterfaceSets interface_residues(const PointChain& a, const PointChain& b, double cutoff);
std::size_t detect_contacts(const Coords& binder, const Coords& target, double donor_acceptor_max);
std::vector<double> nearest_distances(const Coords& query, const Coords& ref);
}  // namespace serial

}  // namespace flowbind
