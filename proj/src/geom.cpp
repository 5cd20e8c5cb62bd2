#include "flowbind/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

namespace flowbind {

void PointChain::validate() const {
  if (coords.rows() == 0) throw ArgumentError("chain " + std::to_string(chain_id) + " is empty");
  if (!coords.allFinite())
    throw ArgumentError("chain " + std::to_string(chain_id) + " has non-finite coordinates");
  if (residue_ids.size() != size())
    throw ArgumentError("chain " + std::to_string(chain_id) + ": residue id count mismatch");
  for (std::size_t i = 1; i < residue_ids.size(); ++i) {
    if (residue_ids[i] <= residue_ids[i - 1])
      throw ArgumentError("chain " + std::to_string(chain_id) +
                          ": residue ids not strictly increasing at position " + std::to_string(i));
  }
}

PointChain PointChain::from_coords(Coords coords, int chain_id) {
  PointChain c;
  c.residue_ids.resize(static_cast<std::size_t>(coords.rows()));
  for (std::size_t i = 0; i < c.residue_ids.size(); ++i) c.residue_ids[i] = static_cast<int>(i) + 1;
  c.coords = std::move(coords);
  c.chain_id = chain_id;
  return c;
}

void Complex::validate() const {
  if (chains.empty()) throw ArgumentError("complex has no chains");
  for (const auto& c : chains) c.validate();
  if (binder_index && *binder_index >= chains.size())
    throw ArgumentError("binder index out of range");
}

std::size_t Complex::total_residues() const {
  std::size_t n = 0;
  for (const auto& c : chains) n += c.size();
  return n;
}

Vec3 centroid(const Coords& c) {
  if (c.rows() == 0) return Vec3::Zero();
  return c.colwise().mean().transpose();
}

Alignment kabsch_align(const Coords& mobile, const Coords& fixed) {
  if (mobile.rows() != fixed.rows())
    throw ArgumentError("kabsch_align: length mismatch (" + std::to_string(mobile.rows()) + " vs " +
                        std::to_string(fixed.rows()) + ")");
  if (mobile.rows() == 0) throw ArgumentError("kabsch_align: empty point sets");

  const Vec3 cm = centroid(mobile);
  const Vec3 cf = centroid(fixed);
  const Coords pm = mobile.rowwise() - cm.transpose();
  const Coords pf = fixed.rowwise() - cf.transpose();
  const double n = static_cast<double>(mobile.rows());

  Alignment out;
  if (pm.squaredNorm() == 0.0) {
    out.rmsd = std::sqrt(pf.squaredNorm() / n);
    return out;
  }

  // H = P_m^T P_f; R = V diag(1,1,d) U^T.
  const Mat3 h = pm.transpose() * pf;
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double d = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  Mat3 correction = Mat3::Identity();
  correction(2, 2) = d;
  out.rotation = svd.matrixV() * correction * svd.matrixU().transpose();
  out.translation = cf - out.rotation * cm;

  const Coords moved = (pm * out.rotation.transpose());
  const double msd = (moved - pf).squaredNorm() / n;
  out.rmsd = std::sqrt(std::max(0.0, msd));
  return out;
}

Alignment kabsch_align(const PointChain& mobile, const PointChain& fixed) {
  return kabsch_align(mobile.coords, fixed.coords);
}

namespace {

struct CellKey {
  long x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    std::size_t h = static_cast<std::size_t>(k.x) * 73856093u;
    h ^= static_cast<std::size_t>(k.y) * 19349663u;
    h ^= static_cast<std::size_t>(k.z) * 83492791u;
    return h;
  }
};

// Uniform grid over a reference set with cell edge == cutoff, so all
// neighbours of a query lie in the 27 surrounding cells.
class CellList {
 public:
  CellList(const Coords& ref, double cutoff) : ref_(ref), cell_(cutoff) {
    for (Eigen::Index j = 0; j < ref.rows(); ++j) cells_[key(ref.row(j))].push_back(j);
  }

  template <typename Fn>
  void for_neighbours(const Eigen::Ref<const Eigen::RowVector3d>& q, double cutoff, Fn&& fn) const {
    const CellKey k = key(q);
    const double c2 = cutoff * cutoff;
    for (long dx = -1; dx <= 1; ++dx)
      for (long dy = -1; dy <= 1; ++dy)
        for (long dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find({k.x + dx, k.y + dy, k.z + dz});
          if (it == cells_.end()) continue;
          for (Eigen::Index j : it->second)
            if ((ref_.row(j) - q).squaredNorm() <= c2) fn(j);
        }
  }

 private:
  CellKey key(const Eigen::Ref<const Eigen::RowVector3d>& p) const {
    return {static_cast<long>(std::floor(p(0) / cell_)), static_cast<long>(std::floor(p(1) / cell_)),
            static_cast<long>(std::floor(p(2) / cell_))};
  }

  const Coords& ref_;
  double cell_;
  std::unordered_map<CellKey, std::vector<Eigen::Index>, CellHash> cells_;
};

std::vector<std::size_t> flagged(const std::vector<char>& f) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f[i]) out.push_back(i);
  return out;
}

}  // namespace

std::vector<char> within_cutoff(const Coords& query, const Coords& ref, double cutoff) {
  if (!(cutoff > 0.0)) throw ArgumentError("cutoff must be positive");
  std::vector<char> hit(static_cast<std::size_t>(query.rows()), 0);
  if (query.rows() == 0 || ref.rows() == 0) return hit;
  const CellList cells(ref, cutoff);
  const long n = static_cast<long>(query.rows());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    bool any = false;
    cells.for_neighbours(query.row(i), cutoff, [&](Eigen::Index) { any = true; });
    hit[static_cast<std::size_t>(i)] = any ? 1 : 0;
  }
  return hit;
}

InterfaceSets interface_residues(const PointChain& a, const PointChain& b, double cutoff) {
  if (!(cutoff > 0.0)) throw ArgumentError("interface_residues: cutoff must be positive");
  return {flagged(within_cutoff(a.coords, b.coords, cutoff)),
          flagged(within_cutoff(b.coords, a.coords, cutoff))};
}

std::size_t detect_contacts(const Coords& binder, const Coords& target, double donor_acceptor_max) {
  if (!(donor_acceptor_max > 0.0)) throw ArgumentError("detect_contacts: radius must be positive");
  if (binder.rows() == 0 || target.rows() == 0) return 0;
  const CellList cells(target, donor_acceptor_max);
  const long n = static_cast<long>(binder.rows());
  std::size_t total = 0;
#pragma omp parallel for schedule(static) reduction(+ : total)
  for (long i = 0; i < n; ++i) {
    std::size_t local = 0;
    cells.for_neighbours(binder.row(i), donor_acceptor_max, [&](Eigen::Index) { ++local; });
    total += local;
  }
  return total;
}

std::size_t detect_contacts(const PointChain& binder, const PointChain& target, double donor_acceptor_max) {
  return detect_contacts(binder.coords, target.coords, donor_acceptor_max);
}

std::vector<double> nearest_distances(const Coords& query, const Coords& ref) {
  std::vector<double> out(static_cast<std::size_t>(query.rows()),
                          std::numeric_limits<double>::infinity());
  const long n = static_cast<long>(query.rows());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < ref.rows(); ++j)
      best = std::min(best, (ref.row(j) - query.row(i)).squaredNorm());
    out[static_cast<std::size_t>(i)] = std::sqrt(best);
  }
  return out;
}

int ClusterAssignment::num_clusters() const {
  if (labels.empty()) return 0;
  return *std::max_element(labels.begin(), labels.end()) + 1;
}

double structural_similarity(const Coords& a, const Coords& b, double d0) {
  const Eigen::Index n = std::min(a.rows(), b.rows());
  if (n == 0) throw ArgumentError("structural_similarity: empty structure");
  const Alignment al = kabsch_align(a.topRows(n), b.topRows(n));
  return 1.0 / (1.0 + al.rmsd / d0);
}

ClusterAssignment greedy_cluster(std::span<const PointChain> structures, double similarity_threshold) {
  if (!(similarity_threshold > 0.0 && similarity_threshold <= 1.0))
    throw ArgumentError("greedy_cluster: threshold must lie in (0, 1]");
  ClusterAssignment out;
  out.threshold = similarity_threshold;
  std::vector<std::size_t> leaders;
  for (std::size_t i = 0; i < structures.size(); ++i) {
    if (structures[i].size() == 0) throw ArgumentError("greedy_cluster: empty structure");
    int label = -1;
    for (std::size_t c = 0; c < leaders.size(); ++c) {
      if (structural_similarity(structures[i].coords, structures[leaders[c]].coords) >=
          similarity_threshold) {
        label = static_cast<int>(c);
        break;
      }
    }
    if (label < 0) {
      label = static_cast<int>(leaders.size());
      leaders.push_back(i);
    }
    out.labels.push_back(label);
  }
  return out;
}

namespace serial {

InterfaceSets interface_residues(const PointChain& a, const PointChain& b, double cutoff) {
  if (!(cutoff > 0.0)) throw ArgumentError("interface_residues: cutoff must be positive");
  InterfaceSets out;
  const double c2 = cutoff * cutoff;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      if ((a.point(i) - b.point(j)).squaredNorm() <= c2) {
        out.a.push_back(i);
        break;
      }
  for (std::size_t j = 0; j < b.size(); ++j)
    for (std::size_t i = 0; i < a.size(); ++i)
      if ((a.point(i) - b.point(j)).squaredNorm() <= c2) {
        out.b.push_back(j);
        break;
      }
  return out;
}

std::size_t detect_contacts(const Coords& binder, const Coords& target, double donor_acceptor_max) {
  if (!(donor_acceptor_max > 0.0)) throw ArgumentError("detect_contacts: radius must be positive");
  const double c2 = donor_acceptor_max * donor_acceptor_max;
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < binder.rows(); ++i)
    for (Eigen::Index j = 0; j < target.rows(); ++j)
      if ((binder.row(i) - target.row(j)).squaredNorm() <= c2) ++n;
  return n;
}

std::vector<double> nearest_distances(const Coords& query, const Coords& ref) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < query.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < ref.rows(); ++j)
      best = std::min(best, (ref.row(j) - query.row(i)).norm());
    out.push_back(best);
  }
  return out;
}

}  // namespace serial

}  // namespace flowbind
