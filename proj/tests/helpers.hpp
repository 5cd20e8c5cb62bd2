#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "flowbind/geom.hpp"
#include "flowbind/pipeline.hpp"
#include "flowbind/rng.hpp"

namespace testutil {

using namespace flowbind;

inline Mat3 random_rotation(Random& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q.toRotationMatrix();
}

inline Coords random_coords(Random& rng, int n, double scale = 10.0) {
  Coords c(n, 3);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) c(i, k) = scale * rng.normal();
  return c;
}

// Random walk with unit-ish steps, looks like a chain trace.
inline Coords random_walk(Random& rng, int n, double step = 3.8, Vec3 start = Vec3::Zero()) {
  Coords c(n, 3);
  Vec3 p = start;
  for (int i = 0; i < n; ++i) {
    Vec3 d(rng.normal(), rng.normal(), rng.normal());
    p += step * d.normalized();
    c.row(i) = p.transpose();
  }
  return c;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("flowbind-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::FILE* f = std::fopen(p.string().c_str(), "rb");
  if (!f) return {};
  std::string s;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) s.append(buf, n);
  std::fclose(f);
  return s;
}

}  // namespace testutil

namespace testutil {

// Chains of random-walk traces started near each other so that some pairs
// touch; residue ids are 1..n (with an optional offset).
inline flowbind::Complex random_complex(flowbind::Random& rng, int chains, int min_len, int max_len,
                                        double spread = 20.0) {
  using namespace flowbind;
  Complex c;
  for (int k = 0; k < chains; ++k) {
    const int n = min_len + static_cast<int>(rng.index(static_cast<std::size_t>(max_len - min_len + 1)));
    const Vec3 start(spread * rng.normal(), spread * rng.normal(), spread * rng.normal());
    PointChain ch = PointChain::from_coords(random_walk(rng, n, 3.8, start), 'A' + k);
    c.chains.push_back(std::move(ch));
  }
  return c;
}

// Brute-force dimer oracle: count residues of each chain with any partner
// residue within the cutoff, straight from the pairwise distances.
inline std::vector<std::pair<std::size_t, std::size_t>> brute_dimers(const flowbind::Complex& c, double dist,
                                                                     int min_contacts) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < c.chains.size(); ++i)
    for (std::size_t j = i + 1; j < c.chains.size(); ++j) {
      const auto& a = c.chains[i].coords;
      const auto& b = c.chains[j].coords;
      int na = 0, nb = 0;
      for (Eigen::Index p = 0; p < a.rows(); ++p) {
        bool hit = false;
        for (Eigen::Index q = 0; q < b.rows() && !hit; ++q) hit = (a.row(p) - b.row(q)).norm() <= dist;
        na += hit;
      }
      for (Eigen::Index q = 0; q < b.rows(); ++q) {
        bool hit = false;
        for (Eigen::Index p = 0; p < a.rows() && !hit; ++p) hit = (a.row(p) - b.row(q)).norm() <= dist;
        nb += hit;
      }
      if (na >= min_contacts && nb >= min_contacts) out.emplace_back(i, j);
    }
  return out;
}

}  // namespace testutil
