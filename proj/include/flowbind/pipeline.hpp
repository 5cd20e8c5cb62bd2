#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "flowbind/geom.hpp"

namespace flowbind {

struct DomainAnnotation {
  // Inclusive residue-number ranges, one per domain.
  std::vector<std::pair<int, int>> ranges;
  int source_chain = 0;
};

// One output chain per annotated domain; residues outside every range are dropped.
Complex split_domains(const Complex& c, const std::vector<DomainAnnotation>& annotations);

inline constexpr double kDimerContactDistance = 10.0;
inline constexpr int kDimerMinContacts = 4;

// Pairs (i, j), i < j, where each chain has at least `min_contacts` residues
// within `contact_dist` (CA-CA) of the other.
std::vector<std::pair<std::size_t, std::size_t>> extract_dimers(const Complex& c,
                                                                double contact_dist = kDimerContactDistance,
                                                                int min_contacts = kDimerMinContacts);

struct CropConfig {
  int max_binder = 250;
  double spatial_cutoff = 15.0;
  int min_target = 50;
  int max_total = 500;
  double interface_cutoff = 8.0;
};

struct CropResult {
  PointChain binder;
  std::vector<PointChain> target_chains;
  std::size_t seed_index = 0;
  // Chain index of the binder in the input complex.
  std::size_t binder_chain = 0;
  // Set when fewer than min_target target residues could be kept.
  bool min_target_unmet = false;

  std::size_t target_residues() const;
  std::size_t total_residues() const { return binder.size() + target_residues(); }
  Complex as_complex() const;
};

class NoInterfaceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

CropResult crop_complex(const Complex& c, std::uint64_t rng_seed, const CropConfig& cfg = {});

}  // namespace flowbind
