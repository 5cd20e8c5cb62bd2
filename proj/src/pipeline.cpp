#include "flowbind/pipeline.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace flowbind {

namespace {

PointChain subset(const PointChain& c, const std::vector<std::size_t>& idx, int chain_id) {
  PointChain out;
  out.chain_id = chain_id;
  out.coords.resize(static_cast<Eigen::Index>(idx.size()), 3);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.coords.row(static_cast<Eigen::Index>(k)) = c.coords.row(static_cast<Eigen::Index>(idx[k]));
    out.residue_ids.push_back(c.residue_ids[idx[k]]);
  }
  return out;
}

const PointChain* find_chain(const Complex& c, int chain_id) {
  for (const auto& ch : c.chains)
    if (ch.chain_id == chain_id) return &ch;
  return nullptr;
}

}  // namespace

Complex split_domains(const Complex& c, const std::vector<DomainAnnotation>& annotations) {
  Complex out;
  int next_id = 'A';
  for (const auto& ann : annotations) {
    const PointChain* src = find_chain(c, ann.source_chain);
    if (!src) throw ArgumentError("split_domains: unknown source chain " + std::to_string(ann.source_chain));
    if (src->size() == 0) throw ArgumentError("split_domains: empty source chain");
    const int lo = src->residue_ids.front();
    const int hi = src->residue_ids.back();
    std::vector<std::pair<int, int>> sorted = ann.ranges;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      const auto [s, e] = sorted[k];
      if (s > e) throw ArgumentError("split_domains: range start exceeds end");
      if (s < lo || e > hi)
        throw ArgumentError("split_domains: range [" + std::to_string(s) + ", " + std::to_string(e) +
                            "] outside chain residues [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      if (k > 0 && s <= sorted[k - 1].second) throw ArgumentError("split_domains: overlapping ranges");
    }
    for (const auto& [s, e] : ann.ranges) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < src->size(); ++i)
        if (src->residue_ids[i] >= s && src->residue_ids[i] <= e) idx.push_back(i);
      if (idx.empty()) continue;
      out.chains.push_back(subset(*src, idx, next_id++));
    }
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> extract_dimers(const Complex& c, double contact_dist,
                                                                int min_contacts) {
  if (!(contact_dist > 0.0)) throw ArgumentError("extract_dimers: contact distance must be positive");
  if (min_contacts < 1) throw ArgumentError("extract_dimers: min_contacts must be >= 1");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const std::size_t n = c.chains.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto sets = interface_residues(c.chains[i], c.chains[j], contact_dist);
      if (static_cast<int>(sets.a.size()) >= min_contacts && static_cast<int>(sets.b.size()) >= min_contacts)
        out.emplace_back(i, j);
    }
  return out;
}

std::size_t CropResult::target_residues() const {
  std::size_t n = 0;
  for (const auto& t : target_chains) n += t.size();
  return n;
}

Complex CropResult::as_complex() const {
  Complex c;
  c.chains.push_back(binder);
  for (const auto& t : target_chains) c.chains.push_back(t);
  c.binder_index = 0;
  return c;
}

namespace {

struct TargetResidue {
  std::size_t chain;
  std::size_t index;
  double distance;  // to the cropped binder subsequence
};

struct Stretch {
  std::size_t chain;
  std::size_t first;  // inclusive residue index
  std::size_t last;
  double min_distance;
};

}  // namespace

CropResult crop_complex(const Complex& c, std::uint64_t rng_seed, const CropConfig& cfg) {
  if (c.chains.size() < 2) throw ArgumentError("crop_complex: need at least two chains");
  if (cfg.max_binder < 1 || cfg.max_total < 1 || cfg.min_target < 0 || !(cfg.spatial_cutoff > 0.0) ||
      !(cfg.interface_cutoff > 0.0))
    throw ArgumentError("crop_complex: invalid configuration");

  // Stage 1: binder seed among interface residues of all chains.
  std::vector<std::pair<std::size_t, std::size_t>> seeds;
  for (std::size_t i = 0; i < c.chains.size(); ++i) {
    std::vector<char> any(c.chains[i].size(), 0);
    for (std::size_t j = 0; j < c.chains.size(); ++j) {
      if (i == j) continue;
      const auto hit = within_cutoff(c.chains[i].coords, c.chains[j].coords, cfg.interface_cutoff);
      for (std::size_t k = 0; k < hit.size(); ++k) any[k] |= hit[k];
    }
    for (std::size_t k = 0; k < any.size(); ++k)
      if (any[k]) seeds.emplace_back(i, k);
  }
  if (seeds.empty()) throw NoInterfaceError("crop_complex: no interface residues within cutoff");

  std::mt19937_64 rng(rng_seed);
  const auto [binder_chain, seed] =
      seeds[std::uniform_int_distribution<std::size_t>(0, seeds.size() - 1)(rng)];
  const PointChain& bchain = c.chains[binder_chain];

  std::size_t target_total = 0;
  for (std::size_t i = 0; i < c.chains.size(); ++i)
    if (i != binder_chain) target_total += c.chains[i].size();
  const std::size_t reserve = std::min<std::size_t>(static_cast<std::size_t>(cfg.min_target), target_total);

  // Stage 2: contiguous binder window containing the seed.
  const std::size_t len_cap = std::max<std::size_t>(
      1, std::min({static_cast<std::size_t>(cfg.max_binder), bchain.size(),
                   static_cast<std::size_t>(cfg.max_total) > reserve
                       ? static_cast<std::size_t>(cfg.max_total) - reserve
                       : std::size_t{1}}));
  const std::size_t len = std::uniform_int_distribution<std::size_t>(1, len_cap)(rng);
  const std::size_t lo_start = seed + 1 >= len ? seed + 1 - len : 0;
  const std::size_t hi_start = std::min(seed, bchain.size() - len);
  const std::size_t start = std::uniform_int_distribution<std::size_t>(lo_start, hi_start)(rng);

  std::vector<std::size_t> bidx(len);
  std::iota(bidx.begin(), bidx.end(), start);
  CropResult out;
  out.binder = subset(bchain, bidx, bchain.chain_id);
  out.seed_index = seed - start;
  out.binder_chain = binder_chain;

  // Stage 3: spatial crop, then contiguous stretches within the budget.
  const std::size_t budget = static_cast<std::size_t>(cfg.max_total) - len;
  std::vector<TargetResidue> all;
  for (std::size_t i = 0; i < c.chains.size(); ++i) {
    if (i == binder_chain) continue;
    const auto d = nearest_distances(c.chains[i].coords, out.binder.coords);
    for (std::size_t k = 0; k < d.size(); ++k) all.push_back({i, k, d[k]});
  }

  std::vector<std::vector<char>> candidate(c.chains.size());
  for (std::size_t i = 0; i < c.chains.size(); ++i) candidate[i].assign(c.chains[i].size(), 0);
  std::size_t n_candidates = 0;
  for (const auto& r : all)
    if (r.distance <= cfg.spatial_cutoff) {
      candidate[r.chain][r.index] = 1;
      ++n_candidates;
    }
  if (n_candidates < reserve) {
    // Top up with the nearest residues beyond the spatial cutoff.
    std::vector<TargetResidue> rest;
    for (const auto& r : all)
      if (!candidate[r.chain][r.index]) rest.push_back(r);
    std::stable_sort(rest.begin(), rest.end(),
                     [](const TargetResidue& a, const TargetResidue& b) { return a.distance < b.distance; });
    for (std::size_t k = 0; k < rest.size() && n_candidates < reserve; ++k) {
      candidate[rest[k].chain][rest[k].index] = 1;
      ++n_candidates;
    }
  }
  out.min_target_unmet = target_total < static_cast<std::size_t>(cfg.min_target);

  // Maximal contiguous runs of candidates, ranked by proximity.
  std::vector<std::vector<double>> dist(c.chains.size());
  for (std::size_t i = 0; i < c.chains.size(); ++i) dist[i].assign(c.chains[i].size(), 0.0);
  for (const auto& r : all) dist[r.chain][r.index] = r.distance;
  std::vector<Stretch> stretches;
  for (std::size_t i = 0; i < c.chains.size(); ++i) {
    if (i == binder_chain) continue;
    std::size_t k = 0;
    while (k < candidate[i].size()) {
      if (!candidate[i][k]) {
        ++k;
        continue;
      }
      Stretch s{i, k, k, std::numeric_limits<double>::infinity()};
      while (k < candidate[i].size() && candidate[i][k]) {
        s.last = k;
        s.min_distance = std::min(s.min_distance, dist[i][k]);
        ++k;
      }
      stretches.push_back(s);
    }
  }
  std::stable_sort(stretches.begin(), stretches.end(),
                   [](const Stretch& a, const Stretch& b) { return a.min_distance < b.min_distance; });

  std::vector<std::vector<char>> kept(c.chains.size());
  for (std::size_t i = 0; i < c.chains.size(); ++i) kept[i].assign(c.chains[i].size(), 0);
  std::size_t used = 0;
  for (Stretch s : stretches) {
    if (used >= budget) break;
    std::size_t n = s.last - s.first + 1;
    while (used + n > budget) {
      // Drop from whichever end lies farther from the binder.
      if (dist[s.chain][s.first] > dist[s.chain][s.last])
        ++s.first;
      else
        --s.last;
      --n;
    }
    for (std::size_t k = s.first; k <= s.last; ++k) kept[s.chain][k] = 1;
    used += n;
  }
  if (used < static_cast<std::size_t>(cfg.min_target)) out.min_target_unmet = true;

  for (std::size_t i = 0; i < c.chains.size(); ++i) {
    if (i == binder_chain) continue;
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < kept[i].size(); ++k)
      if (kept[i][k]) idx.push_back(k);
    if (!idx.empty()) out.target_chains.push_back(subset(c.chains[i], idx, c.chains[i].chain_id));
  }
  return out;
}

}  // namespace flowbind
