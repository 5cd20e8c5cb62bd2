#include "flowbind/refine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace flowbind {

int mutations_per_iteration(std::size_t n) { return std::max<int>(1, static_cast<int>((n + 99) / 100)); }

RefineResult mutation_refine(const Sample& start, const std::function<double(const Sample&)>& reward, int iterations,
                             StreamKey key, int alphabet) {
  if (iterations < 0) throw ArgumentError("mutation_refine: iterations must be >= 0");
  if (alphabet < 2) throw ArgumentError("mutation_refine: alphabet needs at least two labels");
  if (start.labels.empty()) throw ArgumentError("mutation_refine: sample has no labels");
  RefineResult out;
  out.sample = start;
  out.mutations_per_iteration = mutations_per_iteration(start.labels.size());
  double best = reward(out.sample);
  out.trace.push_back(best);
  std::vector<std::size_t> order(start.labels.size());
  for (int it = 0; it < iterations; ++it) {
    Random rng(key.child(static_cast<std::uint64_t>(it)));
    std::iota(order.begin(), order.end(), std::size_t{0});
    Sample trial = out.sample;
    for (int m = 0; m < out.mutations_per_iteration; ++m) {
      const std::size_t j = static_cast<std::size_t>(m) + rng.index(order.size() - static_cast<std::size_t>(m));
      std::swap(order[static_cast<std::size_t>(m)], order[j]);
      int& label = trial.labels[order[static_cast<std::size_t>(m)]];
      const int shift = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(alphabet - 1)));
      label = (label + shift) % alphabet;
    }
    const double r = reward(trial);
    if (std::isfinite(r) && r > best) {
      best = r;
      out.sample = std::move(trial);
      ++out.accepted;
    }
    out.trace.push_back(best);
  }
  return out;
}

}  // namespace flowbind
