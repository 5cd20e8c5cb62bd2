#pragma once

#include <functional>
#include <vector>

#include "flowbind/types.hpp"

namespace flowbind {

struct RefineResult {
  Sample sample;
  std::vector<double> trace;  // reward before the first and after every iteration
  int mutations_per_iteration = 0;
  int accepted = 0;
};

// ceil(0.01 * n), at least one.
int mutations_per_iteration(std::size_t binder_length);

// Improve-only label mutation: each iteration proposes changes at distinct
// uniformly chosen positions and keeps them only if the reward strictly rises.
RefineResult mutation_refine(const Sample& start, const std::function<double(const Sample&)>& reward, int iterations,
                             StreamKey key, int alphabet = 4);

}  // namespace flowbind
