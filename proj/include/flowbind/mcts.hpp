#pragma once

#include <vector>

#include "flowbind/search.hpp"

namespace flowbind {

struct SearchNode {
  NoisyState state;
  int visits = 0;
  double cumulative_reward = 0.0;
  std::vector<int> children;
  int parent = -1;
  // Decision bookkeeping: a decision is forced (always expands) when the
  // node has no children or its next block reaches t = 1.
  int forced_expansions = 0;
  int free_decisions = 0;
  int free_expansions = 0;

  double mean_reward() const { return visits > 0 ? cumulative_reward / visits : 0.0; }
};

// mean reward + C sqrt(ln V(parent) / V(child)).
double ucb_score(const SearchNode& child, const SearchNode& parent, double exploration);

struct MctsTree {
  std::vector<SearchNode> nodes;  // nodes[0] is the root
  std::vector<int> committed;     // committed node ids, root first
};

SearchResult mcts_search(const SearchProblem& p, const SearchConfig& cfg, StreamKey key, MctsTree* tree = nullptr);

}  // namespace flowbind
