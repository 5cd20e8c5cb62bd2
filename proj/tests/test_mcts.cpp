#include <doctest.h>

#include <cmath>

#include "flowbind/mcts.hpp"
#include "helpers.hpp"
#include "search_fixture.hpp"

using namespace flowbind;
using namespace testutil;

TEST_CASE("ucb score") {
  SearchNode parent, child;
  parent.visits = 10;
  child.visits = 4;
  child.cumulative_reward = 2.0;
  CHECK(ucb_score(child, parent, 1.5) == doctest::Approx(0.5 + 1.5 * std::sqrt(std::log(10.0) / 4.0)));
  CHECK(ucb_score(child, parent, 0.0) == doctest::Approx(0.5));
  child.visits = 0;
  CHECK_THROWS_AS(ucb_score(child, parent, 1.0), ContractError);
  child.visits = 1;
  parent.visits = 0;
  CHECK_THROWS_AS(ucb_score(child, parent, 1.0), ContractError);
}

namespace {

void check_tree(const MctsTree& t) {
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    const SearchNode& n = t.nodes[i];
    int child_visits = 0;
    for (int c : n.children) {
      CHECK(t.nodes[static_cast<std::size_t>(c)].parent == static_cast<int>(i));
      child_visits += t.nodes[static_cast<std::size_t>(c)].visits;
    }
    CHECK(n.visits >= child_visits);
  }
}

}  // namespace

TEST_CASE("tree invariants and accounting") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    LinearProblem lp(0.0, 1.0, 12);
    lp.problem.sampler = SamplerSettings{1.0, 1.0, true};
    SearchConfig cfg;
    cfg.block_steps = 3;
    cfg.mcts.simulations = 8;
    MctsTree tree;
    const SearchResult r = mcts_search(lp.problem, cfg, StreamKey{seed}, &tree);
    check_tree(tree);
    CHECK(r.evaluations == lp.model.forward_calls());
    // Every simulation from the committed root of a phase reaches t = 1.
    CHECK(r.finals.size() == 1);
    CHECK(tree.committed.front() == 0);
    for (std::size_t i = 1; i < tree.committed.size(); ++i)
      CHECK(tree.nodes[static_cast<std::size_t>(tree.committed[i])].parent == tree.committed[i - 1]);
    CHECK(tree.nodes[static_cast<std::size_t>(tree.committed.back())].state.step == 12);
    CHECK(r.evaluated.size() + r.dropped.size() == static_cast<std::size_t>(8 * (tree.committed.size() - 1)));
  }
}

TEST_CASE("free expansion rate follows epsilon") {
  for (double eps : {0.0, 0.3, 1.0}) {
    long decisions = 0, expansions = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      LinearProblem lp(0.0, 1.0, 20);
      SearchConfig cfg;
      cfg.block_steps = 2;
      cfg.mcts.simulations = 10;
      cfg.mcts.epsilon = eps;
      MctsTree tree;
      mcts_search(lp.problem, cfg, StreamKey{seed}, &tree);
      for (const auto& n : tree.nodes) {
        decisions += n.free_decisions;
        expansions += n.free_expansions;
      }
    }
    REQUIRE(decisions > 100);
    const double rate = static_cast<double>(expansions) / static_cast<double>(decisions);
    if (eps == 0.0 || eps == 1.0)
      CHECK(rate == eps);
    else
      CHECK(std::abs(rate - eps) < 4 * std::sqrt(eps * (1 - eps) / static_cast<double>(decisions)));
  }
}

TEST_CASE("budget stops the search") {
  LinearProblem lp(0.0, 1.0, 10);
  SearchConfig cfg;
  cfg.block_steps = 2;
  cfg.mcts.simulations = 5;
  cfg.max_evaluations = 25;
  const SearchResult r = mcts_search(lp.problem, cfg, StreamKey{1});
  CHECK(r.truncated);
  CHECK(r.evaluations <= 25);
  CHECK(lp.model.forward_calls() == r.evaluations);
}
