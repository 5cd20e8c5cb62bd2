#include "flowbind/mcts.hpp"

#include <cmath>
#include <limits>

namespace flowbind {

double ucb_score(const SearchNode& child, const SearchNode& parent, double exploration) {
  if (child.visits < 1 || parent.visits < 1) throw ContractError("ucb_score: visit counts must be >= 1");
  return child.cumulative_reward / child.visits +
         exploration * std::sqrt(std::log(static_cast<double>(parent.visits)) / child.visits);
}

SearchResult mcts_search(const SearchProblem& p, const SearchConfig& cfg, StreamKey key, MctsTree* out_tree) {
  p.validate();
  cfg.validate();
  const int total = p.schedule.steps();
  const int k = cfg.block_steps;
  SearchResult res;
  MctsTree tree;
  SearchNode root;
  root.state = initial_state(key.child("root"), p.binder_length, p.model->field().latent_dim(), p.c_d);
  tree.nodes.push_back(root);
  tree.committed.push_back(0);

  std::uint64_t used = 0;
  int cur = 0;
  int phase = 0;
  bool stop = false;
  while (!stop && tree.nodes[static_cast<std::size_t>(cur)].state.step < total) {
    for (int sim = 0; sim < cfg.mcts.simulations; ++sim) {
      const auto worst = static_cast<std::uint64_t>(total - tree.nodes[static_cast<std::size_t>(cur)].state.step);
      if (cfg.max_evaluations && used + worst > cfg.max_evaluations) {
        res.truncated = true;
        stop = true;
        break;
      }
      Random rng(key.derive("mcts", static_cast<std::uint64_t>(phase), static_cast<std::uint64_t>(sim)));
      // Back up through the committed ancestors as well, so every node's
      // visits cover the visits of its children.
      std::vector<int> path = tree.committed;
      int node = cur;
      while (tree.nodes[static_cast<std::size_t>(node)].state.step < total) {
        SearchNode& n = tree.nodes[static_cast<std::size_t>(node)];
        const bool forced = n.children.empty() || n.state.step + k >= total;
        const double u = rng.uniform();
        const bool expand = forced || u < cfg.mcts.epsilon;
        if (forced) {
          ++n.forced_expansions;
        } else {
          ++n.free_decisions;
          if (expand) ++n.free_expansions;
        }
        int next;
        if (expand) {
          SearchNode child;
          next = static_cast<int>(tree.nodes.size());
          child.parent = node;
          NoisyState st = n.state;
          st.rng_key = key.derive("node", static_cast<std::uint64_t>(next));
          const int block = std::min(k, total - st.step);
          child.state = advance(std::move(st), *p.model, *p.context, p.schedule, p.sampler, block);
          used += static_cast<std::uint64_t>(block);
          n.children.push_back(next);
          tree.nodes.push_back(std::move(child));
        } else {
          const SearchNode& parent = tree.nodes[static_cast<std::size_t>(node)];
          double best = -std::numeric_limits<double>::infinity();
          next = parent.children.front();
          for (int c : parent.children) {
            const double s = ucb_score(tree.nodes[static_cast<std::size_t>(c)], parent, cfg.mcts.exploration);
            if (s > best) {
              best = s;
              next = c;
            }
          }
        }
        path.push_back(next);
        node = next;
      }

      ScoredSample s;
      s.sample = p.decode_state(tree.nodes[static_cast<std::size_t>(node)].state);
      s.reward = p.score(s.sample);
      double r = s.reward.total;
      if (!std::isfinite(r)) {
        res.dropped.push_back({phase, sim});
        r = 0.0;
      } else {
        s.passed = p.criterion.passes(s.reward.raw);
        if (s.passed) res.successes.add({s.sample, s.reward, {"mcts", 0, phase, sim, "simulation"}, used});
        res.evaluated.push_back(s);
      }
      for (int id : path) {
        SearchNode& n = tree.nodes[static_cast<std::size_t>(id)];
        ++n.visits;
        n.cumulative_reward += r;
      }
    }
    const SearchNode& c = tree.nodes[static_cast<std::size_t>(cur)];
    if (c.children.empty()) break;
    int best = c.children.front();
    for (int id : c.children)
      if (tree.nodes[static_cast<std::size_t>(id)].mean_reward() > tree.nodes[static_cast<std::size_t>(best)].mean_reward())
        best = id;
    cur = best;
    tree.committed.push_back(cur);
    ++phase;
  }

  const SearchNode& last = tree.nodes[static_cast<std::size_t>(cur)];
  if (last.state.step >= total) {
    ScoredSample s;
    s.sample = p.decode_state(last.state);
    s.reward = p.score(s.sample);
    s.passed = std::isfinite(s.reward.total) && p.criterion.passes(s.reward.raw);
    res.finals.push_back(s);
  }
  res.evaluations = used;
  if (out_tree) *out_tree = std::move(tree);
  return res;
}

}  // namespace flowbind
