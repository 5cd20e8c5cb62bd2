#include "flowbind/search.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

namespace flowbind {

void SearchConfig::validate() const {
  if (beam_width < 1 || branch_factor < 1 || block_steps < 1 || mcts.simulations < 1)
    throw ConfigError("search: beam_width, branch_factor, block_steps and simulations must be >= 1");
  if (!(mcts.epsilon >= 0.0 && mcts.epsilon <= 1.0)) throw ConfigError("search: epsilon must lie in [0, 1]");
  if (!(inverse_temperature >= 0.0) || !std::isfinite(inverse_temperature))
    throw ConfigError("search: inverse_temperature must be finite and >= 0");
  if (!(mcts.exploration >= 0.0) || !std::isfinite(mcts.exploration))
    throw ConfigError("search: exploration must be finite and >= 0");
}

bool Predicate::operator()(const RewardComponents& raw) const {
  auto it = raw.find(component);
  if (it == raw.end()) throw ConfigError("success criterion: unknown component '" + component + "'");
  const double v = it->second;
  if (!std::isfinite(v)) return false;
  if (op == "<") return v < threshold;
  if (op == "<=") return v <= threshold;
  if (op == ">") return v > threshold;
  if (op == ">=") return v >= threshold;
  throw ConfigError("success criterion: unknown operator '" + op + "'");
}

bool SuccessCriterion::passes(const RewardComponents& raw) const {
  for (const auto& p : predicates)
    if (!p(raw)) return false;
  return true;
}

SuccessCriterion SuccessCriterion::never() {
  SuccessCriterion c;
  c.predicates.push_back({"proxy_ipae", "<", -1.0});
  return c;
}

void SuccessSet::add(SuccessRecord r) { records_.push_back(std::move(r)); }

void SuccessSet::merge(const SuccessSet& other) {
  records_.insert(records_.end(), other.records_.begin(), other.records_.end());
}

std::vector<SuccessRecord> SuccessSet::sorted() const {
  std::vector<SuccessRecord> out = records_;
  std::stable_sort(out.begin(), out.end(),
                   [](const SuccessRecord& a, const SuccessRecord& b) { return a.provenance.key() < b.provenance.key(); });
  return out;
}

void SearchProblem::validate() const {
  if (!model || !context) throw ArgumentError("search: model and context are required");
  if (!decode || !score) throw ArgumentError("search: decode and score functions are required");
  if (binder_length < 1) throw ArgumentError("search: binder length must be >= 1");
}

Sample SearchProblem::decode_state(const NoisyState& s) const {
  Sample out;
  out.state = s.state;
  out.labels = decode(s.state.latents);
  return out;
}

std::vector<double> fks_weights(const std::vector<double>& rewards, double beta) {
  if (!(beta >= 0.0)) throw ArgumentError("fks_weights: beta must be >= 0");
  double m = -std::numeric_limits<double>::infinity();
  for (double r : rewards)
    if (std::isfinite(r)) m = std::max(m, r);
  std::vector<double> w(rewards.size(), 0.0);
  if (!std::isfinite(m)) return w;
  double total = 0.0;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    if (!std::isfinite(rewards[i])) continue;
    w[i] = beta == 0.0 ? 1.0 : std::exp(beta * (rewards[i] - m));
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

std::vector<int> top_n(const std::vector<double>& rewards, int n) {
  std::vector<int> idx;
  for (std::size_t i = 0; i < rewards.size(); ++i)
    if (std::isfinite(rewards[i])) idx.push_back(static_cast<int>(i));
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return rewards[static_cast<std::size_t>(a)] > rewards[static_cast<std::size_t>(b)];
  });
  if (static_cast<int>(idx.size()) > n) idx.resize(static_cast<std::size_t>(n));
  return idx;
}

std::uint64_t beam_evaluation_count(const SearchConfig& cfg, int total_steps) {
  std::uint64_t n = 0;
  const std::uint64_t width = static_cast<std::uint64_t>(cfg.beam_width) * static_cast<std::uint64_t>(cfg.branch_factor);
  for (int s = 0; s < total_steps; s += cfg.block_steps) n += width * static_cast<std::uint64_t>(total_steps - s);
  return n;
}

namespace {

ScoredSample finish(const SearchProblem& p, const NoisyState& s) {
  ScoredSample out;
  out.sample = p.decode_state(s);
  out.reward = p.score(out.sample);
  out.passed = std::isfinite(out.reward.total) && p.criterion.passes(out.reward.raw);
  return out;
}

// Runs body(i) for i in [0, n), optionally in parallel, and rethrows the
// failure with the lowest index.
template <typename Fn>
void for_each_candidate(int n, bool parallel, const char* what, int round, Fn&& body) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!errors[static_cast<std::size_t>(i)]) continue;
    try {
      std::rethrow_exception(errors[static_cast<std::size_t>(i)]);
    } catch (const NumericError& e) {
      throw NumericError(std::string(what) + " round " + std::to_string(round) + ", candidate " + std::to_string(i) +
                         ": " + e.what());
    }
  }
}

SearchResult beam_like(const SearchProblem& p, const SearchConfig& cfg, StreamKey key, bool resample,
                       const std::string& name) {
  p.validate();
  cfg.validate();
  const int total = p.schedule.steps();
  const int dz = p.model->field().latent_dim();
  const int width = cfg.beam_width * cfg.branch_factor;
  SearchResult res;

  std::vector<NoisyState> beam;
  for (int i = 0; i < cfg.beam_width; ++i)
    beam.push_back(initial_state(key.derive("init", static_cast<std::uint64_t>(i)), p.binder_length, dz, p.c_d));

  std::uint64_t used = 0;
  int round = 0;
  while (beam.front().step < total) {
    ++round;
    const int s0 = beam.front().step;
    const int block = std::min(cfg.block_steps, total - s0);
    const std::uint64_t cost = static_cast<std::uint64_t>(width) *
                               static_cast<std::uint64_t>(p.stub_reward ? block : total - s0);
    if (cfg.max_evaluations && used + cost > cfg.max_evaluations) {
      res.truncated = true;
      break;
    }

    std::vector<NoisyState> cand(static_cast<std::size_t>(width));
    std::vector<std::optional<ScoredSample>> scored(static_cast<std::size_t>(width));
    std::vector<double> rewards(static_cast<std::size_t>(width), std::numeric_limits<double>::quiet_NaN());
    for_each_candidate(width, cfg.parallel, name.c_str(), round, [&](int c) {
      const auto ci = static_cast<std::size_t>(c);
      NoisyState st = beam[static_cast<std::size_t>(c / cfg.branch_factor)];
      st.rng_key = key.derive("round", static_cast<std::uint64_t>(round), "cand", static_cast<std::uint64_t>(c));
      st = advance(std::move(st), *p.model, *p.context, p.schedule, p.sampler, block);
      cand[ci] = st;
      if (p.stub_reward) {
        rewards[ci] = p.stub_reward(round, c);
        return;
      }
      NoisyState roll = st;
      roll.rng_key = st.rng_key.child("rollout");
      roll = advance(std::move(roll), *p.model, *p.context, p.schedule, p.sampler, total - roll.step);
      scored[ci] = finish(p, roll);
      rewards[ci] = scored[ci]->reward.total;
    });
    used += cost;

    RoundLog log;
    log.round = round;
    log.rewards = rewards;
    for (int c = 0; c < width; ++c) {
      log.parents.push_back(c / cfg.branch_factor);
      const auto ci = static_cast<std::size_t>(c);
      if (!std::isfinite(rewards[ci])) {
        res.dropped.push_back({round, c});
        continue;
      }
      if (!scored[ci]) continue;
      if (scored[ci]->passed)
        res.successes.add({scored[ci]->sample, scored[ci]->reward, {name, 0, round, c, "rollout"}, used});
      res.evaluated.push_back(*scored[ci]);
    }

    std::vector<int> next;
    if (resample) {
      const std::vector<double> w = fks_weights(rewards, cfg.inverse_temperature);
      if (std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; }))
        throw SteeringCollapseError(name + ": every candidate reward in round " + std::to_string(round) +
                                    " is non-finite");
      Random rng(key.derive("resample", static_cast<std::uint64_t>(round)));
      for (int i = 0; i < cfg.beam_width; ++i) {
        // Inverse-CDF draw from one uniform keeps the stream layout explicit.
        const double u = rng.uniform();
        double acc = 0.0;
        int chosen = width - 1;
        for (int c = 0; c < width; ++c) {
          acc += w[static_cast<std::size_t>(c)];
          if (u < acc && w[static_cast<std::size_t>(c)] > 0.0) {
            chosen = c;
            break;
          }
        }
        while (w[static_cast<std::size_t>(chosen)] == 0.0) --chosen;
        next.push_back(chosen);
      }
    } else {
      next = top_n(rewards, cfg.beam_width);
      if (static_cast<int>(next.size()) < cfg.beam_width)
        throw NumericError(name + ": fewer than beam_width finite rewards in round " + std::to_string(round));
    }
    log.survivors = next;
    res.rounds.push_back(std::move(log));

    std::vector<NoisyState> nb;
    for (int c : next) nb.push_back(cand[static_cast<std::size_t>(c)]);
    // The last block ends at t = 1, so the survivors are already scored samples.
    if (nb.front().step >= total && !p.stub_reward)
      for (int c : next) res.finals.push_back(*scored[static_cast<std::size_t>(c)]);
    beam = std::move(nb);
  }
  res.evaluations = used;
  return res;
}

}  // namespace

SearchResult beam_search(const SearchProblem& p, const SearchConfig& cfg, StreamKey key) {
  return beam_like(p, cfg, key, false, "beam");
}

SearchResult fk_steering(const SearchProblem& p, const SearchConfig& cfg, StreamKey key) {
  return beam_like(p, cfg, key, true, "fks");
}

SearchResult best_of_n(const SearchProblem& p, int n, StreamKey key, const SearchConfig& cfg) {
  if (n < 0) throw ArgumentError("best_of_n: n must be >= 0");
  p.validate();
  const int total = p.schedule.steps();
  const int dz = p.model->field().latent_dim();
  SearchResult res;
  int count = n;
  if (cfg.max_evaluations) {
    const auto fit = static_cast<int>(std::min<std::uint64_t>(static_cast<std::uint64_t>(n),
                                                              cfg.max_evaluations / static_cast<std::uint64_t>(total)));
    if (fit < n) res.truncated = true;
    count = fit;
  }
  std::vector<ScoredSample> out(static_cast<std::size_t>(count));
  for_each_candidate(count, cfg.parallel, "bon", 0, [&](int i) {
    NoisyState s = initial_state(key.derive("bon", static_cast<std::uint64_t>(i)), p.binder_length, dz, p.c_d);
    s = advance(std::move(s), *p.model, *p.context, p.schedule, p.sampler, total);
    out[static_cast<std::size_t>(i)] = finish(p, s);
  });
  for (int i = 0; i < count; ++i) {
    ScoredSample& s = out[static_cast<std::size_t>(i)];
    const std::uint64_t at = static_cast<std::uint64_t>(i + 1) * static_cast<std::uint64_t>(total);
    if (!std::isfinite(s.reward.total)) {
      res.dropped.push_back({0, i});
      continue;
    }
    if (s.passed) res.successes.add({s.sample, s.reward, {"bon", 0, 0, i, "sample"}, at});
    res.finals.push_back(s);
    res.evaluated.push_back(s);
  }
  res.evaluations = static_cast<std::uint64_t>(count) * static_cast<std::uint64_t>(total);
  return res;
}

}  // namespace flowbind
