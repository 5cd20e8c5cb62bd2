#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "flowbind/search.hpp"
#include "helpers.hpp"
#include "search_fixture.hpp"

using namespace flowbind;
using namespace testutil;

namespace {
const double kNaN = std::numeric_limits<double>::quiet_NaN();
}

TEST_CASE("resampling weights") {
  const std::vector<double> r = {0.3, -1.0, 2.0, 7.5};
  const auto u = fks_weights(r, 0.0);
  for (double w : u) CHECK(w == 0.25);
  const auto two = fks_weights({0.0, std::log(2.0)}, 1.0);
  CHECK(two[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(two[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  // Softmax oracle, with huge rewards that would overflow without the shift.
  const std::vector<double> big = {1000.0, 1001.0, 999.5};
  const auto w = fks_weights(big, 2.0);
  const double z = 1.0 + std::exp(2.0) + std::exp(-1.0);
  CHECK(w[0] == doctest::Approx(1.0 / z));
  CHECK(w[1] == doctest::Approx(std::exp(2.0) / z));
  CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0));
  const auto nan = fks_weights({kNaN, 1.0, INFINITY}, 1.0);
  CHECK(nan == std::vector<double>{0.0, 1.0, 0.0});
  CHECK(fks_weights({kNaN, kNaN}, 1.0) == std::vector<double>{0.0, 0.0});
  CHECK_THROWS_AS(fks_weights(r, -1.0), ArgumentError);
}

TEST_CASE("top_n") {
  CHECK(top_n({1, 5, 3, 5, kNaN, 4}, 3) == std::vector<int>{1, 3, 5});
  CHECK(top_n({1, 2}, 5) == std::vector<int>{1, 0});
  CHECK(top_n({kNaN}, 1).empty());
}

TEST_CASE("beam evaluation count") {
  SearchConfig c;
  c.beam_width = 4;
  c.branch_factor = 4;
  c.block_steps = 100;
  CHECK(beam_evaluation_count(c, 400) == 16 * (400 + 300 + 200 + 100));
  CHECK(beam_evaluation_count(c, 400) == 16000);
  c.block_steps = 50;
  CHECK(beam_evaluation_count(c, 400) == 28800);
  c.block_steps = 3;
  CHECK(beam_evaluation_count(c, 10) == 16 * (10 + 7 + 4 + 1));
}

TEST_CASE("predicates") {
  const RewardComponents raw = {{"a", 1.0}, {"b", kNaN}};
  CHECK(Predicate{"a", "<", 2.0}(raw));
  CHECK(!Predicate{"a", "<", 1.0}(raw));
  CHECK(Predicate{"a", "<=", 1.0}(raw));
  CHECK(Predicate{"a", ">=", 1.0}(raw));
  CHECK(!Predicate{"a", ">", 1.0}(raw));
  CHECK(!Predicate{"b", "<", 2.0}(raw));
  CHECK_THROWS_AS((Predicate{"c", "<", 2.0}(raw)), ConfigError);
  CHECK_THROWS_AS((Predicate{"a", "==", 2.0}(raw)), ConfigError);
  CHECK(!SuccessCriterion::never().passes({{"proxy_ipae", 0.0}}));
  CHECK(SuccessCriterion{}.passes(raw));
}

TEST_CASE("beam survivors equal exhaustive top-N on a reward stub") {
  Random rng(StreamKey{101});
  for (int trial = 0; trial < 100; ++trial) {
    LinearProblem lp(0.0, 1.0, 1 + static_cast<int>(rng.index(30)));
    SearchConfig cfg;
    cfg.beam_width = 1 + static_cast<int>(rng.index(5));
    cfg.branch_factor = 1 + static_cast<int>(rng.index(5));
    cfg.block_steps = 1 + static_cast<int>(rng.index(10));
    const std::uint64_t salt = rng.next_u64();
    lp.problem.stub_reward = [salt](int round, int cand) {
      // Coarse values force ties.
      Random r(StreamKey{salt}.derive(static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(cand)));
      return static_cast<double>(r.index(7));
    };
    const SearchResult res = beam_search(lp.problem, cfg, StreamKey{salt});
    const int width = cfg.beam_width * cfg.branch_factor;
    const int S = lp.problem.schedule.steps();
    CHECK(static_cast<int>(res.rounds.size()) == (S + cfg.block_steps - 1) / cfg.block_steps);
    for (const RoundLog& log : res.rounds) {
      REQUIRE(static_cast<int>(log.rewards.size()) == width);
      std::vector<int> all(static_cast<std::size_t>(width));
      std::iota(all.begin(), all.end(), 0);
      std::sort(all.begin(), all.end(), [&](int a, int b) {
        const double ra = log.rewards[static_cast<std::size_t>(a)], rb = log.rewards[static_cast<std::size_t>(b)];
        return ra != rb ? ra > rb : a < b;
      });
      all.resize(static_cast<std::size_t>(cfg.beam_width));
      CHECK(log.survivors == all);
      CHECK(static_cast<int>(log.survivors.size()) == cfg.beam_width);
      for (int c = 0; c < width; ++c) CHECK(log.parents[static_cast<std::size_t>(c)] == c / cfg.branch_factor);
    }
    CHECK(res.evaluations == static_cast<std::uint64_t>(width) * static_cast<std::uint64_t>(S));
    CHECK(lp.model.forward_calls() == res.evaluations);
  }
}

TEST_CASE("beam and steering forward calls match the analytic count") {
  for (int k : {1, 3, 7, 20}) {
    SearchConfig cfg;
    cfg.beam_width = 2;
    cfg.branch_factor = 3;
    cfg.block_steps = k;
    LinearProblem a(0.5, 0.5, 20), b(0.5, 0.5, 20);
    const SearchResult rb = beam_search(a.problem, cfg, StreamKey{7});
    CHECK(rb.evaluations == beam_evaluation_count(cfg, 20));
    CHECK(a.model.forward_calls() == rb.evaluations);
    CHECK(rb.finals.size() == 2);
    const SearchResult rf = fk_steering(b.problem, cfg, StreamKey{7});
    CHECK(rf.evaluations == beam_evaluation_count(cfg, 20));
    CHECK(b.model.forward_calls() == rf.evaluations);
    CHECK(rf.finals.size() == 2);
    // Each round decodes every candidate's rollout.
    CHECK(rb.evaluated.size() == rb.rounds.size() * 6);
  }
}

TEST_CASE("beam keeps the best rollouts and improves on sampling") {
  SearchConfig cfg;
  cfg.beam_width = 4;
  cfg.branch_factor = 4;
  cfg.block_steps = 5;
  LinearProblem lp(0.0, 1.0, 20);
  const SearchResult r = beam_search(lp.problem, cfg, StreamKey{8});
  double mean_final = 0.0;
  for (const auto& f : r.finals) mean_final += f.reward.total / 4;
  // Top 4 of 16 draws from N(0, 0.5^2) per round; the mean is well above zero.
  CHECK(mean_final > 0.3);
  const RoundLog& last = r.rounds.back();
  for (std::size_t i = 0; i < r.finals.size(); ++i)
    CHECK(r.finals[i].reward.total == last.rewards[static_cast<std::size_t>(last.survivors[i])]);
}

TEST_CASE("best of n") {
  LinearProblem lp(1.0, 0.5, 10);
  const SearchResult none = best_of_n(lp.problem, 0, StreamKey{1});
  CHECK(none.evaluations == 0);
  CHECK(none.successes.empty());
  CHECK(none.finals.empty());
  const SearchResult r = best_of_n(lp.problem, 25, StreamKey{1});
  CHECK(r.evaluations == 250);
  CHECK(lp.model.forward_calls() == 250);
  CHECK(r.finals.size() == 25);
  std::size_t passed = 0;
  for (const auto& f : r.finals) passed += f.passed;
  CHECK(r.successes.size() == passed);
  for (const auto& s : r.successes.records()) CHECK(s.evaluations_at == 10u * static_cast<std::uint64_t>(s.provenance.candidate + 1));
  CHECK_THROWS_AS(best_of_n(lp.problem, -1, StreamKey{1}), ArgumentError);
}

TEST_CASE("parallel and serial candidates give identical results") {
  SearchConfig cfg;
  cfg.block_steps = 4;
  for (bool fks : {false, true}) {
    LinearProblem a(0.2, 0.7, 12), b(0.2, 0.7, 12);
    a.problem.sampler = b.problem.sampler = SamplerSettings{1.0, 1.0, true};
    cfg.parallel = true;
    const SearchResult p = fks ? fk_steering(a.problem, cfg, StreamKey{3}) : beam_search(a.problem, cfg, StreamKey{3});
    cfg.parallel = false;
    const SearchResult s = fks ? fk_steering(b.problem, cfg, StreamKey{3}) : beam_search(b.problem, cfg, StreamKey{3});
    REQUIRE(p.rounds.size() == s.rounds.size());
    for (std::size_t i = 0; i < p.rounds.size(); ++i) {
      CHECK(p.rounds[i].rewards == s.rounds[i].rewards);
      CHECK(p.rounds[i].survivors == s.rounds[i].survivors);
    }
    CHECK(p.successes.size() == s.successes.size());
  }
}

TEST_CASE("budget truncation") {
  SearchConfig cfg;
  cfg.block_steps = 5;
  LinearProblem lp(0.0, 1.0, 20);
  cfg.max_evaluations = 100;  // first round alone costs 16 * 20
  const SearchResult r = beam_search(lp.problem, cfg, StreamKey{4});
  CHECK(r.truncated);
  CHECK(r.evaluations == 0);
  CHECK(lp.model.forward_calls() == 0);
  cfg.max_evaluations = 16 * 20 + 16 * 15;
  const SearchResult r2 = beam_search(lp.problem, cfg, StreamKey{4});
  CHECK(r2.truncated);
  CHECK(r2.rounds.size() == 2);
  CHECK(r2.evaluations == cfg.max_evaluations);
  CHECK(r2.finals.empty());
  cfg.max_evaluations = 75;
  const SearchResult b = best_of_n(lp.problem, 10, StreamKey{4}, cfg);
  CHECK(b.truncated);
  CHECK(b.finals.size() == 3);
}

TEST_CASE("non-finite rewards") {
  SearchConfig cfg;
  cfg.block_steps = 5;
  LinearProblem lp(0.0, 1.0, 10);
  lp.problem.score = [](const Sample&) { return RewardBreakdown{{{"lin", kNaN}}, kNaN}; };
  CHECK_THROWS_AS(fk_steering(lp.problem, cfg, StreamKey{5}), SteeringCollapseError);
  CHECK_THROWS_AS(beam_search(lp.problem, cfg, StreamKey{5}), NumericError);
  const SearchResult b = best_of_n(lp.problem, 4, StreamKey{5});
  CHECK(b.dropped.size() == 4);
  CHECK(b.finals.empty());

  // Some candidates dropped: they never survive.
  LinearProblem half(0.0, 1.0, 10);
  half.problem.stub_reward = [](int, int c) { return c % 2 ? kNaN : static_cast<double>(c); };
  const SearchResult f = fk_steering(half.problem, cfg, StreamKey{6});
  for (const auto& log : f.rounds)
    for (int s : log.survivors) CHECK(s % 2 == 0);
  CHECK(f.dropped.size() == f.rounds.size() * 8);
}

TEST_CASE("success set ordering is independent of insertion order") {
  SuccessSet a, b;
  std::vector<SuccessRecord> recs;
  for (int i = 0; i < 6; ++i) {
    SuccessRecord r;
    r.provenance = {"beam", i % 2, i / 2, 5 - i, "rollout"};
    recs.push_back(r);
  }
  for (const auto& r : recs) a.add(r);
  for (auto it = recs.rbegin(); it != recs.rend(); ++it) b.add(*it);
  const auto sa = a.sorted(), sb = b.sorted();
  for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sa[i].provenance.key() == sb[i].provenance.key());
  CHECK(sa.front().provenance.run == 0);
  SuccessSet c;
  c.merge(a);
  c.merge(b);
  CHECK(c.size() == 12);
}

TEST_CASE("config validation") {
  SearchConfig c;
  CHECK_NOTHROW(c.validate());
  c.beam_width = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SearchConfig{};
  c.mcts.epsilon = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SearchConfig{};
  c.inverse_temperature = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  LinearProblem lp(0.0, 1.0, 4);
  lp.problem.score = nullptr;
  CHECK_THROWS_AS(beam_search(lp.problem, SearchConfig{}, StreamKey{1}), ArgumentError);
}
