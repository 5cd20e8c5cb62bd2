#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "flowbind/flow.hpp"
#include "flowbind/reward.hpp"

namespace flowbind {

struct MctsConfig {
  double epsilon = 0.5;
  double exploration = 1.0;
  int simulations = 20;
};

struct SearchConfig {
  int beam_width = 4;
  int branch_factor = 4;
  int block_steps = 100;
  double inverse_temperature = 10.0;
  MctsConfig mcts;
  // Forward-call cap for one call of an algorithm; 0 means unlimited. A
  // round that would exceed it is not started.
  std::uint64_t max_evaluations = 0;
  // Evaluate candidates of a round concurrently.
  bool parallel = true;

  void validate() const;
};

struct Predicate {
  std::string component;
  std::string op;  // < <= > >=
  double threshold = 0.0;

  bool operator()(const RewardComponents& raw) const;
};

struct SuccessCriterion {
  std::vector<Predicate> predicates;

  bool passes(const RewardComponents& raw) const;
  static SuccessCriterion never();
};

struct Provenance {
  std::string algorithm;
  int run = 0;
  int round = 0;
  int candidate = 0;
  std::string stage;  // rollout | final | sample | simulation | refined

  auto key() const { return std::tie(algorithm, run, round, candidate, stage); }
};

struct SuccessRecord {
  Sample sample;
  RewardBreakdown reward;
  Provenance provenance;
  std::uint64_t evaluations_at = 0;  // forward calls consumed when found
};

class SuccessSet {
 public:
  void add(SuccessRecord r);
  void merge(const SuccessSet& other);
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  // Records sorted by provenance, independent of insertion order.
  std::vector<SuccessRecord> sorted() const;
  const std::vector<SuccessRecord>& records() const { return records_; }

 private:
  std::vector<SuccessRecord> records_;
};

// Everything an algorithm needs to turn noisy states into scored samples.
struct SearchProblem {
  const Model* model = nullptr;
  const TargetContext* context = nullptr;
  Schedule schedule;
  SamplerSettings sampler;
  std::size_t binder_length = 1;
  double c_d = kDefaultTranslationStd;
  std::function<std::vector<int>(const Matrix& latents)> decode;
  std::function<RewardBreakdown(const Sample&)> score;
  SuccessCriterion criterion;
  // Test hook: when set, candidate rewards come from this function of
  // (round, candidate id) and no rollouts are simulated.
  std::function<double(int round, int candidate)> stub_reward;

  void validate() const;
  Sample decode_state(const NoisyState& s) const;
};

struct DroppedCandidate {
  int round;
  int candidate;
};

// Per-round bookkeeping of the beam-type algorithms.
struct RoundLog {
  int round = 0;
  std::vector<double> rewards;  // indexed by candidate id
  std::vector<int> parents;     // beam index each candidate branched from
  std::vector<int> survivors;   // candidate ids forming the next beam
};

struct ScoredSample {
  Sample sample;
  RewardBreakdown reward;
  bool passed = false;
};

struct SearchResult {
  SuccessSet successes;
  std::vector<ScoredSample> finals;
  std::vector<ScoredSample> evaluated;  // every decoded sample, in provenance order
  std::vector<RoundLog> rounds;
  std::vector<DroppedCandidate> dropped;
  std::uint64_t evaluations = 0;
  bool truncated = false;
};

class SteeringCollapseError : public NumericError {
 public:
  using NumericError::NumericError;
};

SearchResult best_of_n(const SearchProblem& p, int n, StreamKey key, const SearchConfig& cfg = {});
SearchResult beam_search(const SearchProblem& p, const SearchConfig& cfg, StreamKey key);
SearchResult fk_steering(const SearchProblem& p, const SearchConfig& cfg, StreamKey key);

// Resampling probabilities exp(beta R_i) / sum_j exp(beta R_j), computed
// with the maximum subtracted. Non-finite rewards get probability 0.
std::vector<double> fks_weights(const std::vector<double>& rewards, double beta);

// Indices of the `n` largest finite rewards, ties broken by lower index.
std::vector<int> top_n(const std::vector<double>& rewards, int n);

// Forward calls of one beam or FKS run (rollouts included).
std::uint64_t beam_evaluation_count(const SearchConfig& cfg, int total_steps);

}  // namespace flowbind
