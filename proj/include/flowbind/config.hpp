#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>

#include <json.hpp>

#include "flowbind/mcts.hpp"
#include "flowbind/toytask.hpp"
#include "flowbind/train.hpp"

namespace flowbind {

struct TaskSettings {
  std::string preset = "hard";  // hard | ablation | custom
  TaskSpec spec = hard_task();
  int site = 0;                           // flagged hotspot site used for search
  Vec3 target_shift = Vec3::Zero();       // applied to the target at sampling time
};

struct ModelSettings {
  std::string kind = "analytic";  // analytic | mlp
  std::string checkpoint;         // mlp: load instead of training when set
  MlpArchitecture arch;
  double init_scale = 1.0;
  // analytic: keep only the components of task.site instead of all sites.
  bool site_conditioned = false;
};

struct TrainSettings {
  TrainConfig cfg;
  int dataset_size = 2000;
};

struct FlowSettings {
  ScheduleSpec schedule;
  SamplerSettings sampler;
  double c_d = kDefaultTranslationStd;
};

struct SearchSettings {
  std::string algorithm = "beam";  // bon | beam | fks | mcts | refine
  SearchConfig cfg;
  int samples = 16;            // best-of-n sample count per run; refine start count
  int refine_iterations = 50;
  // Independent runs, stopped early by the budget; 0 repeats until the
  // budget is spent.
  int repeats = 1;
};

struct OutputSettings {
  bool write_pdb = false;
  double cluster_threshold = kDefaultClusterThreshold;
};

struct Config {
  std::uint64_t seed = 0;
  TaskSettings task;
  ModelSettings model;
  TrainSettings train;
  FlowSettings flow;
  SearchSettings search;
  RewardSpec reward = RewardSpec::ipae_only();
  SuccessCriterion success;
  std::uint64_t budget = 0;  // total forward calls across repeats; 0 = unlimited
  OutputSettings output;

  void validate() const;
};

// Strict parse: unknown keys and wrong types raise ConfigError naming the
// offending field path.
Config parse_config(const nlohmann::json& j);
Config load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const Config& c);

// Every accepted key, by dotted object path ("" is the top level).
std::map<std::string, std::set<std::string>> config_keys();

ScheduleKind parse_schedule_kind(const std::string& s);
std::string schedule_kind_name(ScheduleKind k);

}  // namespace flowbind
