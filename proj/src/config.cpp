#include "flowbind/config.hpp"

#include <cstdint>
#include <fstream>
#include <type_traits>
#include <utility>

namespace flowbind {

using nlohmann::json;

namespace {

using Registry = std::map<std::string, std::set<std::string>>;

// json's get<int>() would silently truncate 2.5 and wrap -1; reject those.
template <typename T>
bool strict_type_ok(const json& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v.is_boolean();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) return false;
    if constexpr (std::is_unsigned_v<T>) return v.is_number_unsigned() || v.get<std::int64_t>() >= 0;
    return true;
  } else if constexpr (std::is_floating_point_v<T>) {
    return v.is_number();
  } else if constexpr (std::is_same_v<T, std::string>) {
    return v.is_string();
  } else {
    if (!v.is_array()) return false;
    for (const auto& e : v)
      if (!strict_type_ok<typename T::value_type>(e)) return false;
    return true;
  }
}

class Obj {
 public:
  Obj(const json* j, std::string path, Registry* reg) : j_(j), path_(std::move(path)), reg_(reg) {
    if (j_ && !j_->is_object()) throw ConfigError(where("") + "must be an object");
    if (reg_) (*reg_)[path_];
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    note(key);
    if (!j_ || !j_->contains(key)) return;
    if (!strict_type_ok<T>(j_->at(key)))
      throw ConfigError(where(key) + "has the wrong type (" + j_->at(key).dump() + ")");
    try {
      out = j_->at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + "has the wrong type (" + j_->at(key).dump() + ")");
    }
  }

  void get_vec3(const std::string& key, Vec3& out) {
    std::vector<double> v{out.x(), out.y(), out.z()};
    get(key, v);
    if (v.size() != 3) throw ConfigError(where(key) + "must have three entries");
    out = Vec3(v[0], v[1], v[2]);
  }

  Obj sub(const std::string& key) {
    note(key);
    const json* s = (j_ && j_->contains(key)) ? &j_->at(key) : nullptr;
    return Obj(s, path_.empty() ? key : path_ + "." + key, reg_);
  }

  // Elements of an array of objects; registers the element keys once.
  template <typename Fn>
  void each(const std::string& key, Fn&& fn) {
    note(key);
    const std::string p = (path_.empty() ? key : path_ + "." + key) + "[]";
    if (reg_) {
      Obj proto(nullptr, p, reg_);
      fn(proto);
    }
    if (!j_ || !j_->contains(key)) return;
    const json& a = j_->at(key);
    if (!a.is_array()) throw ConfigError(where(key) + "must be an array");
    for (const json& e : a) {
      Obj o(&e, p, nullptr);
      fn(o);
      o.finish();
    }
  }

  bool has(const std::string& key) const { return j_ && j_->contains(key); }

  void finish() const {
    if (!j_) return;
    for (const auto& [k, v] : j_->items())
      if (!seen_.count(k)) throw ConfigError("unknown configuration key '" + (path_.empty() ? k : path_ + "." + k) + "'");
  }

  std::string where(const std::string& key) const {
    const std::string p = path_.empty() ? key : (key.empty() ? path_ : path_ + "." + key);
    return "config field '" + p + "' ";
  }

 private:
  void note(const std::string& key) {
    seen_.insert(key);
    if (reg_) (*reg_)[path_].insert(key);
  }

  const json* j_;
  std::string path_;
  Registry* reg_;
  std::set<std::string> seen_;
};

void parse_task(Obj o, TaskSettings& t) {
  o.get("preset", t.preset);
  if (t.preset == "hard")
    t.spec = hard_task();
  else if (t.preset == "ablation")
    t.spec = ablation_task();
  else if (t.preset == "custom")
    t.spec = TaskSpec{};
  else
    throw ConfigError(o.where("preset") + "must be one of hard, ablation, custom");
  TaskSpec& s = t.spec;
  o.get("site", t.site);
  o.get_vec3("target_shift", t.target_shift);
  o.get("binder_length", s.binder_length);
  o.get("latent_dim", s.latent_dim);
  o.get("target_points", s.target_points);
  o.get("target_radius", s.target_radius);
  o.get("sites", s.sites);
  o.get("site_weights", s.site_weights);
  o.get("hotspot_radius", s.hotspot_radius);
  o.get("templates", s.templates);
  o.get("bond_length", s.bond_length);
  o.get("curvature_min", s.curvature_min);
  o.get("curvature_max", s.curvature_max);
  o.get("helix_radius_max", s.helix_radius_max);
  o.get("random_orientation", s.random_orientation);
  o.get("standoff", s.standoff);
  o.get("sigma_data", s.sigma_data);
  o.get("tau_data", s.tau_data);
  o.get("sigma_latent", s.sigma_latent);
  o.get_vec3("target_center", s.target_center);
  o.get("task_seed", s.task_seed);
  o.finish();
}

void parse_model(Obj o, ModelSettings& m) {
  o.get("kind", m.kind);
  o.get("checkpoint", m.checkpoint);
  o.get("hidden", m.arch.hidden);
  o.get("layers", m.arch.layers);
  o.get("binder_com_feature", m.arch.binder_com_feature);
  o.get("target_summary", m.arch.target_summary);
  o.get("num_classes", m.arch.num_classes);
  o.get("init_scale", m.init_scale);
  o.get("site_conditioned", m.site_conditioned);
  o.finish();
}

void parse_train(Obj o, TrainSettings& t) {
  o.get("lr", t.cfg.lr);
  o.get("steps", t.cfg.steps);
  o.get("batch", t.cfg.batch);
  o.get("translation_noise", t.cfg.translation_noise);
  o.get("divergence_threshold", t.cfg.divergence_threshold);
  o.get("dataset_size", t.dataset_size);
  o.finish();
}

void parse_flow(Obj o, FlowSettings& f) {
  std::string kx = schedule_kind_name(f.schedule.kind_x), kz = schedule_kind_name(f.schedule.kind_z);
  o.get("steps", f.schedule.steps);
  o.get("schedule_x", kx);
  o.get("schedule_z", kz);
  try {
    f.schedule.kind_x = parse_schedule_kind(kx);
    f.schedule.kind_z = parse_schedule_kind(kz);
  } catch (const ConfigError& e) {
    throw ConfigError(o.where("schedule") + e.what());
  }
  o.get("gamma_x", f.schedule.gamma_x);
  o.get("beta_clamp", f.schedule.beta_clamp);
  o.get("eta_x", f.sampler.eta_x);
  o.get("eta_z", f.sampler.eta_z);
  o.get("langevin", f.sampler.langevin);
  o.get("c_d", f.c_d);
  o.finish();
}

void parse_search(Obj o, SearchSettings& s) {
  o.get("algorithm", s.algorithm);
  o.get("beam_width", s.cfg.beam_width);
  o.get("branch_factor", s.cfg.branch_factor);
  o.get("block_steps", s.cfg.block_steps);
  o.get("inverse_temperature", s.cfg.inverse_temperature);
  o.get("epsilon", s.cfg.mcts.epsilon);
  o.get("exploration", s.cfg.mcts.exploration);
  o.get("simulations", s.cfg.mcts.simulations);
  o.get("parallel", s.cfg.parallel);
  o.get("samples", s.samples);
  o.get("refine_iterations", s.refine_iterations);
  o.get("repeats", s.repeats);
  o.finish();
}

void parse_reward(Obj o, RewardSpec& r) {
  if (o.has("terms")) r.terms.clear();
  o.each("terms", [&](Obj& t) {
    RewardTerm term;
    t.get("name", term.name);
    term.normalizer = RewardSpec::default_normalizer(term.name);
    t.get("weight", term.weight);
    t.get("normalizer", term.normalizer);
    t.get("scorer", term.scorer);
    t.get("command", term.command);
    r.terms.push_back(term);
  });
  o.get("contact_radius", r.contact_radius);
  o.get("ipae_scale", r.ipae_scale);
  o.finish();
}

void parse_success(Obj o, SuccessCriterion& c) {
  o.each("predicates", [&](Obj& p) {
    Predicate pr;
    p.get("component", pr.component);
    p.get("op", pr.op);
    p.get("threshold", pr.threshold);
    c.predicates.push_back(pr);
  });
  o.finish();
}

void parse_output(Obj o, OutputSettings& out) {
  o.get("write_pdb", out.write_pdb);
  o.get("cluster_threshold", out.cluster_threshold);
  o.finish();
}

Config parse_impl(const json* j, Registry* reg) {
  Config c;
  Obj o(j, "", reg);
  o.get("seed", c.seed);
  o.get("budget", c.budget);
  parse_task(o.sub("task"), c.task);
  parse_model(o.sub("model"), c.model);
  parse_train(o.sub("train"), c.train);
  parse_flow(o.sub("flow"), c.flow);
  parse_search(o.sub("search"), c.search);
  parse_reward(o.sub("reward"), c.reward);
  parse_success(o.sub("success"), c.success);
  parse_output(o.sub("output"), c.output);
  o.finish();
  c.model.arch.latent_dim = c.task.spec.latent_dim;
  c.train.cfg.c_d = c.flow.c_d;
  c.train.cfg.seed = StreamKey{c.seed}.child("train").value;
  return c;
}

}  // namespace

ScheduleKind parse_schedule_kind(const std::string& s) {
  if (s == "linear") return ScheduleKind::Linear;
  if (s == "exponential") return ScheduleKind::Exponential;
  if (s == "quadratic") return ScheduleKind::Quadratic;
  throw ConfigError("unknown schedule kind '" + s + "'");
}

std::string schedule_kind_name(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::Linear:
      return "linear";
    case ScheduleKind::Exponential:
      return "exponential";
    case ScheduleKind::Quadratic:
      return "quadratic";
  }
  return "linear";
}

void Config::validate() const {
  try {
    task.spec.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("config field 'task': ") + e.what());
  }
  if (task.site < 0 || task.site >= static_cast<int>(task.spec.sites.size()))
    throw ConfigError("config field 'task.site' must index task.sites");
  if (model.kind != "analytic" && model.kind != "mlp")
    throw ConfigError("config field 'model.kind' must be analytic or mlp");
  if (model.arch.hidden < 1 || model.arch.layers < 1) throw ConfigError("config field 'model.hidden/layers' must be >= 1");
  if (train.cfg.steps < 0 || train.cfg.batch < 1 || train.cfg.lr < 0.0 || train.dataset_size < 1)
    throw ConfigError("config field 'train' has invalid values");
  if (flow.schedule.steps < 1) throw ConfigError("config field 'flow.steps' must be >= 1");
  if (!(flow.schedule.beta_clamp >= 0.0)) throw ConfigError("config field 'flow.beta_clamp' must be >= 0");
  if (flow.sampler.eta_x < 0.0 || flow.sampler.eta_z < 0.0) throw ConfigError("config field 'flow.eta' must be >= 0");
  if (flow.c_d < 0.0) throw ConfigError("config field 'flow.c_d' must be >= 0");
  const std::set<std::string> algos{"bon", "beam", "fks", "mcts", "refine"};
  if (!algos.count(search.algorithm))
    throw ConfigError("config field 'search.algorithm' must be one of bon, beam, fks, mcts, refine");
  search.cfg.validate();
  if (search.samples < 0 || search.refine_iterations < 0 || search.repeats < 0)
    throw ConfigError("config field 'search' has invalid counts");
  if (search.repeats == 0 && budget == 0)
    throw ConfigError("config field 'search.repeats' may only be 0 when 'budget' is set");
  reward.validate();
  for (const auto& p : success.predicates) {
    if (p.op != "<" && p.op != "<=" && p.op != ">" && p.op != ">=")
      throw ConfigError("config field 'success.predicates[].op' must be one of < <= > >=");
    if (p.component != "proxy_ipae" && p.component != "contact_count" && p.component != "com_placement" &&
        p.component != "custom")
      throw ConfigError("config field 'success.predicates[].component' is unknown: " + p.component);
  }
  if (!(output.cluster_threshold > 0.0 && output.cluster_threshold <= 1.0))
    throw ConfigError("config field 'output.cluster_threshold' must lie in (0, 1]");
}

Config parse_config(const json& j) {
  Config c = parse_impl(&j, nullptr);
  c.validate();
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

std::map<std::string, std::set<std::string>> config_keys() {
  Registry reg;
  parse_impl(nullptr, &reg);
  return reg;
}

json config_to_json(const Config& c) {
  const TaskSpec& s = c.task.spec;
  auto vec = [](const Vec3& v) { return std::vector<double>{v.x(), v.y(), v.z()}; };
  json j;
  j["seed"] = c.seed;
  j["budget"] = c.budget;
  j["task"] = {{"preset", c.task.preset},
               {"site", c.task.site},
               {"target_shift", vec(c.task.target_shift)},
               {"binder_length", s.binder_length},
               {"latent_dim", s.latent_dim},
               {"target_points", s.target_points},
               {"target_radius", s.target_radius},
               {"sites", s.sites},
               {"site_weights", s.site_weights},
               {"hotspot_radius", s.hotspot_radius},
               {"templates", s.templates},
               {"bond_length", s.bond_length},
               {"curvature_min", s.curvature_min},
               {"curvature_max", s.curvature_max},
               {"helix_radius_max", s.helix_radius_max},
               {"random_orientation", s.random_orientation},
               {"standoff", s.standoff},
               {"sigma_data", s.sigma_data},
               {"tau_data", s.tau_data},
               {"sigma_latent", s.sigma_latent},
               {"target_center", vec(s.target_center)},
               {"task_seed", s.task_seed}};
  j["model"] = {{"kind", c.model.kind},
                {"checkpoint", c.model.checkpoint},
                {"hidden", c.model.arch.hidden},
                {"layers", c.model.arch.layers},
                {"binder_com_feature", c.model.arch.binder_com_feature},
                {"target_summary", c.model.arch.target_summary},
                {"num_classes", c.model.arch.num_classes},
                {"init_scale", c.model.init_scale},
                {"site_conditioned", c.model.site_conditioned}};
  j["train"] = {{"lr", c.train.cfg.lr},
                {"steps", c.train.cfg.steps},
                {"batch", c.train.cfg.batch},
                {"translation_noise", c.train.cfg.translation_noise},
                {"divergence_threshold", c.train.cfg.divergence_threshold},
                {"dataset_size", c.train.dataset_size}};
  j["flow"] = {{"steps", c.flow.schedule.steps},
               {"schedule_x", schedule_kind_name(c.flow.schedule.kind_x)},
               {"schedule_z", schedule_kind_name(c.flow.schedule.kind_z)},
               {"gamma_x", c.flow.schedule.gamma_x},
               {"beta_clamp", c.flow.schedule.beta_clamp},
               {"eta_x", c.flow.sampler.eta_x},
               {"eta_z", c.flow.sampler.eta_z},
               {"langevin", c.flow.sampler.langevin},
               {"c_d", c.flow.c_d}};
  j["search"] = {{"algorithm", c.search.algorithm},
                 {"beam_width", c.search.cfg.beam_width},
                 {"branch_factor", c.search.cfg.branch_factor},
                 {"block_steps", c.search.cfg.block_steps},
                 {"inverse_temperature", c.search.cfg.inverse_temperature},
                 {"epsilon", c.search.cfg.mcts.epsilon},
                 {"exploration", c.search.cfg.mcts.exploration},
                 {"simulations", c.search.cfg.mcts.simulations},
                 {"parallel", c.search.cfg.parallel},
                 {"samples", c.search.samples},
                 {"refine_iterations", c.search.refine_iterations},
                 {"repeats", c.search.repeats}};
  json terms = json::array();
  for (const auto& t : c.reward.terms) {
    json e = {{"name", t.name}, {"weight", t.weight}, {"normalizer", t.normalizer}};
    if (!t.scorer.empty()) e["scorer"] = t.scorer;
    if (!t.command.empty()) e["command"] = t.command;
    terms.push_back(e);
  }
  j["reward"] = {{"terms", terms}, {"contact_radius", c.reward.contact_radius}, {"ipae_scale", c.reward.ipae_scale}};
  json preds = json::array();
  for (const auto& p : c.success.predicates)
    preds.push_back({{"component", p.component}, {"op", p.op}, {"threshold", p.threshold}});
  j["success"] = {{"predicates", preds}};
  j["output"] = {{"write_pdb", c.output.write_pdb}, {"cluster_threshold", c.output.cluster_threshold}};
  return j;
}

}  // namespace flowbind
