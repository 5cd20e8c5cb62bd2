#include "flowbind/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "flowbind/mcts.hpp"
#include "flowbind/pdb.hpp"
#include "flowbind/refine.hpp"

namespace flowbind {

using nlohmann::json;

std::vector<SuccessRecord> discovery_order(const SuccessSet& set) {
  std::vector<SuccessRecord> out = set.sorted();
  std::stable_sort(out.begin(), out.end(), [](const SuccessRecord& a, const SuccessRecord& b) {
    return a.evaluations_at < b.evaluations_at;
  });
  return out;
}

namespace {

std::vector<PointChain> binder_chains(const std::vector<SuccessRecord>& records) {
  std::vector<PointChain> chains;
  chains.reserve(records.size());
  for (const auto& r : records) chains.push_back(to_angstrom_chain(r.sample.state.coords));
  return chains;
}

}  // namespace

std::size_t count_unique_successes(const SuccessSet& set, double threshold) {
  if (set.empty()) return 0;
  const auto chains = binder_chains(discovery_order(set));
  return static_cast<std::size_t>(greedy_cluster(chains, threshold).num_clusters());
}

ScalingCurve success_curve(const SuccessSet& set, const std::string& algorithm, std::uint64_t total_evaluations,
                           double threshold) {
  ScalingCurve curve;
  curve.algorithm = algorithm;
  const auto records = discovery_order(set);
  const auto chains = binder_chains(records);
  // Leader clustering is incremental, so the prefix counts can be read off
  // the labels of one pass over the full list.
  const ClusterAssignment a = greedy_cluster(chains, threshold);
  int seen = -1;
  for (std::size_t i = 0; i < records.size(); ++i) {
    seen = std::max(seen, a.labels[i]);
    const double x = static_cast<double>(records[i].evaluations_at);
    if (!curve.points.empty() && curve.points.back().compute == x)
      curve.points.back().unique_successes = seen + 1;
    else
      curve.points.push_back({x, static_cast<double>(seen + 1)});
  }
  const double last = curve.points.empty() ? 0.0 : curve.points.back().unique_successes;
  if (curve.points.empty() || curve.points.back().compute < static_cast<double>(total_evaluations))
    curve.points.push_back({static_cast<double>(total_evaluations), last});
  return curve;
}

json success_record_to_json(const SuccessRecord& r) {
  json coords = json::array();
  for (Eigen::Index i = 0; i < r.sample.state.coords.rows(); ++i)
    coords.push_back({r.sample.state.coords(i, 0), r.sample.state.coords(i, 1), r.sample.state.coords(i, 2)});
  return {{"provenance",
           {{"algorithm", r.provenance.algorithm},
            {"run", r.provenance.run},
            {"round", r.provenance.round},
            {"candidate", r.provenance.candidate},
            {"stage", r.provenance.stage}}},
          {"evaluations_at", r.evaluations_at},
          {"reward", {{"raw", r.reward.raw}, {"total", r.reward.total}}},
          {"labels", r.sample.labels},
          {"coords_nm", coords}};
}

TrainedModel train_model(const Config& cfg, MlpField** out_field) {
  const StreamKey root{cfg.seed};
  const auto data = gen_toy_binder_dataset(root.child("data"), cfg.task.spec,
                                           static_cast<std::size_t>(cfg.train.dataset_size));
  const auto items = training_items(data);
  auto field = std::make_shared<MlpField>(
      MlpField::random(cfg.model.arch, root.child("init").value, 0.1 * cfg.model.init_scale));
  TrainedModel out;
  out.training = train_field(*field, items, cfg.train.cfg);
  if (out_field) *out_field = field.get();
  out.field = std::move(field);
  return out;
}

TrainedModel build_model(const Config& cfg) {
  TrainedModel out;
  if (cfg.model.kind == "analytic") {
    out.field = task_mixture_field(cfg.task.spec, cfg.flow.c_d,
                                   cfg.model.site_conditioned ? std::optional<int>(cfg.task.site) : std::nullopt);
    return out;
  }
  if (!cfg.model.checkpoint.empty()) {
    auto f = std::make_shared<MlpField>(load_mlp_checkpoint(cfg.model.checkpoint));
    if (!(f->architecture() == cfg.model.arch))
      throw ConfigError("checkpoint " + cfg.model.checkpoint + " does not match the configured architecture");
    out.field = std::move(f);
    return out;
  }
  return train_model(cfg);
}

json strip_wall_clock(json manifest) {
  manifest.erase("wall_clock_seconds");
  return manifest;
}

namespace {

json component_stats(const SuccessSet& set) {
  std::map<std::string, std::vector<double>> values;
  std::vector<double> totals;
  for (const auto& r : set.sorted()) {
    for (const auto& [k, v] : r.reward.raw) values[k].push_back(v);
    totals.push_back(r.reward.total);
  }
  values["total"] = totals;
  json out = json::object();
  for (const auto& [k, v] : values) {
    if (v.empty()) {
      out[k] = {{"count", 0}};
      continue;
    }
    double sum = 0.0;
    for (double x : v) sum += x;
    out[k] = {{"count", v.size()},
              {"mean", sum / static_cast<double>(v.size())},
              {"min", *std::min_element(v.begin(), v.end())},
              {"max", *std::max_element(v.begin(), v.end())}};
  }
  return out;
}

void write_pdb_dumps(const std::filesystem::path& dir, const std::vector<SuccessRecord>& records,
                     const TargetContext& ctx) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < records.size(); ++i) {
    Complex c;
    c.chains.push_back(to_angstrom_chain(ctx.points, 'A'));
    c.chains.push_back(to_angstrom_chain(records[i].sample.state.coords, 'B'));
    c.binder_index = 1;
    std::vector<std::vector<int>> labels{std::vector<int>(ctx.size(), -1), records[i].sample.labels};
    char name[32];
    std::snprintf(name, sizeof name, "success_%05zu.pdb", i);
    write_file_atomic(dir / name, write_structure(c, &labels));
  }
}

SearchResult run_once(const Config& cfg, const SearchProblem& p, SearchConfig sc, StreamKey key) {
  const std::string& algo = cfg.search.algorithm;
  if (algo == "beam") return beam_search(p, sc, key);
  if (algo == "fks") return fk_steering(p, sc, key);
  if (algo == "mcts") return mcts_search(p, sc, key);
  if (algo == "bon") return best_of_n(p, cfg.search.samples, key, sc);
  // refine: generate, then improve labels by mutation.
  SearchResult base = best_of_n(p, cfg.search.samples, key, sc);
  SearchResult out;
  out.evaluations = base.evaluations;
  out.truncated = base.truncated;
  out.dropped = base.dropped;
  auto reward = [&](const Sample& s) { return p.score(s).total; };
  for (std::size_t i = 0; i < base.finals.size(); ++i) {
    const RefineResult rr =
        mutation_refine(base.finals[i].sample, reward, cfg.search.refine_iterations, key.derive("refine", i));
    ScoredSample s;
    s.sample = rr.sample;
    s.reward = p.score(s.sample);
    s.passed = std::isfinite(s.reward.total) && p.criterion.passes(s.reward.raw);
    if (s.passed)
      out.successes.add({s.sample, s.reward, {"refine", 0, 0, static_cast<int>(i), "refined"},
                         static_cast<std::uint64_t>(i + 1) * static_cast<std::uint64_t>(p.schedule.steps())});
    out.finals.push_back(s);
    out.evaluated.push_back(s);
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const Config& cfg, const std::filesystem::path& out_dir, const TrainedModel* given) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const std::filesystem::path manifest_path = out_dir.empty() ? std::filesystem::path{} : out_dir / "manifest.json";
  if (!out_dir.empty() && std::filesystem::exists(manifest_path))
    throw std::runtime_error("refusing to overwrite existing manifest " + manifest_path.string());

  TrainedModel built;
  if (!given) built = build_model(cfg);
  const TrainedModel& tm = given ? *given : built;
  Model model(tm.field);

  const TargetContext ctx = make_context(cfg.task.spec, cfg.task.site).translated(cfg.task.target_shift);
  const ToyCodec codec = ToyCodec::identity(cfg.task.spec.latent_dim);

  SearchProblem p;
  p.model = &model;
  p.context = &ctx;
  p.schedule = Schedule(cfg.flow.schedule);
  p.sampler = cfg.flow.sampler;
  p.binder_length = static_cast<std::size_t>(cfg.task.spec.binder_length);
  p.c_d = cfg.flow.c_d;
  p.decode = [&codec](const Matrix& z) { return codec.decode_labels(z); };
  p.score = [&ctx, &cfg](const Sample& s) { return evaluate_reward(s, ctx, cfg.reward); };
  p.criterion = cfg.success;

  const StreamKey key = StreamKey{cfg.seed}.child("search");
  ExperimentResult res;
  std::uint64_t used = 0;
  bool truncated = false;
  int runs = 0;
  std::size_t finals = 0;
  for (int run = 0; cfg.search.repeats == 0 || run < cfg.search.repeats; ++run) {
    SearchConfig sc = cfg.search.cfg;
    if (cfg.budget) {
      if (used >= cfg.budget) break;
      sc.max_evaluations = cfg.budget - used;
    }
    SearchResult r = run_once(cfg, p, sc, key.derive("run", static_cast<std::uint64_t>(run)));
    for (SuccessRecord rec : r.successes.records()) {
      rec.provenance.run = run;
      rec.evaluations_at += used;
      res.successes.add(std::move(rec));
    }
    used += r.evaluations;
    finals += r.finals.size();
    if (r.evaluations > 0 || !r.finals.empty()) ++runs;
    if (r.truncated) {
      truncated = true;
      break;
    }
    if (r.evaluations == 0) break;
  }
  if (model.forward_calls() != used)
    throw std::logic_error("compute accounting mismatch: counter " + std::to_string(model.forward_calls()) +
                           " vs algorithm total " + std::to_string(used));
  res.evaluations = model.forward_calls();
  res.curve = success_curve(res.successes, cfg.search.algorithm, res.evaluations, cfg.output.cluster_threshold);

  json terms = json::array();
  for (const auto& t : cfg.reward.terms) terms.push_back({{"name", t.name}, {"weight", t.weight}, {"normalizer", t.normalizer}});
  json curve = json::array();
  for (const auto& pt : res.curve.points) curve.push_back({pt.compute, pt.unique_successes});
  json m;
  m["format"] = "flowbind-manifest";
  m["manifest_version"] = kManifestVersion;
  m["software_version"] = kSoftwareVersion;
  m["config"] = config_to_json(cfg);
  m["seed"] = cfg.seed;
  m["algorithm"] = cfg.search.algorithm;
  m["compute_unit"] = "forward_calls";
  m["evaluations"] = res.evaluations;
  m["budget"] = cfg.budget;
  m["runs"] = runs;
  m["final_samples"] = finals;
  m["truncated"] = truncated;
  m["success_count"] = res.successes.size();
  m["unique_successes"] = count_unique_successes(res.successes, cfg.output.cluster_threshold);
  m["cluster_threshold"] = cfg.output.cluster_threshold;
  m["reward"] = {{"convention", kRewardConvention}, {"terms", terms}, {"success_stats", component_stats(res.successes)}};
  m["curve"] = curve;
  if (tm.training) m["training"] = {{"steps", tm.training->loss_trace.size()}, {"final_loss", tm.training->final_loss}};
  m["files"] = {{"successes", "successes.jsonl"}, {"curve", "curve.csv"}};
  m["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  res.manifest = m;

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ostringstream lines;
    const auto ordered = res.successes.sorted();
    for (const auto& r : ordered) lines << success_record_to_json(r).dump() << '\n';
    write_file_atomic(out_dir / "successes.jsonl", lines.str());
    write_file_atomic(out_dir / "curve.csv", curves_to_csv({res.curve}));
    if (cfg.output.write_pdb) write_pdb_dumps(out_dir / "pdb", ordered, ctx);
    write_file_atomic(manifest_path, m.dump(2) + "\n");
  }
  return res;
}

std::vector<DomainAnnotation> parse_domain_annotations(const json& j) {
  if (!j.is_array()) throw ConfigError("domain annotations must be a JSON array");
  std::vector<DomainAnnotation> out;
  for (const auto& e : j) {
    if (!e.is_object()) throw ConfigError("domain annotation entries must be objects");
    for (const auto& [k, v] : e.items())
      if (k != "chain" && k != "ranges") throw ConfigError("unknown domain annotation key '" + k + "'");
    DomainAnnotation a;
    try {
      const std::string chain = e.at("chain").get<std::string>();
      if (chain.size() != 1) throw ConfigError("domain annotation chain must be one character");
      a.source_chain = chain[0];
      for (const auto& r : e.at("ranges")) a.ranges.emplace_back(r.at(0).get<int>(), r.at(1).get<int>());
    } catch (const json::exception& ex) {
      throw ConfigError(std::string("malformed domain annotation: ") + ex.what());
    }
    out.push_back(std::move(a));
  }
  return out;
}

json run_pipeline(const PipelineOptions& opt, const std::filesystem::path& out_dir) {
  if (!(opt.contact_dist > 0.0)) throw ConfigError("--contact-dist must be > 0");
  if (opt.min_contacts < 1) throw ConfigError("--min-contacts must be >= 1");
  if (opt.crop.max_binder < 1) throw ConfigError("--max-binder must be >= 1");
  if (opt.crop.max_total < 2) throw ConfigError("--max-total must be >= 2");
  const std::filesystem::path manifest_path = out_dir / "manifest.json";
  if (std::filesystem::exists(manifest_path))
    throw std::runtime_error("refusing to overwrite existing manifest " + manifest_path.string());
  const auto started = std::chrono::steady_clock::now();

  Complex c = read_structure_file(opt.input.string());
  if (!opt.domains.empty()) {
    std::ifstream f(opt.domains);
    if (!f) throw ConfigError("cannot open domain annotations " + opt.domains.string());
    json j;
    try {
      j = json::parse(f);
    } catch (const json::exception& e) {
      throw ConfigError("domain annotations are not valid JSON: " + std::string(e.what()));
    }
    c = split_domains(c, parse_domain_annotations(j));
  }
  const auto dimers = extract_dimers(c, opt.contact_dist, opt.min_contacts);

  std::filesystem::create_directories(out_dir);
  json crops = json::array();
  for (std::size_t k = 0; k < dimers.size(); ++k) {
    const auto [i, j] = dimers[k];
    Complex pair;
    pair.chains = {c.chains[i], c.chains[j]};
    const std::uint64_t seed = StreamKey{opt.seed}.derive("crop", k).value;
    json entry = {{"pair", {std::string(1, chain_letter(c.chains[i].chain_id)),
                            std::string(1, chain_letter(c.chains[j].chain_id))}}};
    try {
      const CropResult r = crop_complex(pair, seed, opt.crop);
      char name[32];
      std::snprintf(name, sizeof name, "crop_%04zu.pdb", k);
      write_file_atomic(out_dir / name, write_structure(r.as_complex()));
      entry["file"] = name;
      entry["binder_chain"] = std::string(1, chain_letter(pair.chains[r.binder_chain].chain_id));
      entry["binder_length"] = r.binder.size();
      entry["binder_residues"] = {r.binder.residue_ids.front(), r.binder.residue_ids.back()};
      entry["seed_residue"] = r.binder.residue_ids[r.seed_index];
      entry["target_residues"] = r.target_residues();
      entry["total_residues"] = r.total_residues();
      entry["min_target_unmet"] = r.min_target_unmet;
    } catch (const NoInterfaceError& e) {
      entry["skipped"] = e.what();
    }
    crops.push_back(entry);
  }

  json m;
  m["format"] = "flowbind-pipeline-manifest";
  m["manifest_version"] = kManifestVersion;
  m["software_version"] = kSoftwareVersion;
  m["input"] = opt.input.filename().string();
  m["domains"] = opt.domains.empty() ? "" : opt.domains.filename().string();
  m["seed"] = opt.seed;
  m["parameters"] = {{"contact_dist", opt.contact_dist},
                     {"min_contacts", opt.min_contacts},
                     {"max_binder", opt.crop.max_binder},
                     {"spatial_cutoff", opt.crop.spatial_cutoff},
                     {"min_target", opt.crop.min_target},
                     {"max_total", opt.crop.max_total},
                     {"interface_cutoff", opt.crop.interface_cutoff}};
  m["chains"] = c.chains.size();
  m["dimers"] = dimers.size();
  m["crops"] = crops;
  m["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_file_atomic(manifest_path, m.dump(2) + "\n");
  return m;
}

}  // namespace flowbind
