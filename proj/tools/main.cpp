#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "flowbind/experiment.hpp"

using namespace flowbind;
using nlohmann::json;

namespace {

Config load_with_overrides(const std::string& path, const std::optional<std::uint64_t>& seed,
                           const std::optional<std::uint64_t>& budget) {
  Config cfg = path.empty() ? Config{} : load_config(path);
  if (seed) cfg.seed = *seed;
  if (budget) cfg.budget = *budget;
  cfg.train.cfg.seed = StreamKey{cfg.seed}.child("train").value;
  cfg.validate();
  return cfg;
}

json read_json(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw std::runtime_error("cannot open " + p.string());
  return json::parse(f);
}

void print_summary(const json& m) {
  std::cout << m.at("algorithm").get<std::string>() << ": evaluations=" << m.at("evaluations")
            << " successes=" << m.at("success_count") << " unique=" << m.at("unique_successes")
            << (m.at("truncated").get<bool>() ? " (truncated by budget)" : "") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowbind: flow-matching binder generation with inference-time search"};
  app.require_subcommand(1);

  std::string config_path, out;
  std::optional<std::uint64_t> seed, budget;

  auto* train = app.add_subcommand("train", "train the velocity field and write a checkpoint");
  train->add_option("--config", config_path, "JSON config file");
  train->add_option("--out", out, "checkpoint path")->required();
  train->add_option("--seed", seed, "override the config seed");

  auto* sample = app.add_subcommand("sample", "draw unconditioned samples from the model");
  int n_samples = 16;
  sample->add_option("--config", config_path, "JSON config file");
  sample->add_option("--out", out, "output directory")->required();
  sample->add_option("-n,--count", n_samples, "number of samples")->check(CLI::NonNegativeNumber);
  sample->add_option("--seed", seed, "override the config seed");

  auto* search = app.add_subcommand("search", "run an inference-time search algorithm");
  std::string algo;
  search->add_option("--config", config_path, "JSON config file");
  search->add_option("--algo", algo, "algorithm")->check(CLI::IsMember({"bon", "beam", "fks", "mcts", "refine"}));
  search->add_option("--out", out, "output directory")->required();
  search->add_option("--seed", seed, "override the config seed");
  search->add_option("--budget", budget, "override the forward-call budget");

  auto* pipeline = app.add_subcommand("pipeline", "extract and crop dimers from a structure file");
  PipelineOptions popt;
  std::string input, domains;
  pipeline->add_option("--input", input, "PDB-format structure file")->required()->check(CLI::ExistingFile);
  pipeline->add_option("--domains", domains, "JSON domain annotations")->check(CLI::ExistingFile);
  pipeline->add_option("--out", out, "output directory")->required();
  pipeline->add_option("--contact-dist", popt.contact_dist, "CA-CA contact distance in angstrom");
  pipeline->add_option("--min-contacts", popt.min_contacts, "residues per chain within the contact distance");
  pipeline->add_option("--max-binder", popt.crop.max_binder, "maximum binder crop length");
  pipeline->add_option("--max-total", popt.crop.max_total, "maximum residues per crop");
  pipeline->add_option("--seed", popt.seed, "crop seed");

  auto* bench = app.add_subcommand("bench", "sweep several configs and seeds, then plot the curves");
  std::vector<std::string> configs;
  std::vector<std::uint64_t> seeds{0};
  bench->add_option("--configs", configs, "config files")->required();
  bench->add_option("--seeds", seeds, "seeds to run for every config");
  bench->add_option("--out", out, "output directory")->required();
  bench->add_option("--budget", budget, "override the forward-call budget");

  auto* plot = app.add_subcommand("plot", "render scaling curves from run manifests");
  std::vector<std::string> manifests;
  plot->add_option("--manifests", manifests, "manifest.json files")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", out, "output prefix (writes .csv and .svg)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      Config cfg = load_with_overrides(config_path, seed, std::nullopt);
      cfg.model.kind = "mlp";
      MlpField* field = nullptr;
      const TrainedModel tm = train_model(cfg, &field);
      save_checkpoint(out, *field);
      std::ostringstream trace;
      trace << "step,loss\n";
      for (std::size_t i = 0; i < tm.training->loss_trace.size(); ++i) trace << i << ',' << tm.training->loss_trace[i] << '\n';
      write_file_atomic(out + ".loss.csv", trace.str());
      std::cout << "final loss " << tm.training->final_loss << " -> " << out << "\n";
    } else if (*sample) {
      Config cfg = load_with_overrides(config_path, seed, std::nullopt);
      cfg.search.algorithm = "bon";
      cfg.search.samples = n_samples;
      cfg.search.repeats = 1;
      cfg.budget = 0;
      cfg.success.predicates.clear();  // keep every sample
      print_summary(run_experiment(cfg, out).manifest);
    } else if (*search) {
      Config cfg = load_with_overrides(config_path, seed, budget);
      if (!algo.empty()) cfg.search.algorithm = algo;
      print_summary(run_experiment(cfg, out).manifest);
    } else if (*pipeline) {
      popt.input = input;
      popt.domains = domains;
      const json m = run_pipeline(popt, out);
      std::cout << "dimers " << m.at("dimers") << ", crops written to " << out << "\n";
    } else if (*bench) {
      std::vector<json> done;
      std::filesystem::create_directories(out);
      std::ofstream index(std::filesystem::path(out) / "index.jsonl", std::ios::app);
      for (const auto& path : configs) {
        for (std::uint64_t s : seeds) {
          const Config cfg = load_with_overrides(path, s, budget);
          const std::string name =
              std::filesystem::path(path).stem().string() + "_" + cfg.search.algorithm + "_seed" + std::to_string(s);
          const auto dir = std::filesystem::path(out) / name;
          const ExperimentResult r = run_experiment(cfg, dir);
          index << json{{"run", name}, {"manifest", (dir / "manifest.json").string()}}.dump() << '\n';
          index.flush();
          print_summary(r.manifest);
          done.push_back(r.manifest);
        }
      }
      const auto files = emit_curves(done, std::filesystem::path(out) / "curves");
      std::cout << "curves: " << files.csv.string() << ", " << files.svg.string() << "\n";
    } else if (*plot) {
      std::vector<json> ms;
      for (const auto& m : manifests) ms.push_back(read_json(m));
      const auto files = emit_curves(ms, out);
      std::cout << "curves: " << files.csv.string() << ", " << files.svg.string() << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
