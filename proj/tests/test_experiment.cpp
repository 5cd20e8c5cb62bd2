#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "flowbind/experiment.hpp"
#include "flowbind/pdb.hpp"
#include "helpers.hpp"

using namespace flowbind;
using nlohmann::json;

namespace {

Config small_config(const std::string& algo, std::uint64_t seed = 1) {
  json j = {{"seed", seed},
            {"flow", {{"steps", 20}, {"langevin", false}}},
            {"search",
             {{"algorithm", algo}, {"beam_width", 2}, {"branch_factor", 3}, {"block_steps", 5}, {"samples", 6},
              {"simulations", 4}, {"refine_iterations", 5}}},
            {"success", {{"predicates", json::array({{{"component", "proxy_ipae"}, {"op", "<"}, {"threshold", 16.0}}})}}}};
  return parse_config(j);
}

SuccessRecord record(const Coords& nm, std::uint64_t at, int candidate) {
  SuccessRecord r;
  r.sample.state.coords = nm;
  r.sample.state.latents = Matrix::Zero(nm.rows(), 1);
  r.sample.labels.assign(static_cast<std::size_t>(nm.rows()), 0);
  r.provenance = {"bon", 0, 0, candidate, "sample"};
  r.evaluations_at = at;
  return r;
}

// Leader clustering written from the pairwise similarity matrix.
std::size_t brute_unique(const std::vector<Coords>& angstrom, double thr) {
  const std::size_t n = angstrom.size();
  std::vector<std::vector<double>> sim(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) sim[i][j] = structural_similarity(angstrom[i], angstrom[j]);
  std::vector<std::size_t> leaders;
  for (std::size_t i = 0; i < n; ++i)
    if (std::none_of(leaders.begin(), leaders.end(), [&](std::size_t l) { return sim[i][l] >= thr; }))
      leaders.push_back(i);
  return leaders.size();
}

}  // namespace

TEST_CASE("unique successes: empty and identical") {
  SuccessSet empty;
  CHECK(count_unique_successes(empty) == 0);
  Random rng(1);
  const Coords c = testutil::random_coords(rng, 8, 1.0);
  SuccessSet same;
  for (int i = 0; i < 5; ++i) same.add(record(c, 10 * i, i));
  CHECK(count_unique_successes(same) == 1);
}

TEST_CASE("unique successes: well separated groups") {
  Random rng(2);
  const int groups = 6;
  std::vector<Coords> templates;
  for (int g = 0; g < groups; ++g) templates.push_back(testutil::random_coords(rng, 10, 2.0));
  SuccessSet set;
  int cand = 0;
  for (int copy = 0; copy < 4; ++copy)
    for (int g = 0; g < groups; ++g) {
      Coords c = templates[static_cast<std::size_t>(g)];
      for (Eigen::Index i = 0; i < c.rows(); ++i)
        for (int k = 0; k < 3; ++k) c(i, k) += 0.005 * rng.normal();
      set.add(record(c, static_cast<std::uint64_t>(100 - cand), cand));
      ++cand;
    }
  CHECK(count_unique_successes(set) == groups);
}

TEST_CASE("unique successes match the pairwise oracle") {
  Random rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    SuccessSet set;
    std::vector<std::pair<std::uint64_t, Coords>> items;
    const int n = 3 + static_cast<int>(rng.uniform() * 12);
    // Short walks at a small scale so that some pairs do cluster.
    for (int i = 0; i < n; ++i) {
      const Coords c = testutil::random_walk(rng, 6, 0.15);
      const auto at = static_cast<std::uint64_t>(rng.uniform() * 50);
      set.add(record(c, at, i));
      items.emplace_back(at, c);
    }
    // Discovery order: evaluations_at, ties by candidate index.
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Coords> ang;
    for (const auto& [at, c] : items) ang.push_back(10.0 * c);
    CHECK(count_unique_successes(set) == brute_unique(ang, kDefaultClusterThreshold));
    CHECK(count_unique_successes(set, 0.3) == brute_unique(ang, 0.3));
  }
}

TEST_CASE("success curve is a monotone step closed at the total") {
  Random rng(4);
  SuccessSet set;
  for (int i = 0; i < 12; ++i) set.add(record(testutil::random_coords(rng, 6, 1.5), 5 + 3 * (i / 2), i));
  const ScalingCurve c = success_curve(set, "bon", 200);
  CHECK_NOTHROW(c.validate());
  CHECK(c.points.back().compute == 200.0);
  CHECK(c.points.back().unique_successes == static_cast<double>(count_unique_successes(set)));
  CHECK(c.points.front().compute == 5.0);

  const ScalingCurve none = success_curve(SuccessSet{}, "bon", 40);
  REQUIRE(none.points.size() == 1);
  CHECK(none.points[0] == CurvePoint{40.0, 0.0});
}

TEST_CASE("best-of-n with zero samples does nothing") {
  Config cfg = small_config("bon");
  cfg.search.samples = 0;
  const auto r = run_experiment(cfg);
  CHECK(r.evaluations == 0);
  CHECK(r.successes.empty());
  CHECK(r.manifest["unique_successes"] == 0);
}

TEST_CASE("beam forward calls equal the analytic count and the counter") {
  for (int width : {1, 2, 3}) {
    Config cfg = small_config("beam");
    cfg.search.cfg.beam_width = width;
    const auto r = run_experiment(cfg);
    const auto expect = beam_evaluation_count(cfg.search.cfg, cfg.flow.schedule.steps);
    // Sum over block starts of N * L * (S - s).
    std::uint64_t hand = 0;
    for (int s = 0; s < 20; s += 5) hand += static_cast<std::uint64_t>(width * 3 * (20 - s));
    CHECK(expect == hand);
    CHECK(r.evaluations == expect);
    CHECK(r.manifest["evaluations"] == expect);
  }
}

TEST_CASE("budget caps every algorithm") {
  for (const char* algo : {"bon", "beam", "fks", "mcts", "refine"}) {
    Config cfg = small_config(algo);
    cfg.budget = 150;
    cfg.search.repeats = 0;
    const auto r = run_experiment(cfg);
    INFO(algo);
    CHECK(r.evaluations <= 150);
    CHECK(r.evaluations > 0);
    CHECK_NOTHROW(r.curve.validate());
    CHECK(r.curve.points.back().compute == static_cast<double>(r.evaluations));
  }
}

TEST_CASE("reruns are byte identical and manifests are never overwritten") {
  const auto dir = testutil::fresh_dir("experiment");
  Config cfg = small_config("fks", 9);
  cfg.output.write_pdb = true;
  const auto a = run_experiment(cfg, dir / "a");
  const auto b = run_experiment(cfg, dir / "b");
  CHECK(a.successes.size() > 0);
  CHECK(testutil::slurp(dir / "a" / "successes.jsonl") == testutil::slurp(dir / "b" / "successes.jsonl"));
  CHECK(testutil::slurp(dir / "a" / "curve.csv") == testutil::slurp(dir / "b" / "curve.csv"));
  const json ma = json::parse(testutil::slurp(dir / "a" / "manifest.json"));
  const json mb = json::parse(testutil::slurp(dir / "b" / "manifest.json"));
  CHECK(ma.contains("wall_clock_seconds"));
  CHECK(strip_wall_clock(ma).dump() == strip_wall_clock(mb).dump());
  CHECK(ma["format"] == "flowbind-manifest");
  CHECK(ma["manifest_version"] == kManifestVersion);
  CHECK(std::filesystem::exists(dir / "a" / "pdb" / "success_00000.pdb"));

  // Round trip the stored config.
  CHECK(config_to_json(parse_config(ma["config"])) == ma["config"]);

  const std::string before = testutil::slurp(dir / "a" / "manifest.json");
  CHECK_THROWS(run_experiment(cfg, dir / "a"));
  CHECK(testutil::slurp(dir / "a" / "manifest.json") == before);

  Config other = cfg;
  other.seed = 10;
  CHECK(run_experiment(other).manifest["curve"] != a.manifest["curve"]);
}

TEST_CASE("pipeline reruns are identical and refuse to overwrite") {
  const auto dir = testutil::fresh_dir("pipeline-run");
  Random rng(5);
  const Complex c = testutil::random_complex(rng, 4, 20, 40, 12.0);
  {
    std::ofstream f(dir / "in.pdb");
    f << write_structure(c);
  }
  PipelineOptions opt;
  opt.input = dir / "in.pdb";
  opt.seed = 3;
  const json a = run_pipeline(opt, dir / "a");
  const json b = run_pipeline(opt, dir / "b");
  CHECK(strip_wall_clock(a) == strip_wall_clock(b));
  CHECK(a["dimers"] == testutil::brute_dimers(c, opt.contact_dist, opt.min_contacts).size());
  for (const auto& crop : a["crops"]) {
    if (!crop.contains("file")) continue;
    const std::string f = crop["file"];
    CHECK(testutil::slurp(dir / "a" / f) == testutil::slurp(dir / "b" / f));
    CHECK(crop["binder_length"].get<int>() <= opt.crop.max_binder);
    CHECK(crop["total_residues"].get<int>() <= opt.crop.max_total);
  }
  CHECK_THROWS(run_pipeline(opt, dir / "a"));

  PipelineOptions bad = opt;
  bad.min_contacts = 0;
  CHECK_THROWS_AS(run_pipeline(bad, dir / "c"), ConfigError);
}

TEST_CASE("domain annotations parse strictly") {
  const auto d = parse_domain_annotations(json::parse(R"([{"chain": "A", "ranges": [[1, 10], [20, 30]]}])"));
  REQUIRE(d.size() == 1);
  CHECK(d[0].source_chain == 'A');
  CHECK(d[0].ranges.size() == 2);
  CHECK_THROWS_AS(parse_domain_annotations(json::parse(R"({"chain": "A"})")), ConfigError);
  CHECK_THROWS_AS(parse_domain_annotations(json::parse(R"([{"chain": "A", "ranges": [], "x": 1}])")), ConfigError);
  CHECK_THROWS_AS(parse_domain_annotations(json::parse(R"([{"chain": "AB", "ranges": []}])")), ConfigError);
}
