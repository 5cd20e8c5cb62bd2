// Times the parallel kernels against their serial references.
#include <chrono>
#include <cstdio>
#include <functional>

#include "flowbind/search.hpp"
#include "flowbind/toytask.hpp"

using namespace flowbind;

namespace {

double seconds(const std::function<void()>& fn, int reps) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / reps;
}

Coords random_cloud(Random& rng, int n, double extent) {
  Coords c(n, 3);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) c(i, k) = extent * rng.uniform();
  return c;
}

void report(const char* name, double serial, double fast) {
  std::printf("%-28s serial %10.3f ms   parallel %10.3f ms   speedup %5.2fx\n", name, 1e3 * serial, 1e3 * fast,
              serial / fast);
}

}  // namespace

int main() {
  Random rng(StreamKey{2024});
  for (int n : {250, 1000, 4000}) {
    const Coords a = random_cloud(rng, n, 0.6 * n);
    const Coords b = random_cloud(rng, n, 0.6 * n);
    const PointChain ca = PointChain::from_coords(a, 'A');
    const PointChain cb = PointChain::from_coords(b, 'B');
    const int reps = n > 2000 ? 3 : 20;
    char label[64];
    std::snprintf(label, sizeof label, "detect_contacts n=%d", n);
    std::size_t sink = 0;
    report(label, seconds([&] { sink += serial::detect_contacts(a, b, 8.0); }, reps),
           seconds([&] { sink += detect_contacts(a, b, 8.0); }, reps));
    std::snprintf(label, sizeof label, "nearest_distances n=%d", n);
    report(label, seconds([&] { sink += serial::nearest_distances(a, b).size(); }, reps),
           seconds([&] { sink += nearest_distances(a, b).size(); }, reps));
    std::snprintf(label, sizeof label, "interface_residues n=%d", n);
    report(label, seconds([&] { sink += serial::interface_residues(ca, cb, 8.0).a.size(); }, reps),
           seconds([&] { sink += interface_residues(ca, cb, 8.0).a.size(); }, reps));
    if (sink == 0) std::printf("(empty)\n");
  }

  // Candidate rollouts of one beam search round structure.
  const TaskSpec spec = hard_task();
  Model model(task_mixture_field(spec, kDefaultTranslationStd));
  const TargetContext ctx = make_context(spec, 0);
  SearchProblem p;
  p.model = &model;
  p.context = &ctx;
  p.schedule = Schedule(ScheduleSpec{.steps = 100});
  p.binder_length = static_cast<std::size_t>(spec.binder_length);
  p.decode = [](const Matrix& z) { return std::vector<int>(static_cast<std::size_t>(z.rows()), 0); };
  p.score = [&ctx](const Sample& s) { return evaluate_reward(s, ctx, RewardSpec::ipae_only()); };
  SearchConfig cfg;
  cfg.block_steps = 25;
  SearchConfig serial_cfg = cfg;
  serial_cfg.parallel = false;
  report("beam_search rollouts", seconds([&] { beam_search(p, serial_cfg, StreamKey{1}); }, 2),
         seconds([&] { beam_search(p, cfg, StreamKey{1}); }, 2));
  return 0;
}
