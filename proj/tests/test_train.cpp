#include <doctest.h>

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "flowbind/toytask.hpp"
#include "flowbind/train.hpp"
#include "helpers.hpp"

using namespace flowbind;
using namespace testutil;

TEST_CASE("first Adam step moves every parameter by lr against the gradient sign") {
  Adam opt(4);
  std::vector<double> p = {1.0, -2.0, 0.5, 3.0};
  const std::vector<double> g = {0.3, -7.0, 1e-3, 0.0};
  opt.step(p, g, 0.1);
  CHECK(p[0] == doctest::Approx(0.9));
  CHECK(p[1] == doctest::Approx(-1.9));
  CHECK(p[2] == doctest::Approx(0.4).epsilon(1e-4));
  CHECK(p[3] == 3.0);
}

TEST_CASE("Adam matches a hand-rolled recursion") {
  Adam opt(1);
  std::vector<double> p = {0.0};
  double m = 0, v = 0, x = 0.0;
  for (int t = 1; t <= 50; ++t) {
    const double g = 2.0 * (x - 3.0) + std::sin(t);
    opt.step(p, std::vector<double>{g}, 0.05);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 0.05 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    CHECK(p[0] == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("training lowers the loss and is reproducible") {
  const TaskSpec spec;
  const auto data = gen_toy_binder_dataset(StreamKey{91}, spec, 64);
  const auto items = training_items(data);
  MlpArchitecture arch;
  arch.hidden = 16;
  TrainConfig cfg;
  cfg.steps = 150;
  cfg.batch = 8;
  MlpField a = MlpField::random(arch, 1);
  MlpField b = MlpField::random(arch, 1);
  const TrainResult ra = train_field(a, items, cfg);
  const TrainResult rb = train_field(b, items, cfg);
  REQUIRE(ra.loss_trace.size() == 150);
  CHECK(ra.loss_trace == rb.loss_trace);
  CHECK(trace_tail_mean(ra.loss_trace, 0.2) < 0.8 * trace_tail_mean({ra.loss_trace.begin(), ra.loss_trace.begin() + 30}, 1.0));
  CHECK(ra.final_loss == doctest::Approx(trace_tail_mean(ra.loss_trace)));
}

TEST_CASE("trace tail mean") {
  CHECK(trace_tail_mean({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 0.2) == doctest::Approx(9.5));
  CHECK(trace_tail_mean({4.0}, 0.1) == 4.0);
}

TEST_CASE("divergence stops training") {
  const TaskSpec spec;
  const auto data = gen_toy_binder_dataset(StreamKey{92}, spec, 8);
  const auto items = training_items(data);
  MlpField f = MlpField::random(MlpArchitecture{.hidden = 4}, 2);
  TrainConfig cfg;
  cfg.steps = 5;
  cfg.divergence_threshold = 1e-9;
  try {
    train_field(f, items, cfg);
    FAIL("expected divergence");
  } catch (const TrainingDivergedError& e) {
    CHECK(e.step == 0);
  }
}

TEST_CASE("checkpoints round trip exactly") {
  const auto dir = fresh_dir("ckpt");
  MlpArchitecture arch;
  arch.hidden = 7;
  arch.layers = 3;
  arch.binder_com_feature = false;
  const MlpField f = MlpField::random(arch, 5);
  save_checkpoint(dir / "m.json", f);
  const MlpField g = load_mlp_checkpoint(dir / "m.json");
  CHECK(g.architecture() == arch);
  CHECK(std::equal(f.parameters().begin(), f.parameters().end(), g.parameters().begin(), g.parameters().end()));

  const ToyCodec c = ToyCodec::random(8, 3);
  save_checkpoint(dir / "c.json", c);
  const ToyCodec d = load_codec_checkpoint(dir / "c.json");
  CHECK(std::equal(c.parameters().begin(), c.parameters().end(), d.parameters().begin(), d.parameters().end()));

  CHECK_THROWS_AS(load_codec_checkpoint(dir / "m.json"), CheckpointError);
  CHECK_THROWS_AS(load_mlp_checkpoint(dir / "missing.json"), CheckpointError);

  nlohmann::json j = nlohmann::json::parse(slurp(dir / "m.json"));
  j["version"] = kCheckpointVersion + 1;
  write_file_atomic(dir / "future.json", j.dump());
  try {
    load_mlp_checkpoint(dir / "future.json");
    FAIL("expected a version error");
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
  j["version"] = kCheckpointVersion;
  j["parameters"].erase(0);
  write_file_atomic(dir / "short.json", j.dump());
  CHECK_THROWS_AS(load_mlp_checkpoint(dir / "short.json"), CheckpointError);
  write_file_atomic(dir / "garbage.json", "{not json");
  CHECK_THROWS_AS(load_mlp_checkpoint(dir / "garbage.json"), CheckpointError);
}

TEST_CASE("atomic writes replace whole files and leave no temporaries") {
  const auto dir = fresh_dir("atomic");
  write_file_atomic(dir / "a.txt", "first version, rather long\n");
  write_file_atomic(dir / "a.txt", "second\n");
  CHECK(slurp(dir / "a.txt") == "second\n");
  int files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) files += e.is_regular_file();
  CHECK(files == 1);
  write_file_atomic(dir / "sub" / "dir" / "b.txt", "x");
  CHECK(slurp(dir / "sub" / "dir" / "b.txt") == "x");
  // A regular file in the way of the parent directory.
  CHECK_THROWS(write_file_atomic(dir / "a.txt" / "c.txt", "x"));
}
