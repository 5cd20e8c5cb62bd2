#include <doctest.h>

#include <cmath>
#include <map>

#include "flowbind/toytask.hpp"
#include "helpers.hpp"

using namespace flowbind;
using namespace testutil;

TEST_CASE("target points lie on the sphere") {
  for (const TaskSpec& spec : {TaskSpec{}, ablation_task(), hard_task()}) {
    const Coords p = target_points(spec);
    REQUIRE(p.rows() == spec.target_points);
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      CHECK((p.row(i).transpose() - spec.target_center).norm() == doctest::Approx(spec.target_radius));
  }
}

TEST_CASE("contexts flag the anchor and its neighbourhood") {
  TaskSpec spec;
  const TargetContext c = make_context(spec, 2);
  CHECK(c.hotspot_count() == 1);
  CHECK(c.hotspot[static_cast<std::size_t>(spec.sites[2])] == 1);
  CHECK((c.hotspot_centroid() - Vec3(c.points.row(spec.sites[2]).transpose())).norm() < 1e-12);

  const TaskSpec hard = hard_task();
  const Coords pts = target_points(hard);
  const TargetContext h = make_context(hard, 0);
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double d = (pts.row(static_cast<Eigen::Index>(i)) - pts.row(hard.sites[0])).norm();
    CHECK((h.hotspot[i] != 0) == (d <= hard.hotspot_radius));
  }
  CHECK_THROWS_AS(make_context(spec, 99), ArgumentError);
}

TEST_CASE("hard task sites are well separated") {
  const TaskSpec hard = hard_task();
  const Coords pts = target_points(hard);
  for (std::size_t a = 0; a < hard.sites.size(); ++a)
    for (std::size_t b = a + 1; b < hard.sites.size(); ++b)
      CHECK((pts.row(hard.sites[a]) - pts.row(hard.sites[b])).norm() > 1.5);
}

TEST_CASE("template spacing") {
  SUBCASE("straight templates keep the bond length") {
    const TaskSpec spec;
    const Coords t = template_traces(spec)[0];
    REQUIRE(t.rows() == spec.binder_length);
    for (Eigen::Index i = 1; i < t.rows(); ++i)
      CHECK((t.row(i) - t.row(i - 1)).norm() == doctest::Approx(spec.bond_length));
  }
  SUBCASE("arcs have equal chords no longer than the bond") {
    TaskSpec spec;
    spec.templates = 4;
    spec.curvature_min = 0.5;
    spec.curvature_max = 2.0;
    for (const Coords& t : template_traces(spec)) {
      const double first = (t.row(1) - t.row(0)).norm();
      CHECK(first <= spec.bond_length);
      for (Eigen::Index i = 2; i < t.rows(); ++i) CHECK((t.row(i) - t.row(i - 1)).norm() == doctest::Approx(first));
    }
  }
  SUBCASE("hard task templates are distinct") {
    const TaskSpec hard = hard_task();
    const auto traces = template_traces(hard);
    REQUIRE(static_cast<int>(traces.size()) == hard.templates);
    for (std::size_t a = 1; a < traces.size(); ++a) CHECK(kabsch_align(traces[a], traces[0]).rmsd > 1e-3);
  }
}

TEST_CASE("component means hover above their anchor") {
  const TaskSpec spec;
  const auto traces = template_traces(spec);
  const Coords target = target_points(spec);
  for (int s = 0; s < static_cast<int>(spec.sites.size()); ++s) {
    const Coords m = component_mean(spec, traces, 0, s);
    const Vec3 anchor = target.row(spec.sites[static_cast<std::size_t>(s)]).transpose();
    const Vec3 normal = (anchor - spec.target_center).normalized();
    // Rigid placement: the trace's shape is unchanged.
    CHECK(kabsch_align(traces[0], m).rmsd < 1e-9);
    // A straight trace is symmetric about its midpoint, which sits at the standoff.
    CHECK((centroid(m) - (anchor + spec.standoff * normal)).norm() < 1e-12);
    CHECK((centroid(m) - anchor).dot(normal) > 0.0);
  }
}

TEST_CASE("interface labels") {
  Coords target(1, 3), binder(4, 3);
  target << 0, 0, 0;
  binder << 0.5, 0, 0, 1.0, 0, 0, 0, 0.79, 0, 5, 5, 5;
  CHECK(interface_labels(binder, target) == std::vector<int>{0, 2, 0, 1});
}

TEST_CASE("dataset is reproducible and consistent with its task") {
  const TaskSpec spec;
  const auto a = gen_toy_binder_dataset(StreamKey{81}, spec, 300);
  const auto b = gen_toy_binder_dataset(StreamKey{81}, spec, 300);
  REQUIRE(a.size() == 300);
  std::map<int, int> per_site;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].clean.coords == b[i].clean.coords);
    CHECK(a[i].clean.latents == b[i].clean.latents);
    CHECK(a[i].clean.coords.rows() == spec.binder_length);
    CHECK(a[i].clean.latents.cols() == spec.latent_dim);
    ++per_site[a[i].site];
    // Each binder reaches its hotspot.
    bool touch = false;
    for (std::size_t k = 0; k < a[i].context.size(); ++k)
      if (a[i].context.hotspot[k])
        for (char c : within_cutoff(a[i].clean.coords, a[i].context.points.row(static_cast<Eigen::Index>(k)),
                                    kInterfaceCutoffUnits))
          touch |= c != 0;
    CHECK(touch);
    // The label one-hot sits in the first latent channels, under small noise.
    for (Eigen::Index r = 0; r < a[i].clean.latents.rows(); ++r) {
      Eigen::Index k;
      a[i].clean.latents.row(r).head(kLabelAlphabet).maxCoeff(&k);
      CHECK(k == a[i].labels[static_cast<std::size_t>(r)]);
    }
  }
  // Uniform site weights: each of 5 sites near 60 of 300.
  for (auto [site, count] : per_site) CHECK(std::abs(count - 60) < 30);
  const auto c = gen_toy_binder_dataset(StreamKey{82}, spec, 3);
  CHECK(c[0].clean.coords != a[0].clean.coords);
}

TEST_CASE("task parameter validation") {
  TaskSpec s;
  s.sites = {};
  CHECK_THROWS_AS(s.validate(), ArgumentError);
  s = TaskSpec{};
  s.sites = {0, 99};
  CHECK_THROWS_AS(s.validate(), ArgumentError);
  s = TaskSpec{};
  s.site_weights = {1, 1};
  CHECK_THROWS_AS(s.validate(), ArgumentError);
  s.site_weights = {0, 0, 0, 0, 0};
  CHECK_THROWS_AS(s.validate(), ArgumentError);
  s = TaskSpec{};
  s.latent_dim = 3;
  CHECK_THROWS_AS(s.validate(), ArgumentError);
  s = TaskSpec{};
  s.site_weights = {1, 0, 0, 0, 3};
  const auto w = s.normalized_site_weights();
  CHECK(w[0] == doctest::Approx(0.25));
  CHECK(w[1] == 0.0);
}

TEST_CASE("task mixture field has one component per site and template") {
  const TaskSpec hard = hard_task();
  CHECK(task_mixture_field(hard, 0.2)->components().size() == hard.sites.size() * static_cast<std::size_t>(hard.templates));
  const auto one = task_mixture_field(hard, 0.2, 3);
  CHECK(one->components().size() == static_cast<std::size_t>(hard.templates));
  const auto traces = template_traces(hard);
  CHECK(one->components()[0].mean == component_mean(hard, traces, 0, 3));
  CHECK(one->noise().c_d == 0.2);
}
