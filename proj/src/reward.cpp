#include "flowbind/reward.hpp"

#include <unistd.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "flowbind/pdb.hpp"

namespace flowbind {

RewardGeometry RewardGeometry::from_model_units(const Coords& binder, const TargetContext& ctx) {
  return {binder * kAngstromPerUnit, ctx.points * kAngstromPerUnit, ctx.hotspot};
}

namespace {

Coords hotspot_points(const RewardGeometry& g) {
  if (g.hotspot.size() != static_cast<std::size_t>(g.target.rows()))
    throw ArgumentError("reward: hotspot flags do not match target points");
  std::size_t n = 0;
  for (char f : g.hotspot) n += f ? 1 : 0;
  if (n == 0) throw ArgumentError("reward: target has no hotspot");
  Coords h(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0, r = 0; i < g.hotspot.size(); ++i)
    if (g.hotspot[i]) h.row(static_cast<Eigen::Index>(r++)) = g.target.row(static_cast<Eigen::Index>(i));
  return h;
}

}  // namespace

double proxy_ipae_from_distance(double d, double scale) {
  if (std::isinf(d)) return kIpaeCeiling;
  return kIpaeCeiling * (1.0 - std::exp(-d / scale));
}

double proxy_ipae(const RewardGeometry& g, double scale) {
  if (!(scale > 0.0)) throw ArgumentError("proxy_ipae: scale must be positive");
  const Coords hot = hotspot_points(g);
  if (g.binder.rows() == 0) return kIpaeCeiling;
  const std::vector<double> d = nearest_distances(g.binder, hot);
  double s = 0.0;
  for (double x : d) s += x;
  return proxy_ipae_from_distance(s / static_cast<double>(d.size()), scale);
}

double contact_count_reward(const RewardGeometry& g, double radius) {
  return static_cast<double>(detect_contacts(g.binder, g.target, radius));
}

double com_placement_reward(const RewardGeometry& g) {
  const Coords hot = hotspot_points(g);
  return -(centroid(g.binder) - centroid(hot)).norm();
}

double interface_label_fraction(const RewardGeometry& g, const std::vector<int>& labels, double cutoff) {
  if (labels.size() != static_cast<std::size_t>(g.binder.rows()))
    throw ArgumentError("interface_label_fraction: label count mismatch");
  if (labels.empty()) return 0.0;
  const std::vector<char> near = within_cutoff(g.binder, g.target, cutoff);
  std::size_t good = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) good += (near[i] != 0) == (labels[i] == 0) ? 1 : 0;
  return static_cast<double>(good) / static_cast<double>(labels.size());
}

double RewardSpec::default_normalizer(const std::string& name) {
  if (name == "proxy_ipae") return kIpaeCeiling;
  if (name == "contact_count") return 10.0;
  return 1.0;
}

void RewardSpec::validate() const {
  for (const auto& t : terms) {
    if (t.name != "proxy_ipae" && t.name != "contact_count" && t.name != "com_placement" && t.name != "custom")
      throw ConfigError("reward: unknown component '" + t.name + "'");
    if (!std::isfinite(t.weight)) throw ConfigError("reward: weight of '" + t.name + "' is not finite");
    if (!(t.normalizer > 0.0) || !std::isfinite(t.normalizer))
      throw ConfigError("reward: normalizer of '" + t.name + "' must be positive");
    if (t.name == "custom") {
      if (t.scorer.empty() == t.command.empty())
        throw ConfigError("reward: a custom term needs exactly one of 'scorer' or 'command'");
      if (!t.scorer.empty() && t.scorer != "interface_label_fraction")
        throw ConfigError("reward: unknown custom scorer '" + t.scorer + "'");
    }
  }
  if (!(contact_radius > 0.0) || !(ipae_scale > 0.0)) throw ConfigError("reward: radii must be positive");
}

RewardSpec RewardSpec::ipae_only() {
  RewardSpec s;
  s.terms.push_back({"proxy_ipae", 1.0, kIpaeCeiling, "", ""});
  return s;
}

double normalize_reward(const RewardComponents& raw, const RewardSpec& spec) {
  spec.validate();
  double total = 0.0;
  for (const auto& t : spec.terms) {
    auto it = raw.find(t.name);
    if (it == raw.end()) throw ConfigError("reward: component '" + t.name + "' was not evaluated");
    const double v = t.name == "proxy_ipae" ? kIpaeCeiling - it->second : it->second;
    total += t.weight * (v / t.normalizer);
  }
  return total;
}

double run_external_scorer(const std::string& command, const std::string& structure_path) {
  const std::string cmd = command + " '" + structure_path + "'";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("external scorer: cannot start '" + command + "'");
  std::string out;
  std::array<char, 256> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) out += buf.data();
  const int status = ::pclose(pipe);
  if (status != 0) throw std::runtime_error("external scorer '" + command + "' exited with status " + std::to_string(status));
  std::istringstream is(out);
  double v;
  if (!(is >> v)) throw std::runtime_error("external scorer '" + command + "' printed no number");
  return v;
}

namespace {

double external_term(const std::string& command, const Sample& sample, const TargetContext& ctx) {
  Complex c;
  c.chains.push_back(to_angstrom_chain(ctx.points, 'A'));
  c.chains.push_back(to_angstrom_chain(sample.state.coords, 'B'));
  c.binder_index = 1;
  std::vector<std::vector<int>> labels{std::vector<int>(ctx.size(), -1), sample.labels};
  std::string tmpl = (std::filesystem::temp_directory_path() / "flowbind-score-XXXXXX").string();
  std::vector<char> name(tmpl.begin(), tmpl.end());
  name.push_back('\0');
  const int fd = ::mkstemp(name.data());
  if (fd < 0) throw std::runtime_error("external scorer: cannot create a temporary file");
  ::close(fd);
  const std::string path(name.data());
  try {
    write_structure_file(path, c, &labels);
    const double v = run_external_scorer(command, path);
    std::filesystem::remove(path);
    return v;
  } catch (...) {
    std::filesystem::remove(path);
    throw;
  }
}

}  // namespace

RewardBreakdown evaluate_reward(const Sample& sample, const TargetContext& ctx, const RewardSpec& spec) {
  const RewardGeometry g = RewardGeometry::from_model_units(sample.state.coords, ctx);
  RewardBreakdown b;
  b.raw["proxy_ipae"] = proxy_ipae(g, spec.ipae_scale);
  b.raw["contact_count"] = contact_count_reward(g, spec.contact_radius);
  b.raw["com_placement"] = com_placement_reward(g);
  for (const auto& t : spec.terms) {
    if (t.name != "custom") continue;
    b.raw["custom"] = t.command.empty() ? interface_label_fraction(g, sample.labels)
                                        : external_term(t.command, sample, ctx);
  }
  b.total = normalize_reward(b.raw, spec);
  return b;
}

}  // namespace flowbind
