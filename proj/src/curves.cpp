#include "flowbind/curves.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "flowbind/train.hpp"

namespace flowbind {

using nlohmann::json;

void ScalingCurve::validate() const {
  if (algorithm.empty()) throw CurveError("curve without an algorithm name");
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (!(points[i].compute > points[i - 1].compute))
      throw CurveError("curve '" + algorithm + "': compute values must be strictly increasing");
    if (points[i].unique_successes < points[i - 1].unique_successes)
      throw CurveError("curve '" + algorithm + "': unique successes must be nondecreasing");
  }
}

ScalingCurve curve_from_manifest(const json& m) {
  ScalingCurve c;
  try {
    c.algorithm = m.at("algorithm").get<std::string>();
    c.compute_unit = m.at("compute_unit").get<std::string>();
    for (const auto& p : m.at("curve")) c.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  } catch (const json::exception& e) {
    throw CurveError(std::string("manifest lacks curve fields: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

// Value of a step function at x: the last point at or before x, else 0.
double step_value(const ScalingCurve& c, double x) {
  double v = 0.0;
  for (const auto& p : c.points) {
    if (p.compute > x) break;
    v = p.unique_successes;
  }
  return v;
}

}  // namespace

std::vector<ScalingCurve> combine_curves(const std::vector<ScalingCurve>& curves) {
  if (curves.empty()) throw CurveError("no curves to combine");
  for (const auto& c : curves) {
    if (c.compute_unit != curves.front().compute_unit)
      throw CurveError("inconsistent compute units: '" + curves.front().compute_unit + "' and '" + c.compute_unit + "'");
    c.validate();
  }
  std::map<std::string, std::vector<const ScalingCurve*>> groups;
  for (const auto& c : curves) groups[c.algorithm].push_back(&c);
  std::vector<ScalingCurve> out;
  for (const auto& [name, group] : groups) {
    if (group.size() == 1) {
      out.push_back(*group.front());
      continue;
    }
    std::set<double> xs;
    for (const auto* c : group)
      for (const auto& p : c->points) xs.insert(p.compute);
    ScalingCurve merged;
    merged.algorithm = name;
    merged.compute_unit = group.front()->compute_unit;
    for (double x : xs) {
      double sum = 0.0;
      for (const auto* c : group) sum += step_value(*c, x);
      merged.points.push_back({x, sum / static_cast<double>(group.size())});
    }
    out.push_back(std::move(merged));
  }
  return out;
}

std::string curves_to_csv(const std::vector<ScalingCurve>& curves) {
  std::ostringstream os;
  os << "algorithm,compute_unit,compute,unique_successes\n";
  char buf[64];
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      os << c.algorithm << ',' << c.compute_unit << ',';
      std::snprintf(buf, sizeof buf, "%.17g", p.compute);
      os << buf << ',';
      std::snprintf(buf, sizeof buf, "%.17g", p.unique_successes);
      os << buf << '\n';
    }
  }
  return os.str();
}

std::vector<ScalingCurve> parse_curves_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "algorithm,compute_unit,compute,unique_successes")
    throw CurveError("curve CSV: unexpected header");
  std::vector<ScalingCurve> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 4) throw CurveError("curve CSV line " + std::to_string(lineno) + ": expected 4 fields");
    if (out.empty() || out.back().algorithm != f[0]) {
      out.push_back({});
      out.back().algorithm = f[0];
      out.back().compute_unit = f[1];
    }
    try {
      out.back().points.push_back({std::stod(f[2]), std::stod(f[3])});
    } catch (const std::exception&) {
      throw CurveError("curve CSV line " + std::to_string(lineno) + ": bad number");
    }
  }
  return out;
}

std::string curves_to_svg(const std::vector<ScalingCurve>& curves) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  const double w = 640, h = 400, ml = 60, mr = 140, mt = 20, mb = 50;
  double xmax = 0.0, ymax = 0.0;
  for (const auto& c : curves)
    for (const auto& p : c.points) {
      xmax = std::max(xmax, p.compute);
      ymax = std::max(ymax, p.unique_successes);
    }
  if (xmax <= 0.0) xmax = 1.0;
  if (ymax <= 0.0) ymax = 1.0;
  auto sx = [&](double x) { return ml + (w - ml - mr) * x / xmax; };
  auto sy = [&](double y) { return h - mb - (h - mt - mb) * y / ymax; };
  std::ostringstream os;
  char buf[128];
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", ml, h - mb,
                w - mr, h - mb);
  os << buf;
  std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", ml, mt, ml,
                h - mb);
  os << buf;
  const std::string unit = curves.empty() ? "forward_calls" : curves.front().compute_unit;
  os << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\" font-size=\"13\">"
     << unit << " (max " << xmax << ")</text>\n";
  os << "<text x=\"16\" y=\"" << (mt + h - mb) / 2 << "\" font-size=\"13\" transform=\"rotate(-90 16 "
     << (mt + h - mb) / 2 << ")\" text-anchor=\"middle\">unique successes (max " << ymax << ")</text>\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* col = colors[i % 6];
    os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" data-algorithm=\"" << curves[i].algorithm
       << "\" points=\"";
    for (std::size_t k = 0; k < curves[i].points.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%s%.3f,%.3f", k ? " " : "", sx(curves[i].points[k].compute),
                    sy(curves[i].points[k].unique_successes));
      os << buf;
    }
    os << "\"/>\n";
    os << "<text x=\"" << w - mr + 10 << "\" y=\"" << mt + 18 * (i + 1) << "\" fill=\"" << col
       << "\" font-size=\"13\">" << curves[i].algorithm << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

CurveFiles emit_curves(const std::vector<json>& manifests, const std::filesystem::path& prefix) {
  if (manifests.empty()) throw CurveError("emit_curves needs at least one manifest");
  std::vector<ScalingCurve> curves;
  for (const auto& m : manifests) curves.push_back(curve_from_manifest(m));
  const auto combined = combine_curves(curves);
  CurveFiles f{prefix, prefix};
  f.csv += ".csv";
  f.svg += ".svg";
  if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
  write_file_atomic(f.csv, curves_to_csv(combined));
  write_file_atomic(f.svg, curves_to_svg(combined));
  return f;
}

}  // namespace flowbind
