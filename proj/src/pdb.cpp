#include "flowbind/pdb.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace flowbind {

namespace {

constexpr std::array<const char*, 4> kLabelNames = {"LEU", "SER", "GLU", "LYS"};

std::string_view field(std::string_view line, std::size_t start, std::size_t len) {
  if (start >= line.size()) return {};
  return line.substr(start, std::min(len, line.size() - start));
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view s, std::size_t line, const char* what) {
  s = trim(s);
  if (s.empty()) throw ParseError(line, std::string("missing ") + what);
  // std::from_chars for double is available in libstdc++ 11.
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError(line, std::string("malformed ") + what + " '" + std::string(s) + "'");
  return v;
}

int parse_int(std::string_view s, std::size_t line, const char* what) {
  s = trim(s);
  if (s.empty()) throw ParseError(line, std::string("missing ") + what);
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError(line, std::string("malformed ") + what + " '" + std::string(s) + "'");
  return v;
}

struct ChainBuilder {
  int chain_id = 0;
  std::vector<Vec3> points;
  std::vector<int> ids;
};

}  // namespace

char chain_letter(int chain_id) {
  if (chain_id >= 33 && chain_id <= 126) return static_cast<char>(chain_id);
  const int k = ((chain_id % 26) + 26) % 26;
  return static_cast<char>('A' + k);
}

std::string label_residue_name(int label) {
  if (label < 0 || label >= static_cast<int>(kLabelNames.size())) return "GLY";
  return kLabelNames[static_cast<std::size_t>(label)];
}

int residue_name_label(std::string_view name) {
  for (std::size_t i = 0; i < kLabelNames.size(); ++i)
    if (name == kLabelNames[i]) return static_cast<int>(i);
  return -1;
}

Complex parse_structure(std::string_view text) {
  std::vector<ChainBuilder> chains;
  std::map<char, std::size_t> index;
  std::size_t atom_records = 0;
  std::size_t line_no = 0;

  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;

    const std::string_view rec = field(line, 0, 6);
    if (rec.starts_with("ENDMDL")) break;
    const bool is_atom = rec == "ATOM  " || rec == "ATOM" || rec == "HETATM";
    if (!is_atom) continue;
    ++atom_records;
    if (line.size() < 54) throw ParseError(line_no, "ATOM record shorter than 54 columns");

    const std::string_view name = trim(field(line, 12, 4));
    const char alt = line[16];
    if (name != "CA") continue;
    if (alt != ' ' && alt != 'A') continue;

    const char chain = line[21];
    const int resseq = parse_int(field(line, 22, 4), line_no, "residue number");
    const Vec3 p(parse_double(field(line, 30, 8), line_no, "x coordinate"),
                 parse_double(field(line, 38, 8), line_no, "y coordinate"),
                 parse_double(field(line, 46, 8), line_no, "z coordinate"));

    auto [it, inserted] = index.try_emplace(chain, chains.size());
    if (inserted) chains.push_back({static_cast<int>(static_cast<unsigned char>(chain)), {}, {}});
    ChainBuilder& b = chains[it->second];
    if (!b.ids.empty() && resseq <= b.ids.back())
      throw ParseError(line_no, "residue number " + std::to_string(resseq) +
                                    " does not increase within chain " + std::string(1, chain));
    b.points.push_back(p);
    b.ids.push_back(resseq);
  }

  if (atom_records == 0 || chains.empty())
    throw EmptyStructureError("structure has no alpha-carbon ATOM records");

  Complex out;
  for (auto& b : chains) {
    PointChain c;
    c.chain_id = b.chain_id;
    c.residue_ids = std::move(b.ids);
    c.coords.resize(static_cast<Eigen::Index>(b.points.size()), 3);
    for (std::size_t i = 0; i < b.points.size(); ++i)
      c.coords.row(static_cast<Eigen::Index>(i)) = b.points[i].transpose();
    out.chains.push_back(std::move(c));
  }
  return out;
}

Complex read_structure_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_structure(ss.str());
}

std::string write_structure(const Complex& c, const std::vector<std::vector<int>>* labels) {
  std::string out;
  char buf[96];
  int serial = 1;
  for (std::size_t ci = 0; ci < c.chains.size(); ++ci) {
    const PointChain& ch = c.chains[ci];
    const char letter = chain_letter(ch.chain_id);
    for (std::size_t i = 0; i < ch.size(); ++i) {
      int label = -1;
      if (labels && ci < labels->size() && i < (*labels)[ci].size()) label = (*labels)[ci][i];
      const std::string res = label >= 0 ? label_residue_name(label) : "GLY";
      std::snprintf(buf, sizeof buf, "ATOM  %5d  CA  %3s %c%4d    %8.3f%8.3f%8.3f%6.2f%6.2f           C\n",
                    serial++ % 100000, res.c_str(), letter, ch.residue_ids[i] % 10000,
                    ch.coords(static_cast<Eigen::Index>(i), 0), ch.coords(static_cast<Eigen::Index>(i), 1),
                    ch.coords(static_cast<Eigen::Index>(i), 2), 1.0, 0.0);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, "TER\n");
    out += buf;
  }
  out += "END\n";
  return out;
}

void write_structure_file(const std::string& path, const Complex& c,
                          const std::vector<std::vector<int>>* labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << write_structure(c, labels);
}

}  // namespace flowbind
