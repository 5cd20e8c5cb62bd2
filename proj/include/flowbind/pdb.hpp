#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "flowbind/geom.hpp"

namespace flowbind {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class EmptyStructureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Reads alpha-carbon ATOM/HETATM records of the first model. One PointChain
// per chain identifier, in order of first appearance; chain_id holds the
// identifier's character code.
Complex parse_structure(std::string_view text);
Complex read_structure_file(const std::string& path);

// Toy label alphabet <-> three-letter residue names used in written files.
std::string label_residue_name(int label);
int residue_name_label(std::string_view name);

// Writes CA-only ATOM records. `labels`, when given, holds one label vector
// per chain and selects residue names.
std::string write_structure(const Complex& c, const std::vector<std::vector<int>>* labels = nullptr);
void write_structure_file(const std::string& path, const Complex& c,
                          const std::vector<std::vector<int>>* labels = nullptr);

char chain_letter(int chain_id);

}  // namespace flowbind
