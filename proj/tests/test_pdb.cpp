#include <doctest.h>

#include <string>

#include "flowbind/pdb.hpp"
#include "helpers.hpp"

using namespace flowbind;
using namespace testutil;

namespace {
const std::string kFixtureDir = std::string(FLOWBIND_SOURCE_DIR) + "/tests/fixtures/";
}

TEST_CASE("fixture parses to the hand-read coordinates") {
  const Complex c = read_structure_file(kFixtureDir + "two_chains.pdb");
  REQUIRE(c.chains.size() == 2);  // chain C sits after ENDMDL
  const PointChain& a = c.chains[0];
  CHECK(a.chain_id == 'A');
  REQUIRE(a.size() == 3);
  CHECK(a.residue_ids == std::vector<int>{1, 2, 3});
  CHECK(a.coords(0, 0) == doctest::Approx(11.104));
  CHECK(a.coords(0, 2) == doctest::Approx(13.312));
  CHECK(a.coords(2, 0) == doctest::Approx(17.1));  // altloc A kept, B dropped
  const PointChain& b = c.chains[1];
  CHECK(b.chain_id == 'B');
  CHECK(b.residue_ids == std::vector<int>{10, 11});
  CHECK(b.coords(0, 2) == doctest::Approx(2.25));  // HETATM accepted
  CHECK(b.coords(1, 1) == doctest::Approx(1.125));
}

TEST_CASE("write then parse round-trips to printed precision") {
  Random rng(StreamKey{21});
  for (int trial = 0; trial < 10; ++trial) {
    Complex c;
    for (int k = 0; k < 3; ++k) {
      PointChain ch = PointChain::from_coords(random_coords(rng, 5 + trial, 30.0), 'A' + k);
      c.chains.push_back(ch);
    }
    const Complex back = parse_structure(write_structure(c));
    REQUIRE(back.chains.size() == c.chains.size());
    for (std::size_t k = 0; k < c.chains.size(); ++k) {
      CHECK(back.chains[k].residue_ids == c.chains[k].residue_ids);
      CHECK(back.chains[k].chain_id == c.chains[k].chain_id);
      CHECK((back.chains[k].coords - c.chains[k].coords).cwiseAbs().maxCoeff() <= 5e-4 + 1e-12);
    }
  }
}

TEST_CASE("labels choose residue names") {
  Complex c;
  c.chains.push_back(PointChain::from_coords(Coords::Zero(4, 3), 'A'));
  const std::vector<std::vector<int>> labels = {{0, 1, 2, 3}};
  const std::string text = write_structure(c, &labels);
  CHECK(text.find("LEU A   1") != std::string::npos);
  CHECK(text.find("LYS A   4") != std::string::npos);
  for (int l = 0; l < 4; ++l) CHECK(residue_name_label(label_residue_name(l)) == l);
  CHECK(residue_name_label("TRP") == -1);
}

TEST_CASE("malformed input reports the offending line") {
  const std::string good = "ATOM      1  CA  GLY A   1       1.000   2.000   3.000  1.00  0.00           C\n";
  std::string bad = good;
  bad.replace(25, 1, "2");
  bad.replace(38, 8, "  1.0x00");
  try {
    parse_structure("REMARK\n" + good + bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("y coordinate") != std::string::npos);
  }
  try {
    parse_structure(good + "ATOM      2  CA  GLY A\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  try {
    parse_structure(good + good);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);  // residue numbers must increase
  }
}

TEST_CASE("structures without CA records are empty") {
  CHECK_THROWS_AS(parse_structure(""), EmptyStructureError);
  CHECK_THROWS_AS(parse_structure("HEADER x\nREMARK y\nEND\n"), EmptyStructureError);
  CHECK_THROWS_AS(
      parse_structure("ATOM      1  N   GLY A   1       1.000   2.000   3.000  1.00  0.00           N\n"),
      EmptyStructureError);
  CHECK_THROWS(read_structure_file(kFixtureDir + "does_not_exist.pdb"));
}
