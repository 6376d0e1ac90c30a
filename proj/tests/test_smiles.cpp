// SPDX-License-Identifier: Apache-2.0
#include "dta/smiles.hpp"

#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dta/rng.hpp"

using dta::kAtomFeatureCount;
using dta::MolecularGraph;
using dta::parse_smiles;
using dta::SmilesError;

namespace {

struct CorpusRow {
  std::string name;
  std::string smiles;
  int atoms = 0;
  int bonds = 0;
};

std::vector<CorpusRow> load_corpus() {
  const std::string path = std::string(DTA_TEST_DATA_DIR) + "/smiles_corpus.tsv";
  std::ifstream in(path);
  REQUIRE_MESSAGE(in.good(), "missing corpus file ", path);
  std::vector<CorpusRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    CorpusRow row;
    std::string atoms, bonds;
    std::getline(ls, row.name, '\t');
    std::getline(ls, row.smiles, '\t');
    std::getline(ls, atoms, '\t');
    std::getline(ls, bonds, '\t');
    row.atoms = std::stoi(atoms);
    row.bonds = std::stoi(bonds);
    rows.push_back(std::move(row));
  }
  return rows;
}

// Structural invariants that must hold for every successfully parsed graph.
void check_invariants(const MolecularGraph& g) {
  const int n = g.atom_count();
  REQUIRE(static_cast<int>(g.adjacency.size()) == n * n);
  REQUIRE(static_cast<int>(g.atom_features.size()) == n * kAtomFeatureCount);
  for (int i = 0; i < n; ++i) {
    CHECK(g.adjacency[static_cast<size_t>(i) * n + i] == 0);
    for (int j = 0; j < n; ++j) {
      CHECK(g.adjacency[static_cast<size_t>(i) * n + j] ==
            g.adjacency[static_cast<size_t>(j) * n + i]);
    }
  }
  // Degree recomputed from adjacency matches the atom record.
  for (int i = 0; i < n; ++i) {
    int deg = 0;
    for (int j = 0; j < n; ++j) deg += g.adjacency[static_cast<size_t>(i) * n + j];
    CHECK(deg == g.atoms[static_cast<size_t>(i)].degree);
    if (n > 1) CHECK(deg >= 1);
  }
  // Each one-hot group sums to exactly 1; whole row sums to 4 + flag.
  for (int i = 0; i < n; ++i) {
    const double* row = g.atom_features.data() +
                        static_cast<size_t>(i) * kAtomFeatureCount;
    auto group_sum = [row](int lo, int hi) {
      double s = 0.0;
      for (int c = lo; c < hi; ++c) s += row[c];
      return s;
    };
    CHECK(group_sum(0, 11) == 1.0);
    CHECK(group_sum(11, 18) == 1.0);
    CHECK(group_sum(18, 23) == 1.0);
    CHECK((row[23] == 0.0 || row[23] == 1.0));
    CHECK(group_sum(24, 30) == 1.0);
    CHECK(group_sum(0, 30) == 4.0 + row[23]);
  }
}

}  // namespace

TEST_CASE("corpus parses with expected atom and bond counts") {
  const auto rows = load_corpus();
  REQUIRE(rows.size() >= 50);
  for (const auto& row : rows) {
    CAPTURE(row.name);
    CAPTURE(row.smiles);
    const MolecularGraph g = parse_smiles(row.smiles);
    CHECK(g.atom_count() == row.atoms);
    CHECK(g.bond_count() == row.bonds);
    CHECK(g.smiles_source == row.smiles);
    check_invariants(g);
  }
}

TEST_CASE("methane feature row") {
  const MolecularGraph g = parse_smiles("C");
  REQUIRE(g.atom_count() == 1);
  REQUIRE(g.bond_count() == 0);
  std::vector<double> expected(kAtomFeatureCount, 0.0);
  expected[0] = 1.0;       // element C
  expected[11 + 0] = 1.0;  // degree 0
  expected[18 + 2] = 1.0;  // charge 0
  expected[24 + 4] = 1.0;  // four hydrogens
  CHECK(g.atom_features == expected);
}

TEST_CASE("ethane adjacency") {
  const MolecularGraph g = parse_smiles("CC");
  REQUIRE(g.atom_count() == 2);
  REQUIRE(g.bond_count() == 1);
  CHECK(g.adjacency == std::vector<uint8_t>{0, 1, 1, 0});
}

TEST_CASE("benzene ring") {
  const MolecularGraph g = parse_smiles("c1ccccc1");
  REQUIRE(g.atom_count() == 6);
  REQUIRE(g.bond_count() == 6);
  for (const auto& atom : g.atoms) {
    CHECK(atom.element == "C");
    CHECK(atom.aromatic);
    CHECK(atom.degree == 2);
    CHECK(atom.total_h() == 1);
  }
  for (const auto& bond : g.bonds) CHECK(bond.order == dta::BondOrder::Aromatic);
}

TEST_CASE("aspirin heavy-atom graph") {
  const MolecularGraph g = parse_smiles("CC(=O)Oc1ccccc1C(=O)O");
  CHECK(g.atom_count() == 13);
  CHECK(g.bond_count() == 13);
  check_invariants(g);
}

TEST_CASE("hydrogen counting follows the valence tables") {
  CHECK(parse_smiles("c1ccncc1").atoms[3].total_h() == 0);   // pyridine n
  CHECK(parse_smiles("c1cc[nH]c1").atoms[3].total_h() == 1); // written count
  CHECK(parse_smiles("c1ccoc1").atoms[3].total_h() == 0);    // O valence 2 clamps
  CHECK(parse_smiles("[NH4+]").atoms[0].total_h() == 4);
  CHECK(parse_smiles("[NH4+]").atoms[0].formal_charge == 1);
  CHECK(parse_smiles("CS").atoms[1].total_h() == 1);          // S picks valence 2
  CHECK(parse_smiles("CS(=O)(=O)C").atoms[1].total_h() == 0); // S picks valence 6
  CHECK(parse_smiles("OP(=O)(O)O").atoms[1].total_h() == 0);  // P picks valence 5
  CHECK(parse_smiles("CP").atoms[1].total_h() == 2);          // P picks valence 3
  CHECK(parse_smiles("C#N").atoms[1].total_h() == 0);
  CHECK(parse_smiles("[Fe+2]").atoms[0].formal_charge == 2);
  CHECK(parse_smiles("[Fe++]").atoms[0].formal_charge == 2);
  CHECK(parse_smiles("[O-]O").atoms[0].total_h() == 0);       // bracket atoms: written count only
}

TEST_CASE("bond orders and ring-closure bonds") {
  const MolecularGraph ethene = parse_smiles("C=C");
  CHECK(ethene.bonds[0].order == dta::BondOrder::Double);
  const MolecularGraph ethyne = parse_smiles("C#C");
  CHECK(ethyne.bonds[0].order == dta::BondOrder::Triple);
  // Explicit single between two aromatic atoms stays single.
  const MolecularGraph biphenyl = parse_smiles("c1ccc(cc1)-c2ccccc2");
  bool found_single = false;
  for (const auto& b : biphenyl.bonds) {
    if (b.order == dta::BondOrder::Single) found_single = true;
  }
  CHECK(found_single);
  // Bond symbol on the opening side of a ring closure.
  const MolecularGraph ring = parse_smiles("C=1CCCCC=1");
  bool found_double = false;
  for (const auto& b : ring.bonds) {
    if (b.order == dta::BondOrder::Double) found_double = true;
  }
  CHECK(found_double);
  CHECK(ring.bond_count() == 6);
  // Ring numbers are reusable once closed.
  const MolecularGraph reuse = parse_smiles("C1CC1C1CC1");
  CHECK(reuse.atom_count() == 6);
  CHECK(reuse.bond_count() == 7);
}

TEST_CASE("stereo and isotope markers are skipped with warnings") {
  const MolecularGraph alanine = parse_smiles("C[C@H](N)C(=O)O");
  CHECK(alanine.atom_count() == 6);
  REQUIRE(alanine.warnings.size() == 1);
  CHECK(alanine.warnings[0].find("'@'") != std::string::npos);

  const MolecularGraph butene = parse_smiles("C/C=C/C");
  CHECK(butene.atom_count() == 4);
  CHECK(butene.warnings.size() == 2);

  const MolecularGraph isotope = parse_smiles("[13CH4]");
  REQUIRE(isotope.warnings.size() == 1);
  CHECK(isotope.warnings[0].find("isotope") != std::string::npos);
}

TEST_CASE("rejections carry byte offset and construct") {
  auto expect_error = [](const std::string& smiles, size_t offset,
                         const std::string& construct) {
    CAPTURE(smiles);
    try {
      parse_smiles(smiles);
      FAIL_CHECK("expected SmilesError for ", smiles);
    } catch (const SmilesError& e) {
      CHECK(e.offset() == offset);
      CHECK(e.construct() == construct);
    }
  };
  expect_error("", 0, "input");
  expect_error("CC.CC", 2, "dot disconnection");
  expect_error("C(", 2, "branch");             // unclosed branch
  expect_error("C)", 1, "branch");             // ')' without '('
  expect_error("(CC)", 0, "branch");           // branch before any atom
  expect_error("C=(C)", 2, "branch");          // bond before '('
  expect_error("C1CC", 1, "ring closure");     // never closed
  expect_error("C11", 2, "ring closure");      // ring bond to itself
  expect_error("C12CC12", 6, "bond");          // duplicate bond via two rings
  expect_error("C1C1", 3, "bond");             // ring duplicates the chain bond
  expect_error("C-1CC=1", 6, "ring closure");  // conflicting orders
  expect_error("C=", 1, "bond");               // dangling at end
  expect_error("C==C", 2, "bond");             // consecutive symbols
  expect_error("=C", 0, "bond");               // bond before any atom
  expect_error("C%1C", 1, "ring closure");     // '%' needs two digits
  expect_error("Cx", 1, "atom");               // unknown aromatic atom
  expect_error("Fe", 1, "atom");               // bare two-letter outside organic subset
  expect_error("*", 0, "atom");
  expect_error("[C", 0, "bracket atom");       // unterminated
  expect_error("[Ch]", 2, "bracket atom");     // 'h' is not a count
  expect_error("[C:1]", 2, "bracket atom");    // atom class
  expect_error("[Fe+5]", 0, "bracket atom");   // charge magnitude
  expect_error("[H]", 0, "bracket atom");      // hydrogen as a graph atom
  expect_error("C C", 1, "character");         // whitespace
}

TEST_CASE("grammar-driven generator produces only parseable strings") {
  dta::Rng rng(0x5317BEEF);
  const char* organic[] = {"C", "N", "O", "S", "F", "Cl", "Br", "I",
                           "c", "n", "o", "s"};
  const char* brackets[] = {"[NH3+]", "[O-]", "[C@H]", "[13C]", "[Se]", "[NH+]"};
  for (int iter = 0; iter < 300; ++iter) {
    std::string s;
    int atoms = 0;
    int rings = 0;
    // Mirrors the parser: '(' saves the attachment point, ')' restores it.
    std::vector<int> branch_stack;
    // Ring slots: digit -> index of the atom that opened it (-1 free).
    int open_ring[10];
    for (int& r : open_ring) r = -1;
    std::set<std::pair<int, int>> bonded;
    int prev = -1;
    const int target_atoms = 1 + static_cast<int>(rng.next_below(40));
    while (atoms < target_atoms) {
      if (prev >= 0) {
        const uint64_t roll = rng.next_below(10);
        if (roll == 0) s += '=';
        else if (roll == 1) s += '#';
        else if (roll == 2) s += '-';
      }
      const uint64_t kind = rng.next_below(8);
      if (kind < 6) s += organic[rng.next_below(12)];
      else s += brackets[rng.next_below(6)];
      const int idx = atoms++;
      if (prev >= 0) bonded.insert({std::min(prev, idx), std::max(prev, idx)});
      prev = idx;
      // Maybe close an eligible open ring (distinct atom, no existing bond).
      for (int d = 0; d < 10; ++d) {
        if (open_ring[d] < 0 || open_ring[d] == prev) continue;
        const auto pair = std::make_pair(std::min(open_ring[d], prev),
                                         std::max(open_ring[d], prev));
        if (bonded.count(pair)) continue;
        if (rng.next_below(4) == 0) {
          s += static_cast<char>('0' + d);
          bonded.insert(pair);
          open_ring[d] = -1;
          ++rings;
        }
        break;
      }
      // Maybe open a new ring from this atom.
      if (rng.next_below(5) == 0) {
        for (int d = 0; d < 10; ++d) {
          if (open_ring[d] < 0) {
            s += static_cast<char>('0' + d);
            open_ring[d] = prev;
            break;
          }
        }
      }
      // Maybe open or close a branch.
      if (atoms < target_atoms && rng.next_below(4) == 0) {
        s += '(';
        branch_stack.push_back(prev);
      } else if (!branch_stack.empty() && rng.next_below(3) == 0) {
        s += ')';
        prev = branch_stack.back();
        branch_stack.pop_back();
      }
    }
    while (!branch_stack.empty()) {
      s += ')';
      branch_stack.pop_back();
    }
    // Leftover ring openings would be structured errors; close the string
    // as a valid molecule by dropping those openings from expectations.
    int unclosed = 0;
    for (int r : open_ring) {
      if (r >= 0) ++unclosed;
    }
    CAPTURE(s);
    if (unclosed > 0) {
      CHECK_THROWS_AS((void)parse_smiles(s), SmilesError);
      continue;
    }
    const MolecularGraph g = parse_smiles(s);
    CHECK(g.atom_count() == atoms);
    CHECK(g.bond_count() == atoms - 1 + rings);
    check_invariants(g);
  }
}

TEST_CASE("byte fuzzing never crashes, only graphs or structured errors") {
  dta::Rng rng(0xF00DF00D);
  const std::string alphabet = "CcNnOoSsPpBbFI()[]0123456789%=#-+@/\\.HlrKe* ";
  for (int iter = 0; iter < 20000; ++iter) {
    const size_t len = 1 + rng.next_below(24);
    std::string s;
    s.reserve(len);
    for (size_t i = 0; i < len; ++i) {
      s += alphabet[static_cast<size_t>(rng.next_below(alphabet.size()))];
    }
    try {
      const MolecularGraph g = parse_smiles(s);
      CHECK(g.atom_count() >= 1);
    } catch (const SmilesError&) {
      // Structured rejection is the expected failure mode.
    }
  }
}
