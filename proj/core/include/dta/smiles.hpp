// SPDX-License-Identifier: Apache-2.0
//
// SMILES subset parser producing a heavy-atom molecular graph: atoms with
// computed hydrogen counts, a symmetric zero-diagonal adjacency matrix,
// and a fixed-width per-atom feature matrix. The accepted grammar is
// documented in docs/smiles-grammar.md; unsupported constructs raise
// SmilesError with the byte offset and construct named.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dta/errors.hpp"

namespace dta {

// Columns per atom feature row: element one-hot (11) + degree one-hot 0..6
// (7) + formal charge one-hot -2..+2 (5) + aromatic flag (1) + total
// hydrogen one-hot 0..5 (6).
inline constexpr int kAtomFeatureCount = 30;

enum class BondOrder : uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

struct Atom {
  std::string element;
  bool aromatic = false;
  int formal_charge = 0;
  // Bracket atoms carry exactly the hydrogen count written in the source;
  // -1 marks organic-subset atoms whose count comes from valence rules.
  int explicit_h = -1;
  int degree = 0;
  int implicit_h = 0;

  int total_h() const { return explicit_h >= 0 ? explicit_h : implicit_h; }
};

struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::Single;
};

struct MolecularGraph {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  std::vector<uint8_t> adjacency;     // n*n row-major, symmetric, zero diagonal
  std::vector<double> atom_features;  // n x kAtomFeatureCount row-major
  std::string smiles_source;
  std::vector<std::string> warnings;  // skipped stereo markers and the like

  int atom_count() const { return static_cast<int>(atoms.size()); }
  int bond_count() const { return static_cast<int>(bonds.size()); }
};

// Throws SmilesError on anything outside the documented grammar.
MolecularGraph parse_smiles(const std::string& smiles);

// Fills atom_features from the parsed atom list. parse_smiles calls this
// itself; it is exposed so tests can exercise the layout directly.
void featurize_atoms(MolecularGraph& graph);

}  // namespace dta
