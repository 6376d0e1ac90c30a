// SPDX-License-Identifier: Apache-2.0
#include "dta/smiles.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <vector>

namespace dta {
namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }

// Two-letter element symbols recognised inside brackets. Longest match
// against this list decides whether a following lowercase letter belongs
// to the symbol ([Cl-]) or is a separate token ([CH4]: H is a count).
constexpr const char* kTwoLetterElements[] = {
    "Ag", "Al", "Ar", "As", "Au", "Ba", "Bi", "Br", "Ca", "Cd", "Cl", "Co",
    "Cr", "Cs", "Cu", "Fe", "Ga", "Ge", "He", "Hg", "Kr", "Li", "Mg", "Mn",
    "Mo", "Na", "Ne", "Ni", "Pb", "Pd", "Pt", "Rb", "Ru", "Sb", "Se", "Si",
    "Sn", "Sr", "Te", "Ti", "Tl", "Xe", "Zn", "Zr",
};

bool is_two_letter_element(char a, char b) {
  for (const char* e : kTwoLetterElements) {
    if (e[0] == a && e[1] == b) return true;
  }
  return false;
}

double bond_order_value(BondOrder o) {
  switch (o) {
    case BondOrder::Single: return 1.0;
    case BondOrder::Double: return 2.0;
    case BondOrder::Triple: return 3.0;
    case BondOrder::Aromatic: return 1.0;  // aromatic atoms add 1 separately
  }
  return 1.0;
}

// Default valences used to infer hydrogen counts on organic-subset atoms.
// Multi-valent S and P choose the smallest listed valence covering the
// bonds already present.
int default_valence(const std::string& element, double used) {
  auto pick = [used](std::initializer_list<int> choices) {
    for (int v : choices) {
      if (static_cast<double>(v) + 1e-9 >= used) return v;
    }
    return *(choices.end() - 1);
  };
  if (element == "C") return 4;
  if (element == "N") return 3;
  if (element == "O") return 2;
  if (element == "S") return pick({2, 4, 6});
  if (element == "P") return pick({3, 5});
  if (element == "F" || element == "Cl" || element == "Br" || element == "I") return 1;
  if (element == "B") return 3;
  return 0;
}

struct RingOpening {
  int atom = -1;
  std::optional<BondOrder> bond;
  size_t offset = 0;
};

class Parser {
 public:
  explicit Parser(const std::string& s) : src_(s) {}

  MolecularGraph run() {
    if (src_.empty()) throw SmilesError(0, "input", "empty SMILES string");
    while (pos_ < src_.size()) step();
    if (pending_bond_) {
      throw SmilesError(pending_bond_offset_, "bond", "dangling bond symbol at end of input");
    }
    if (!branch_stack_.empty()) {
      throw SmilesError(src_.size(), "branch", "unclosed branch: missing ')'");
    }
    for (size_t n = 0; n < rings_.size(); ++n) {
      if (rings_[n].atom >= 0) {
        throw SmilesError(rings_[n].offset, "ring closure",
                          "ring bond " + std::to_string(n) + " never closed");
      }
    }
    finish();
    return std::move(graph_);
  }

 private:
  void step() {
    const char c = src_[pos_];
    switch (c) {
      case '-': set_pending(BondOrder::Single); return;
      case '=': set_pending(BondOrder::Double); return;
      case '#': set_pending(BondOrder::Triple); return;
      case ':': set_pending(BondOrder::Aromatic); return;
      case '/':
      case '\\':
        warn(std::string("stereo bond '") + c + "' treated as a plain single bond");
        set_pending(BondOrder::Single);
        return;
      case '(': {
        if (prev_atom_ < 0) {
          throw SmilesError(pos_, "branch", "branch opened before any atom");
        }
        if (pending_bond_) {
          throw SmilesError(pos_, "branch", "bond symbol directly before '('");
        }
        branch_stack_.push_back(prev_atom_);
        ++pos_;
        return;
      }
      case ')': {
        if (branch_stack_.empty()) {
          throw SmilesError(pos_, "branch", "')' without matching '('");
        }
        if (pending_bond_) {
          throw SmilesError(pos_, "branch", "bond symbol directly before ')'");
        }
        prev_atom_ = branch_stack_.back();
        branch_stack_.pop_back();
        ++pos_;
        return;
      }
      case '.':
        throw SmilesError(pos_, "dot disconnection",
                          "multi-fragment SMILES is not supported");
      case '%': {
        if (pos_ + 2 >= src_.size() || !is_digit(src_[pos_ + 1]) || !is_digit(src_[pos_ + 2])) {
          throw SmilesError(pos_, "ring closure", "'%' must be followed by two digits");
        }
        const int num = (src_[pos_ + 1] - '0') * 10 + (src_[pos_ + 2] - '0');
        const size_t at = pos_;
        pos_ += 3;
        ring_closure(num, at);
        return;
      }
      case '[':
        bracket_atom();
        return;
      case '*':
        throw SmilesError(pos_, "atom", "wildcard atom '*' is not supported");
      default:
        break;
    }
    if (is_digit(c)) {
      const size_t at = pos_;
      ++pos_;
      ring_closure(c - '0', at);
      return;
    }
    if (is_upper(c) || is_lower(c)) {
      bare_atom();
      return;
    }
    throw SmilesError(pos_, "character",
                      std::string("unsupported character '") + c + "'");
  }

  void set_pending(BondOrder order) {
    if (pending_bond_) {
      throw SmilesError(pos_, "bond", "two consecutive bond symbols");
    }
    if (prev_atom_ < 0) {
      throw SmilesError(pos_, "bond", "bond symbol before any atom");
    }
    pending_bond_ = order;
    pending_bond_offset_ = pos_;
    ++pos_;
  }

  // Organic-subset atom written without brackets.
  void bare_atom() {
    const size_t at = pos_;
    const char c = src_[pos_];
    std::string element;
    bool aromatic = false;
    if (is_upper(c)) {
      if (c == 'C' && pos_ + 1 < src_.size() && src_[pos_ + 1] == 'l') {
        element = "Cl";
        pos_ += 2;
      } else if (c == 'B' && pos_ + 1 < src_.size() && src_[pos_ + 1] == 'r') {
        element = "Br";
        pos_ += 2;
      } else if (c == 'B' || c == 'C' || c == 'N' || c == 'O' || c == 'P' ||
                 c == 'S' || c == 'F' || c == 'I') {
        element.assign(1, c);
        ++pos_;
      } else {
        throw SmilesError(at, "atom",
                          std::string("element '") + c +
                              "' must be written in brackets");
      }
    } else {
      if (c == 'b' || c == 'c' || c == 'n' || c == 'o' || c == 'p' || c == 's') {
        element.assign(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
        aromatic = true;
        ++pos_;
      } else {
        throw SmilesError(at, "atom",
                          std::string("unknown aromatic atom '") + c + "'");
      }
    }
    Atom atom;
    atom.element = element;
    atom.aromatic = aromatic;
    add_atom(atom, at);
  }

  void bracket_atom() {
    const size_t at = pos_;
    ++pos_;  // consume '['
    while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;  // isotope, discarded
    if (pos_ < src_.size() && pos_ > at + 1) {
      warn_at(at, "isotope label discarded");
    }
    if (pos_ >= src_.size()) {
      throw SmilesError(at, "bracket atom", "unterminated bracket atom");
    }

    Atom atom;
    const char ec = src_[pos_];
    if (is_upper(ec)) {
      if (pos_ + 1 < src_.size() && is_lower(src_[pos_ + 1]) &&
          is_two_letter_element(ec, src_[pos_ + 1])) {
        atom.element.assign(src_, pos_, 2);
        pos_ += 2;
      } else {
        atom.element.assign(1, ec);
        ++pos_;
      }
      if (atom.element == "H") {
        throw SmilesError(at, "bracket atom",
                          "hydrogen as an explicit graph atom is not supported");
      }
    } else if (is_lower(ec)) {
      if (pos_ + 1 < src_.size() &&
          ((ec == 's' && src_[pos_ + 1] == 'e') || (ec == 'a' && src_[pos_ + 1] == 's'))) {
        atom.element = ec == 's' ? "Se" : "As";
        pos_ += 2;
      } else if (ec == 'b' || ec == 'c' || ec == 'n' || ec == 'o' || ec == 'p' || ec == 's') {
        atom.element.assign(1, static_cast<char>(std::toupper(static_cast<unsigned char>(ec))));
        ++pos_;
      } else {
        throw SmilesError(pos_, "bracket atom",
                          std::string("unknown aromatic element '") + ec + "'");
      }
      atom.aromatic = true;
    } else {
      throw SmilesError(pos_, "bracket atom", "expected element symbol");
    }

    if (pos_ < src_.size() && src_[pos_] == '@') {
      ++pos_;
      if (pos_ < src_.size() && src_[pos_] == '@') ++pos_;
      warn_at(at, "chirality marker '@' skipped");
    }

    atom.explicit_h = 0;
    if (pos_ < src_.size() && src_[pos_] == 'H') {
      ++pos_;
      int count = 1;
      if (pos_ < src_.size() && is_digit(src_[pos_])) {
        count = src_[pos_] - '0';
        ++pos_;
      }
      atom.explicit_h = count;
    }

    if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) {
      const int sign = src_[pos_] == '+' ? 1 : -1;
      const char sc = src_[pos_];
      ++pos_;
      int magnitude = 1;
      if (pos_ < src_.size() && is_digit(src_[pos_])) {
        magnitude = src_[pos_] - '0';
        ++pos_;
      } else {
        while (pos_ < src_.size() && src_[pos_] == sc) {
          ++magnitude;
          ++pos_;
        }
      }
      if (magnitude > 4) {
        throw SmilesError(at, "bracket atom", "formal charge magnitude above 4");
      }
      atom.formal_charge = sign * magnitude;
    }

    if (pos_ < src_.size() && src_[pos_] == ':') {
      throw SmilesError(pos_, "bracket atom", "atom class labels are not supported");
    }
    if (pos_ >= src_.size() || src_[pos_] != ']') {
      throw SmilesError(pos_ < src_.size() ? pos_ : at, "bracket atom",
                        pos_ < src_.size()
                            ? std::string("unexpected character '") + src_[pos_] +
                                  "' in bracket atom"
                            : std::string("unterminated bracket atom"));
    }
    ++pos_;  // consume ']'
    add_atom(atom, at);
  }

  void add_atom(Atom atom, size_t offset) {
    (void)offset;
    graph_.atoms.push_back(std::move(atom));
    const int idx = static_cast<int>(graph_.atoms.size()) - 1;
    if (prev_atom_ >= 0) {
      add_bond(prev_atom_, idx, take_pending(idx), pos_);
    } else if (pending_bond_) {
      throw SmilesError(pending_bond_offset_, "bond", "bond symbol before any atom");
    }
    prev_atom_ = idx;
  }

  // Resolves the bond order between prev_atom_ and `to` when no explicit
  // symbol was written: aromatic if both ends are aromatic, else single.
  BondOrder take_pending(int to) {
    if (pending_bond_) {
      const BondOrder o = *pending_bond_;
      pending_bond_.reset();
      return o;
    }
    if (graph_.atoms[static_cast<size_t>(prev_atom_)].aromatic &&
        graph_.atoms[static_cast<size_t>(to)].aromatic) {
      return BondOrder::Aromatic;
    }
    return BondOrder::Single;
  }

  void ring_closure(int number, size_t offset) {
    if (prev_atom_ < 0) {
      throw SmilesError(offset, "ring closure", "ring closure before any atom");
    }
    std::optional<BondOrder> here;
    if (pending_bond_) {
      here = *pending_bond_;
      pending_bond_.reset();
    }
    RingOpening& slot = rings_[static_cast<size_t>(number)];
    if (slot.atom < 0) {
      slot.atom = prev_atom_;
      slot.bond = here;
      slot.offset = offset;
      return;
    }
    const int other = slot.atom;
    if (other == prev_atom_) {
      throw SmilesError(offset, "ring closure", "ring bond from an atom to itself");
    }
    BondOrder order;
    if (here && slot.bond) {
      if (*here != *slot.bond) {
        throw SmilesError(offset, "ring closure",
                          "conflicting bond orders on the two ends of a ring bond");
      }
      order = *here;
    } else if (here) {
      order = *here;
    } else if (slot.bond) {
      order = *slot.bond;
    } else if (graph_.atoms[static_cast<size_t>(other)].aromatic &&
               graph_.atoms[static_cast<size_t>(prev_atom_)].aromatic) {
      order = BondOrder::Aromatic;
    } else {
      order = BondOrder::Single;
    }
    add_bond(other, prev_atom_, order, offset);
    slot = RingOpening{};
  }

  void add_bond(int a, int b, BondOrder order, size_t offset) {
    for (const Bond& bond : graph_.bonds) {
      if ((bond.a == a && bond.b == b) || (bond.a == b && bond.b == a)) {
        throw SmilesError(offset, "bond",
                          "duplicate bond between atoms " + std::to_string(a) +
                              " and " + std::to_string(b));
      }
    }
    graph_.bonds.push_back(Bond{a, b, order});
  }

  void warn(std::string text) { warn_at(pos_, std::move(text)); }

  void warn_at(size_t offset, std::string text) {
    graph_.warnings.push_back("offset " + std::to_string(offset) + ": " + std::move(text));
  }

  // Degrees, hydrogen counts, adjacency, and features; runs after the
  // whole string parsed cleanly.
  void finish() {
    const int n = graph_.atom_count();
    std::vector<double> used(static_cast<size_t>(n), 0.0);
    for (const Bond& b : graph_.bonds) {
      const double v = bond_order_value(b.order);
      used[static_cast<size_t>(b.a)] += v;
      used[static_cast<size_t>(b.b)] += v;
      ++graph_.atoms[static_cast<size_t>(b.a)].degree;
      ++graph_.atoms[static_cast<size_t>(b.b)].degree;
    }
    for (int i = 0; i < n; ++i) {
      Atom& atom = graph_.atoms[static_cast<size_t>(i)];
      if (atom.aromatic) used[static_cast<size_t>(i)] += 1.0;
      if (atom.explicit_h < 0) {
        const double u = used[static_cast<size_t>(i)];
        const int valence = default_valence(atom.element, u);
        atom.implicit_h = std::max(0, static_cast<int>(valence - u + 1e-9));
      }
    }
    graph_.adjacency.assign(static_cast<size_t>(n) * static_cast<size_t>(n), 0);
    for (const Bond& b : graph_.bonds) {
      graph_.adjacency[static_cast<size_t>(b.a) * static_cast<size_t>(n) +
                       static_cast<size_t>(b.b)] = 1;
      graph_.adjacency[static_cast<size_t>(b.b) * static_cast<size_t>(n) +
                       static_cast<size_t>(b.a)] = 1;
    }
    graph_.smiles_source = src_;
    featurize_atoms(graph_);
  }

  const std::string& src_;
  size_t pos_ = 0;
  MolecularGraph graph_;
  int prev_atom_ = -1;
  std::vector<int> branch_stack_;
  std::optional<BondOrder> pending_bond_;
  size_t pending_bond_offset_ = 0;
  std::array<RingOpening, 100> rings_{};
};

int element_slot(const std::string& element) {
  static const char* const kOrder[] = {"C", "N", "O", "S", "F", "P", "Cl", "Br", "I", "B"};
  for (int i = 0; i < 10; ++i) {
    if (element == kOrder[i]) return i;
  }
  return 10;  // any other element
}

}  // namespace

MolecularGraph parse_smiles(const std::string& smiles) {
  return Parser(smiles).run();
}

void featurize_atoms(MolecularGraph& graph) {
  const int n = graph.atom_count();
  graph.atom_features.assign(static_cast<size_t>(n) * kAtomFeatureCount, 0.0);
  for (int i = 0; i < n; ++i) {
    const Atom& atom = graph.atoms[static_cast<size_t>(i)];
    double* row = graph.atom_features.data() +
                  static_cast<size_t>(i) * kAtomFeatureCount;
    row[element_slot(atom.element)] = 1.0;
    row[11 + std::clamp(atom.degree, 0, 6)] = 1.0;
    row[18 + std::clamp(atom.formal_charge, -2, 2) + 2] = 1.0;
    row[23] = atom.aromatic ? 1.0 : 0.0;
    row[24 + std::clamp(atom.total_h(), 0, 5)] = 1.0;
  }
}

}  // namespace dta
