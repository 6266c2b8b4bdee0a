#pragma once

// Shared builders, generators and brute-force reference implementations for
// the constraint-level tests.

#include <random>
#include <string>
#include <vector>

#include "linck/constraint.hpp"
#include "linck/types.hpp"
#include "linck/wanted.hpp"

namespace th {

using linck::Atom;
using linck::DuplicableSet;
using linck::Mult;
using linck::SimpleConstraint;
using linck::Wanted;
using linck::WantedP;

inline Atom atom(const std::string& n) { return Atom(n); }
inline Atom atom(const std::string& c, const std::string& v) { return Atom(c, {linck::tVar(v)}); }

inline SimpleConstraint one(const Atom& a) { return SimpleConstraint::atom(Mult::One, a); }
inline SimpleConstraint many(const Atom& a) { return SimpleConstraint::atom(Mult::Many, a); }
inline SimpleConstraint eps() { return SimpleConstraint::eps(); }
inline SimpleConstraint operator*(const SimpleConstraint& a, const SimpleConstraint& b) {
  return linck::tensor(a, b);
}

inline DuplicableSet dset(std::initializer_list<std::string> names) {
  DuplicableSet d;
  d.members.clear();
  for (const auto& n : names) d.members.insert(n);
  return d;
}

// Every simple constraint over `names` where each atom is unrestricted or not
// and has 0..maxCount linear copies.
std::vector<SimpleConstraint> allSimple(const std::vector<std::string>& names, int maxCount);

SimpleConstraint randomSimple(std::mt19937& rng, const std::vector<std::string>& names,
                              int maxCount);
DuplicableSet randomD(std::mt19937& rng, const std::vector<std::string>& names);
WantedP randomWanted(std::mt19937& rng, const std::vector<std::string>& names, int depth);

// Literal recursive search over the entailment rules, used to cross-check the
// closed-form decision procedure.
bool entailsByRules(const SimpleConstraint& given, const SimpleConstraint& wanted,
                    const DuplicableSet& d);

// Literal application of the meet rules, choosing atoms in the given order.
SimpleConstraint meetByRules(SimpleConstraint a, SimpleConstraint b, const DuplicableSet& d,
                             std::mt19937& rng);

}  // namespace th
