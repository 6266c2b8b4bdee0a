#include "helpers.hpp"

#include <algorithm>
#include <functional>

namespace th {

std::vector<SimpleConstraint> allSimple(const std::vector<std::string>& names, int maxCount) {
  std::vector<SimpleConstraint> out{SimpleConstraint::eps()};
  for (const auto& n : names) {
    std::vector<SimpleConstraint> next;
    for (const auto& base : out)
      for (int u = 0; u < 2; ++u)
        for (int c = 0; c <= maxCount; ++c) {
          SimpleConstraint q = base;
          if (u) q.U.insert(atom(n));
          q.addLinear(atom(n), c);
          next.push_back(q);
        }
    out = std::move(next);
  }
  return out;
}

SimpleConstraint randomSimple(std::mt19937& rng, const std::vector<std::string>& names,
                              int maxCount) {
  SimpleConstraint q;
  std::uniform_int_distribution<int> coin(0, 3);
  std::uniform_int_distribution<int> count(0, maxCount);
  for (const auto& n : names) {
    if (coin(rng) == 0) q.U.insert(atom(n));
    if (coin(rng) < 2) q.addLinear(atom(n), count(rng));
  }
  return q;
}

DuplicableSet randomD(std::mt19937& rng, const std::vector<std::string>& names) {
  DuplicableSet d = dset({});
  std::uniform_int_distribution<int> coin(0, 2);
  for (const auto& n : names)
    if (coin(rng) == 0) d.members.insert(n);
  return d;
}

WantedP randomWanted(std::mt19937& rng, const std::vector<std::string>& names, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 0 : 4);
  std::uniform_int_distribution<int> mult(0, 2);
  switch (pick(rng)) {
    case 0:
    case 1: {
      std::uniform_int_distribution<size_t> which(0, names.size() - 1);
      SimpleConstraint q;
      std::uniform_int_distribution<int> size(0, 2);
      int k = size(rng);
      for (int i = 0; i < k; ++i) {
        Atom a = atom(names[which(rng)]);
        if (mult(rng) == 0)
          q.U.insert(a);
        else
          q.addLinear(a);
      }
      return linck::wSimple(q);
    }
    case 2: return linck::wTensor(randomWanted(rng, names, depth - 1), randomWanted(rng, names, depth - 1));
    case 3: return linck::wWith(randomWanted(rng, names, depth - 1), randomWanted(rng, names, depth - 1));
    default: {
      Mult m = mult(rng) == 0 ? Mult::Many : Mult::One;
      return linck::wImpl(m, randomSimple(rng, names, 1), randomWanted(rng, names, depth - 1));
    }
  }
}

namespace {

void removeOne(SimpleConstraint& q, const Atom& a) {
  if (--q.L[a] == 0) q.L.erase(a);
}

}  // namespace

bool entailsByRules(const SimpleConstraint& given, const SimpleConstraint& wanted,
                    const DuplicableSet& d) {
  if (given.L.empty() && wanted.L.empty())  // base rule, unrestricted part
    return std::includes(given.U.begin(), given.U.end(), wanted.U.begin(), wanted.U.end());
  for (const auto& [q, n] : wanted.L) {
    if (given.linearCount(q) > 0 && !d.contains(q)) {  // linear match
      SimpleConstraint g = given, w = wanted;
      removeOne(g, q);
      removeOne(w, q);
      if (entailsByRules(g, w, d)) return true;
    }
    if (given.linearCount(q) > 0 && d.contains(q)) {  // duplicable serves a copy
      SimpleConstraint w = wanted;
      removeOne(w, q);
      if (entailsByRules(given, w, d)) return true;
    }
    if (given.U.count(q)) {  // unrestricted given serves one linear copy
      SimpleConstraint w = wanted;
      removeOne(w, q);
      if (entailsByRules(given, w, d)) return true;
    }
  }
  for (const auto& [q, n] : given.L) {  // drop a duplicable given
    if (d.contains(q) && wanted.linearCount(q) == 0) {
      SimpleConstraint g = given;
      removeOne(g, q);
      if (entailsByRules(g, wanted, d)) return true;
    }
  }
  return false;
}

SimpleConstraint meetByRules(SimpleConstraint a, SimpleConstraint b, const DuplicableSet& d,
                             std::mt19937& rng) {
  SimpleConstraint acc;
  while (!a.L.empty() || !b.L.empty()) {
    std::vector<Atom> choices;
    for (const auto& [q, n] : a.L) choices.push_back(q);
    for (const auto& [q, n] : b.L) choices.push_back(q);
    std::uniform_int_distribution<size_t> pick(0, choices.size() - 1);
    Atom q = choices[pick(rng)];
    const bool inA = a.linearCount(q) > 0, inB = b.linearCount(q) > 0;
    if (inA && inB) {
      removeOne(a, q);
      removeOne(b, q);
      acc.addLinear(q);
    } else if (inA) {
      removeOne(a, q);
      if (d.contains(q))
        acc.addLinear(q);
      else
        acc.U.insert(q);
    } else {
      removeOne(b, q);
      if (d.contains(q))
        acc.addLinear(q);
      else
        acc.U.insert(q);
    }
  }
  acc.U.insert(a.U.begin(), a.U.end());
  acc.U.insert(b.U.begin(), b.U.end());
  return acc;
}

}  // namespace th
