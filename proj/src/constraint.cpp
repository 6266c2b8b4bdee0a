#include "linck/constraint.hpp"

#include <algorithm>
#include <random>

#include "linck/types.hpp"

namespace linck {

Mult multAdd(Mult, Mult) { return Mult::Many; }

Mult multMul(Mult a, Mult b) {
  return (a == Mult::One && b == Mult::One) ? Mult::One : Mult::Many;
}

std::string multStr(Mult m) { return m == Mult::One ? "1" : "w"; }

Atom::Atom(std::string c, std::vector<TypeP> a) : cls(std::move(c)), args(std::move(a)) {
  for (const auto& t : args) {
    const bool simple = t->k == Type::K::Var || t->k == Type::K::Meta ||
                        (t->k == Type::K::Con && t->args.empty());
    std::string s = showType(t);
    argKey_ += " ";
    argKey_ += simple ? s : "(" + s + ")";
  }
  key_ = cls + argKey_;
}

bool Atom::operator<(const Atom& o) const {
  if (cls != o.cls) return cls < o.cls;
  return argKey_ < o.argKey_;
}

SimpleConstraint SimpleConstraint::atom(Mult m, const Atom& q) {
  SimpleConstraint r;
  if (m == Mult::One)
    r.L[q] = 1;
  else
    r.U.insert(q);
  return r;
}

int SimpleConstraint::linearCount(const Atom& q) const {
  auto it = L.find(q);
  return it == L.end() ? 0 : it->second;
}

void SimpleConstraint::addLinear(const Atom& q, int n) {
  if (n <= 0) return;
  L[q] += n;
}

std::vector<Atom> SimpleConstraint::atoms() const {
  std::set<Atom> all(U.begin(), U.end());
  for (const auto& [q, n] : L) all.insert(q);
  return {all.begin(), all.end()};
}

int SimpleConstraint::size() const {
  int n = static_cast<int>(U.size());
  for (const auto& [q, c] : L) n += c;
  return n;
}

SimpleConstraint scaleSimple(Mult m, const SimpleConstraint& q) {
  if (m == Mult::One) return q;
  SimpleConstraint r;
  r.U = q.U;
  for (const auto& [a, n] : q.L) r.U.insert(a);
  return r;
}

SimpleConstraint tensor(const SimpleConstraint& a, const SimpleConstraint& b) {
  SimpleConstraint r = a;
  r.U.insert(b.U.begin(), b.U.end());
  for (const auto& [q, n] : b.L) r.L[q] += n;
  return r;
}

Atom substituteAtom(const Atom& a, const TypeSubst& s, bool partial) {
  std::vector<TypeP> args;
  for (const auto& t : a.args) {
    if (!partial) {
      std::set<std::string> fv;
      freeTypeVars(t, fv);
      for (const auto& v : fv)
        if (!s.count(v)) throw UnboundTypeVariable("unbound type variable " + v);
    }
    args.push_back(substType(t, s));
  }
  return Atom(a.cls, std::move(args));
}

SimpleConstraint substituteSimple(const SimpleConstraint& q, const TypeSubst& s, bool partial) {
  SimpleConstraint r;
  for (const auto& a : q.U) r.U.insert(substituteAtom(a, s, partial));
  for (const auto& [a, n] : q.L) r.L[substituteAtom(a, s, partial)] += n;
  return r;
}

// Every entailment rule touches a single atom and leaves the given
// unrestricted set alone, so derivability splits into a per-atom check.
// With g given and w wanted linear copies of q:
//   q not in D: pairs of copies cancel; surplus wanted copies need q in U1.
//   q in D: one given copy covers any number of wanted copies and can be
//           dropped; with none, wanted copies need q in U1.
// Wanted unrestricted atoms must appear in U1.
bool entailsSimple(const SimpleConstraint& given, const SimpleConstraint& wanted,
                   const DuplicableSet& d) {
  for (const auto& q : wanted.U)
    if (!given.U.count(q)) return false;
  std::set<Atom> linearAtoms;
  for (const auto& [q, n] : given.L) linearAtoms.insert(q);
  for (const auto& [q, n] : wanted.L) linearAtoms.insert(q);
  for (const auto& q : linearAtoms) {
    const int g = given.linearCount(q);
    const int w = wanted.linearCount(q);
    const bool ur = given.U.count(q) > 0;
    if (d.contains(q)) {
      if (g == 0 && w > 0 && !ur) return false;
    } else {
      if (g > w) return false;
      if (g < w && !ur) return false;
    }
  }
  return true;
}

SimpleConstraint meet(const SimpleConstraint& a, const SimpleConstraint& b,
                      const DuplicableSet& d) {
  SimpleConstraint r;
  r.U = a.U;
  r.U.insert(b.U.begin(), b.U.end());
  std::vector<Atom> linear;
  for (const auto& [q, n] : a.L) linear.push_back(q);
  for (const auto& [q, n] : b.L)
    if (!a.L.count(q)) linear.push_back(q);
  for (const auto& q : processingOrder(linear)) {
    const int x = a.linearCount(q);
    const int y = b.linearCount(q);
    const int matched = std::min(x, y);
    const int rest = std::max(x, y) - matched;
    r.addLinear(q, matched);  // INF-MATCH
    if (rest == 0) continue;
    if (d.contains(q))
      r.addLinear(q, rest);  // INF-DIFFDL / INF-DIFFDR
    else
      r.U.insert(q);  // INF-DIFFL / INF-DIFFR
  }
  return r;
}

std::string failKindStr(FailKind k) {
  switch (k) {
    case FailKind::Multiplicity: return "MultiplicityError";
    case FailKind::Ambiguity: return "AmbiguityError";
    case FailKind::Unsolved: return "UnsolvedAtom";
  }
  return "?";
}

DiffResult diff(const SimpleConstraint& qi, const SimpleConstraint& qb, const DuplicableSet& d) {
  // Failures are collected rather than returned eagerly so that the reported
  // kind and atom do not depend on processing order: ambiguities win, then
  // the canonically least atom.
  std::optional<DiffFailure> worst;
  auto note = [&](FailKind k, const Atom& q) {
    if (!worst || (k == FailKind::Ambiguity && worst->kind != FailKind::Ambiguity) ||
        (k == worst->kind && q < worst->atom))
      worst = DiffFailure{k, q};
  };
  SimpleConstraint out = qi;
  for (const auto& q : processingOrder(qb.atoms())) {
    const int lb = qb.linearCount(q);
    const bool ub = qb.U.count(q) > 0;
    if (lb > 1 || (lb == 1 && ub)) {
      note(FailKind::Ambiguity, q);
      continue;
    }
    if (ub) {  // D-UR
      out.U.erase(q);
      out.L.erase(q);
      continue;
    }
    if (out.U.count(q)) {
      note(FailKind::Multiplicity, q);
      continue;
    }
    if (!d.contains(q) && out.linearCount(q) != 1) {  // D-LINEAR
      note(FailKind::Multiplicity, q);
      continue;
    }
    out.L.erase(q);  // D-LINEAR, or D-DUP removing every linear copy
  }
  DiffResult res;
  if (worst)
    res.failure = worst;
  else
    res.out = std::move(out);
  return res;
}

std::string showSimple(const SimpleConstraint& q) {
  std::vector<std::string> parts;
  for (const auto& a : q.atoms()) {
    if (q.U.count(a)) parts.push_back("w." + a.key());
    for (int i = 0; i < q.linearCount(a); ++i) parts.push_back("1." + a.key());
  }
  if (parts.empty()) return "eps";
  std::string s = parts[0];
  for (size_t i = 1; i < parts.size(); ++i) s += " * " + parts[i];
  return s;
}

namespace {
unsigned g_orderSeed = 0;
}

void setAtomOrderSeed(unsigned seed) { g_orderSeed = seed; }
unsigned atomOrderSeed() { return g_orderSeed; }

std::vector<Atom> processingOrder(std::vector<Atom> atoms) {
  std::sort(atoms.begin(), atoms.end());
  if (g_orderSeed != 0) {
    std::mt19937 rng(g_orderSeed + static_cast<unsigned>(atoms.size()));
    std::shuffle(atoms.begin(), atoms.end(), rng);
  }
  return atoms;
}

}  // namespace linck
