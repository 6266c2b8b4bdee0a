#include "linck/solver.hpp"

#include <algorithm>
#include <map>

namespace linck {

namespace {

// A solved constraint together with the source sites that demanded each
// atom. Sites are only used to pick a blame location.
struct Demand {
  SimpleConstraint q;
  std::map<Atom, std::vector<SourceSpan>> sites;
};

void addSite(Demand& d, const Atom& a, const SourceSpan& s, int times = 1) {
  if (!s.valid()) return;
  for (int i = 0; i < times; ++i) d.sites[a].push_back(s);
}

Demand tensorD(const Demand& a, const Demand& b) {
  Demand r{tensor(a.q, b.q), a.sites};
  for (const auto& [atom, v] : b.sites)
    r.sites[atom].insert(r.sites[atom].end(), v.begin(), v.end());
  return r;
}

struct Failure {
  FailKind kind;
  Atom atom;
  SourceSpan blame;
};

struct WriterSolver {
  const DuplicableSet& d;
  SolverTrace* trace;
  std::optional<Failure> failure;

  void log(const std::string& rule, const WantedP& c, const SimpleConstraint& out) {
    if (trace) trace->push_back(rule + " " + showWanted(c) + " ~> " + showSimple(out));
  }

  // Picks the blame site for a diff failure inside an implication.
  SourceSpan blameFor(const DiffFailure& f, const Demand& qi, const SimpleConstraint& qb,
                      const SourceSpan& implSite) {
    if (f.kind == FailKind::Ambiguity) return implSite;
    if (qb.linearCount(f.atom) == 0) return implSite;
    auto it = qi.sites.find(f.atom);
    if (it == qi.sites.end()) return implSite;
    std::vector<SourceSpan> sites = it->second;
    std::sort(sites.begin(), sites.end(), spanBefore);
    sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
    if (qi.q.hasUnrestricted(f.atom)) return sites.front();
    // Several distinct sites: the later use is the surplus one.
    return sites.size() >= 2 ? sites[1] : implSite;
  }

  std::optional<Demand> go(const WantedP& c) {
    switch (c->k) {
      case Wanted::K::Simple: {
        // A simple node is the tensor of its scaled atoms.
        Demand out;
        for (const auto& a : c->q.atoms()) {
          if (c->q.hasUnrestricted(a)) {
            auto one = SimpleConstraint::atom(Mult::Many, a);
            log("S-ATOM", wSimple(one), one);
            out.q = tensor(out.q, one);
            addSite(out, a, c->span);
          }
          for (int i = 0; i < c->q.linearCount(a); ++i) {
            auto one = SimpleConstraint::atom(Mult::One, a);
            log("S-ATOM", wSimple(one), one);
            out.q = tensor(out.q, one);
            addSite(out, a, c->span);
          }
        }
        return out;
      }
      case Wanted::K::Tensor: {
        auto l = go(c->left);
        if (!l) return std::nullopt;
        auto r = go(c->right);
        if (!r) return std::nullopt;
        Demand out = tensorD(*l, *r);
        log("S-TENSOR", c, out.q);
        return out;
      }
      case Wanted::K::With: {
        auto l = go(c->left);
        if (!l) return std::nullopt;
        auto r = go(c->right);
        if (!r) return std::nullopt;
        Demand out = tensorD(*l, *r);
        out.q = meet(l->q, r->q, d);
        log("S-WITH", c, out.q);
        return out;
      }
      case Wanted::K::Impl: {
        auto body = go(c->left);
        if (!body) return std::nullopt;
        DiffResult dr = diff(body->q, c->q, d);
        if (!dr.ok()) {
          failure = Failure{dr.failure->kind, dr.failure->atom,
                            blameFor(*dr.failure, *body, c->q, c->span)};
          if (trace)
            trace->push_back("S-IMPL " + showWanted(c) + " FAILED " +
                             failKindStr(dr.failure->kind) + " " + dr.failure->atom.key());
          return std::nullopt;
        }
        Demand out;
        out.q = scaleSimple(c->mult, *dr.out);
        for (const auto& [a, v] : body->sites)
          if (out.q.mentions(a)) out.sites[a] = v;
        log("S-IMPL", c, out.q);
        return out;
      }
    }
    return std::nullopt;
  }
};

}  // namespace

SolverOutcome solve(const WantedP& c, const DuplicableSet& d, SolverTrace* trace) {
  WriterSolver s{d, trace, std::nullopt};
  auto r = s.go(c);
  SolverOutcome o;
  if (r) {
    o.solved = true;
    o.q = r->q;
    return o;
  }
  o.kind = s.failure->kind;
  o.atom = s.failure->atom;
  o.blame = s.failure->blame;
  return o;
}

SolverOutcome checkTopLevel(const SimpleConstraint& qg, const WantedP& c, const DuplicableSet& d,
                            const SourceSpan& site, SolverTrace* trace) {
  SolverOutcome o = solve(wImpl(Mult::One, qg, c, site), d, trace);
  if (!o.solved || o.q.isEps()) return o;
  // Residual demand: report the canonically least atom.
  SolverOutcome bad;
  bad.kind = FailKind::Unsolved;
  bad.atom = o.q.atoms().front();
  bad.blame = site;
  bad.q = o.q;
  return bad;
}

// ---------------------------------------------------------------------------

namespace {

struct StateSolver {
  const DuplicableSet& d;
  std::optional<Failure> failure;

  // Linear givens by scope level, innermost last.
  using Levels = std::vector<std::map<Atom, int>>;

  bool fail(FailKind k, const Atom& a, const SourceSpan& s) {
    failure = Failure{k, a, s};
    return false;
  }

  static bool linearlyGiven(const Levels& lv, const Atom& a) {
    for (const auto& l : lv)
      if (l.count(a)) return true;
    return false;
  }

  // Consumes the demands of c from (u, levels); atoms given nowhere become
  // demands on the environment, scaled by `scale`.
  bool go(const WantedP& c, const std::set<Atom>& u, Levels& lv, Mult scale, Demand& env) {
    switch (c->k) {
      case Wanted::K::Simple: {
        for (const auto& a : c->q.atoms()) {
          const bool inU = u.count(a) > 0;
          if (inU && linearlyGiven(lv, a)) return fail(FailKind::Ambiguity, a, c->span);
          if (c->q.hasUnrestricted(a) && !inU) {
            if (linearlyGiven(lv, a)) return fail(FailKind::Multiplicity, a, c->span);
            env.q = tensor(env.q, SimpleConstraint::atom(Mult::Many, a));
          }
          for (int i = 0; i < c->q.linearCount(a); ++i) {
            if (inU) continue;
            bool found = false;
            for (auto it = lv.rbegin(); it != lv.rend(); ++it) {
              auto f = it->find(a);
              if (f == it->end()) continue;
              found = true;
              if (!d.contains(a) && --f->second == 0) it->erase(f);
              break;
            }
            if (!found) {
              if (d.contains(a) && env.q.linearCount(a) > 0 && scale == Mult::One) continue;
              env.q = tensor(env.q, SimpleConstraint::atom(scale, a));
            }
          }
        }
        return true;
      }
      case Wanted::K::Tensor:
        return go(c->left, u, lv, scale, env) && go(c->right, u, lv, scale, env);
      case Wanted::K::With: {
        Levels l1 = lv, l2 = lv;
        Demand e1, e2;
        if (!go(c->left, u, l1, scale, e1) || !go(c->right, u, l2, scale, e2)) return false;
        if (l1 != l2) {
          for (size_t i = 0; i < l1.size(); ++i)
            for (const auto& [a, n] : l1[i])
              if (!l2[i].count(a) || l2[i].at(a) != n) return fail(FailKind::Multiplicity, a, {});
          for (size_t i = 0; i < l2.size(); ++i)
            for (const auto& [a, n] : l2[i])
              if (!l1[i].count(a)) return fail(FailKind::Multiplicity, a, {});
        }
        lv = l1;
        env.q = tensor(env.q, meet(e1.q, e2.q, d));
        return true;
      }
      case Wanted::K::Impl: {
        std::set<Atom> u2 = u;
        u2.insert(c->q.U.begin(), c->q.U.end());
        for (const auto& a : c->q.atoms())
          if (c->q.hasUnrestricted(a) && c->q.linearCount(a) > 0)
            return fail(FailKind::Ambiguity, a, c->span);
        Levels inner;
        Levels* target = &lv;
        Mult innerScale = multMul(scale, c->mult);
        if (c->mult == Mult::Many) target = &inner;  // outer linear givens are out of reach
        target->push_back({});
        for (const auto& [a, n] : c->q.L) target->back()[a] += n;
        if (!go(c->left, u2, *target, innerScale, env)) return false;
        for (const auto& [a, n] : target->back())
          if (!d.contains(a) && n > 0) return fail(FailKind::Multiplicity, a, c->span);
        target->pop_back();
        return true;
      }
    }
    return false;
  }
};

SolverOutcome finish(StateSolver& s, bool ok, const Demand& env) {
  SolverOutcome o;
  if (ok) {
    o.solved = true;
    o.q = env.q;
    return o;
  }
  o.kind = s.failure->kind;
  o.atom = s.failure->atom;
  o.blame = s.failure->blame;
  return o;
}

}  // namespace

SolverOutcome solveStateStyle(const WantedP& c, const DuplicableSet& d) {
  StateSolver s{d, std::nullopt};
  StateSolver::Levels lv;
  Demand env;
  bool ok = s.go(c, {}, lv, Mult::One, env);
  return finish(s, ok, env);
}

SolverOutcome checkTopLevelStateStyle(const SimpleConstraint& qg, const WantedP& c,
                                      const DuplicableSet& d, const SourceSpan& site) {
  SolverOutcome o = solveStateStyle(wImpl(Mult::One, qg, c, site), d);
  if (!o.solved || o.q.isEps()) return o;
  SolverOutcome bad;
  bad.kind = FailKind::Unsolved;
  bad.atom = o.q.atoms().front();
  bad.blame = site;
  return bad;
}

std::string explainFailure(const SolverOutcome& o) {
  std::string where = o.blame.valid() ? " at " + o.blame.str() : "";
  switch (o.kind) {
    case FailKind::Multiplicity:
      return "multiplicity error: linear constraint " + o.atom.key() +
             " is used more than once or not in a linear context" + where;
    case FailKind::Ambiguity:
      return "ambiguity error: constraint " + o.atom.key() +
             " is ambiguous, there are several givens to choose from" + where;
    case FailKind::Unsolved:
      return "unsolved constraint: " + o.atom.key() + " could not be discharged" + where;
  }
  return "solver failure";
}

}  // namespace linck
