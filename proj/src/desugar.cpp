#include "linck/desugar.hpp"

#include <algorithm>
#include <functional>

namespace linck {

// ---------------------------------------------------------------------------
// Types

std::vector<EvidenceSlot> evidenceLayout(const SimpleConstraint& q) {
  std::vector<EvidenceSlot> out;
  for (const auto& a : q.U) out.push_back({a, true});
  for (const auto& [a, n] : q.L)
    for (int i = 0; i < n; ++i) out.push_back({a, false});
  return out;
}

TypeP atomEvidenceType(const Atom& a) { return tCon("#" + a.cls, a.args); }

namespace {

TypeP slotType(const EvidenceSlot& s) {
  TypeP t = atomEvidenceType(s.atom);
  return s.unrestricted ? tUr(t) : t;
}

TypeP tupleType(const std::vector<TypeP>& ts, size_t from = 0) {
  if (from >= ts.size()) return tUnit();
  if (from + 1 == ts.size()) return ts[from];
  return tPair(ts[from], tupleType(ts, from + 1));
}

CoreP tupleTerm(const std::vector<TypeP>& ts, const std::vector<CoreP>& es, size_t from = 0) {
  if (from >= es.size()) return cUnit();
  if (from + 1 == es.size()) return es[from];
  return cPair(ts[from], tupleType(ts, from + 1), es[from], tupleTerm(ts, es, from + 1));
}

CorePat tuplePat(const std::vector<CorePat>& ps, size_t from = 0) {
  if (from >= ps.size()) return pCtor("()");
  if (from + 1 == ps.size()) return ps[from];
  return pCtor("(,)", {ps[from], tuplePat(ps, from + 1)});
}

}  // namespace

TypeP evidenceType(const std::vector<EvidenceSlot>& layout) {
  std::vector<TypeP> ts;
  for (const auto& s : layout) ts.push_back(slotType(s));
  return tupleType(ts);
}

TypeP evidenceType(const SimpleConstraint& q) { return evidenceType(evidenceLayout(q)); }

TypeP translateType(const TypeP& t) {
  switch (t->k) {
    case Type::K::Var: return t;
    case Type::K::Meta: return tUnit();
    case Type::K::Con: {
      std::vector<TypeP> args;
      for (const auto& a : t->args) args.push_back(translateType(a));
      return tCon(t->name, args);
    }
    case Type::K::Arrow:
      return tArrow(t->mult, translateType(t->args[0]), translateType(t->args[1]));
    case Type::K::Exists:
      if (t->args.size() == 2) return t;  // already core
      return tCoreExists(t->vars, evidenceType(t->q), translateType(t->args[0]));
    case Type::K::Qual:
      return tArrow(Mult::One, evidenceType(t->q), translateType(t->args[0]));
  }
  return t;
}

Scheme translateScheme(const Scheme& s) {
  Scheme r;
  r.vars = s.vars;
  r.body = tArrow(Mult::One, evidenceType(s.q), translateType(s.body));
  return r;
}

std::string dupPrimName(const std::string& cls) {
  return cls == "Linearly" ? "dup" : "dup." + cls;
}

std::string disPrimName(const std::string& cls) {
  return cls == "Linearly" ? "dis" : "dis." + cls;
}

CoreEnv coreEnvFrom(const GlobalEnv& g) {
  CoreEnv env = baseCoreEnv();
  for (const auto& [name, info] : g.types) env.typeCtors[name] = info.ctors;
  for (const auto& [name, ci] : g.ctors) {
    CoreCtor c{ci.type, ci.params, {}};
    for (const auto& [m, t] : ci.fields) c.fields.push_back({m, translateType(t)});
    env.ctors[name] = c;
  }
  for (const auto& [name, gi] : g.globals) {
    if (gi.hasBody)
      env.globals[name] = translateScheme(gi.sig);
    else
      env.prims[name] = translateScheme(gi.sig);
  }
  for (const auto& [cls, ci] : g.classes) {
    if (!ci.duplicable && !g.dset.contains(cls)) continue;
    std::vector<std::string> vars;
    std::vector<TypeP> args;
    for (int i = 0; i < ci.arity; ++i) {
      vars.push_back("a" + std::to_string(i + 1));
      args.push_back(tVar(vars.back()));
    }
    TypeP tok = atomEvidenceType(Atom(cls, args));
    if (!env.prims.count(dupPrimName(cls)))
      env.prims[dupPrimName(cls)] =
          Scheme{vars, {}, tArrow(Mult::One, tok, tCoreExists({}, tPair(tok, tok), tUnit()))};
    if (!env.prims.count(disPrimName(cls)))
      env.prims[disPrimName(cls)] = Scheme{vars, {}, tArrow(Mult::One, tok, tUnit())};
  }
  return env;
}

// ---------------------------------------------------------------------------
// Sharing of duplicable evidence

namespace {

int countUses(const std::string& v, const CoreP& t) {
  if (!t) return 0;
  int n = (t->k == CoreTerm::K::Var && t->name == v) ? 1 : 0;
  n += countUses(v, t->a) + countUses(v, t->b);
  for (const auto& alt : t->alts) n += countUses(v, alt.body);
  return n;
}

CoreP rename(const std::string& from, const std::string& to, const CoreP& t) {
  if (!t || countUses(from, t) == 0) return t;
  if (t->k == CoreTerm::K::Var && t->name == from) return cVar(to, t->tyArgs);
  auto r = std::make_shared<CoreTerm>(*t);
  r->a = rename(from, to, t->a);
  r->b = rename(from, to, t->b);
  for (auto& alt : r->alts) alt.body = rename(from, to, alt.body);
  return r;
}

}  // namespace

CoreP shareEvidence(const std::string& v, const Atom& a, const CoreP& t) {
  int uses = countUses(v, t);
  if (uses == 0)
    return cCase(Mult::One, cApp(cPrim(disPrimName(a.cls), a.args), cVar(v)), {{pCtor("()"), t}});
  if (t->k == CoreTerm::K::Var) return t;

  // Groups of subterms: each child, with all case alternatives together.
  bool inA = countUses(v, t->a) > 0, inB = countUses(v, t->b) > 0;
  bool inAlts = false;
  for (const auto& alt : t->alts) inAlts = inAlts || countUses(v, alt.body) > 0;
  int groups = int(inA) + int(inB) + int(inAlts);

  if (groups == 1) {
    auto r = std::make_shared<CoreTerm>(*t);
    if (inA) r->a = shareEvidence(v, a, t->a);
    if (inB) r->b = shareEvidence(v, a, t->b);
    if (inAlts)
      for (auto& alt : r->alts) alt.body = shareEvidence(v, a, alt.body);
    return r;
  }

  // Split: the first group gets v.1, the others v.2.
  std::string v1 = v + ".1", v2 = v + ".2", pr = v + ".p", un = v + ".u";
  auto r = std::make_shared<CoreTerm>(*t);
  bool first = true;
  if (inA) {
    r->a = rename(v, v1, t->a);
    first = false;
  }
  if (inB) {
    r->b = rename(v, first ? v1 : v2, t->b);
    first = false;
  }
  if (inAlts)
    for (auto& alt : r->alts) alt.body = rename(v, first ? v1 : v2, alt.body);
  CoreP body = shareEvidence(v2, a, shareEvidence(v1, a, r));
  return cUnpack(pr, un, {}, cApp(cPrim(dupPrimName(a.cls), a.args), cVar(v)),
                 cCase(Mult::One, cVar(un),
                       {{pCtor("()"), cCase(Mult::One, cVar(pr),
                                            {{pCtor("(,)", {pVar(v1), pVar(v2)}), body}})}}));
}

// ---------------------------------------------------------------------------
// Opening a level

namespace {

// Binds every component of a level around `body`.
CoreP openLevel(const EvidenceLevel& lv, CoreP body) {
  for (const auto& c : lv.comps)
    if (c.duplicable && !c.unrestricted) body = shareEvidence(c.var, c.atom, body);
  if (lv.comps.size() == 1 && !lv.comps[0].unrestricted) return body;  // var is the parameter
  std::vector<CorePat> ps;
  for (const auto& c : lv.comps)
    ps.push_back(c.unrestricted ? pCtor("Ur", {pVar(c.var)}) : pVar(c.var));
  return cCase(Mult::One, cVar(lv.var), {{tuplePat(ps), body}});
}

class Names {
 public:
  std::string fresh(const std::string& base) { return base + "#" + std::to_string(next_++); }

 private:
  int next_ = 1;
};

EvidenceLevel makeLevel(const std::string& var, const std::vector<EvidenceSlot>& layout,
                        const DuplicableSet& d, Names& names) {
  EvidenceLevel lv;
  lv.var = var;
  lv.type = evidenceType(layout);
  for (const auto& s : layout) {
    EvidenceComponent c{s.atom, s.unrestricted, d.contains(s.atom), ""};
    c.var = (layout.size() == 1 && !s.unrestricted) ? var : names.fresh(s.unrestricted ? "w" : "ev");
    lv.comps.push_back(c);
  }
  return lv;
}

// Finds givens for wanted slots, innermost level first.
class Resolver {
 public:
  Resolver(std::vector<EvidenceLevel>& levels) : levels_(levels) {}

  std::vector<int> active;
  std::map<std::pair<int, std::string>, int> used;  // (level, atom) -> linear copies taken

  EvidenceSource resolve(const EvidenceSlot& want) {
    for (auto it = active.rbegin(); it != active.rend(); ++it) {
      int li = *it;
      const EvidenceLevel& lv = levels_[li];
      int ucomp = -1;
      std::vector<int> lin;
      for (size_t i = 0; i < lv.comps.size(); ++i) {
        if (!(lv.comps[i].atom == want.atom)) continue;
        if (lv.comps[i].unrestricted)
          ucomp = static_cast<int>(i);
        else
          lin.push_back(static_cast<int>(i));
      }
      if (ucomp < 0 && lin.empty()) continue;
      if (want.unrestricted) {
        if (ucomp < 0)
          throw DesugarError("no unrestricted evidence for " + want.atom.key());
        return {li, ucomp, true};
      }
      if (!lin.empty() && lv.comps[lin[0]].duplicable) {
        if (ucomp >= 0) return {li, ucomp, false};
        return {li, lin[0], false};
      }
      int& k = used[{li, want.atom.key()}];
      if (k < static_cast<int>(lin.size())) return {li, lin[k++], false};
      if (ucomp >= 0) return {li, ucomp, false};
      throw DesugarError("evidence for " + want.atom.key() + " is used too many times");
    }
    throw DesugarError("no evidence in scope for " + want.atom.key());
  }

 private:
  std::vector<EvidenceLevel>& levels_;
};

CoreP componentTerm(const EvidenceLevel& lv, const EvidenceSource& s) {
  const EvidenceComponent& c = lv.comps[s.comp];
  if (s.wrapUr) return cApp(cCtor("Ur", {atomEvidenceType(c.atom)}), cVar(c.var));
  return cVar(c.var);
}

CoreP evidenceTuple(const std::vector<EvidenceLevel>& levels, const std::vector<EvidenceSlot>& want,
                    const std::vector<EvidenceSource>& srcs) {
  std::vector<TypeP> ts;
  std::vector<CoreP> es;
  for (size_t i = 0; i < want.size(); ++i) {
    ts.push_back(slotType(want[i]));
    es.push_back(componentTerm(levels[srcs[i].level], srcs[i]));
  }
  return tupleTerm(ts, es);
}

}  // namespace

// ---------------------------------------------------------------------------
// Elaboration
//
// Translation is bidirectional over core types: evidence layouts are read
// off the core types of the terms that produce or consume evidence, never
// recomputed from instantiated constraints. Substitution can reorder the
// atoms of a constraint, while the core type keeps the callee's order.

namespace {

std::optional<EvidenceSlot> decodeSlot(const TypeP& t) {
  if (t->k != Type::K::Con) return std::nullopt;
  if (t->name.size() > 1 && t->name[0] == '#') return EvidenceSlot{Atom(t->name.substr(1), t->args), false};
  if (t->name == "Ur" && t->args.size() == 1) {
    auto inner = decodeSlot(t->args[0]);
    if (inner && !inner->unrestricted) return EvidenceSlot{inner->atom, true};
  }
  return std::nullopt;
}

std::vector<EvidenceSlot> decodeLayout(const TypeP& t) {
  std::vector<EvidenceSlot> out;
  TypeP cur = t;
  while (true) {
    if (auto s = decodeSlot(cur)) {
      out.push_back(*s);
      return out;
    }
    if (cur->k == Type::K::Con && cur->name == "()" && cur->args.empty()) return out;
    if (cur->k == Type::K::Con && cur->name == "(,)" && cur->args.size() == 2) {
      auto s = decodeSlot(cur->args[0]);
      if (!s) break;
      out.push_back(*s);
      cur = cur->args[1];
      continue;
    }
    break;
  }
  throw DesugarError("not an evidence type: " + printCoreType(t));
}

TypeSubst zipSubst(const std::vector<std::string>& vars, const std::vector<TypeP>& ts) {
  TypeSubst s;
  for (size_t i = 0; i < vars.size() && i < ts.size(); ++i) s[vars[i]] = ts[i];
  return s;
}

std::vector<TypeP> translateAll(const std::vector<TypeP>& ts) {
  std::vector<TypeP> out;
  for (const auto& t : ts) out.push_back(translateType(t));
  return out;
}

CorePat convertPat(const Pattern& p) {
  switch (p.k) {
    case Pattern::K::Var: return pVar(p.name);
    case Pattern::K::Wild: return pWild();
    case Pattern::K::Ctor: {
      std::vector<CorePat> args;
      for (const auto& a : p.args) args.push_back(convertPat(a));
      return pCtor(p.name, args);
    }
    case Pattern::K::Int: break;
  }
  throw DesugarError("integer patterns are not supported");
}

struct Typed {
  CoreP term;
  TypeP type;
};

class Elaborator {
 public:
  // With `replay` set, levels and sources come from an existing plan.
  Elaborator(const GlobalEnv& env, const CoreEnv& cenv, ElaborationPlan& plan, bool replay)
      : env_(env), cenv_(cenv), plan_(plan), replay_(replay), res_(plan.levels) {}

  CoreP run(const TypingDerivation& d) {
    Scheme cs = translateScheme(d.sig);
    TypeP evT = cs.body->args[0];
    int root = replay_ ? 0 : newLevel(nullptr, "z", decodeLayout(evT));
    res_.active.push_back(root);
    Typed body = go(d.root, cs.body->args[1]);
    res_.active.pop_back();
    const EvidenceLevel& lv = plan_.levels[root];
    return cLam(lv.var, Mult::One, lv.type, openLevel(lv, body.term));
  }

 private:
  const GlobalEnv& env_;
  const CoreEnv& cenv_;
  ElaborationPlan& plan_;
  bool replay_;
  Resolver res_;
  Names names_;
  std::vector<std::pair<std::string, Scheme>> locals_;  // core schemes of bound variables

  int newLevel(const DNode* n, const std::string& var, const std::vector<EvidenceSlot>& layout) {
    int id = static_cast<int>(plan_.levels.size());
    plan_.levels.push_back(makeLevel(var, layout, env_.dset, names_));
    if (n) plan_.levelOf[n] = id;
    return id;
  }

  int enter(const DNode* n, const TypeP& evT) {
    int id = replay_ ? plan_.levelOf.at(n) : newLevel(n, names_.fresh("z"), decodeLayout(evT));
    res_.active.push_back(id);
    return id;
  }

  CoreP evidence(const DNode* n, const TypeP& evT) {
    if (!replay_) {
      std::vector<EvidenceSlot> want = decodeLayout(evT);
      std::vector<EvidenceSource> srcs;
      for (const auto& s : want) srcs.push_back(res_.resolve(s));
      plan_.wanted[n] = std::move(want);
      plan_.sources[n] = std::move(srcs);
    }
    return evidenceTuple(plan_.levels, plan_.wanted.at(n), plan_.sources.at(n));
  }

  void bind(const std::string& x, TypeP t) { locals_.push_back({x, Scheme{{}, {}, std::move(t)}}); }
  void bindScheme(const std::string& x, Scheme s) { locals_.push_back({x, std::move(s)}); }
  void unbind(size_t to) { locals_.resize(to); }

  const Scheme& lookup(const std::string& x) const {
    for (auto it = locals_.rbegin(); it != locals_.rend(); ++it)
      if (it->first == x) return it->second;
    throw DesugarError("unbound variable " + x + " during elaboration");
  }

  static TypeP instantiate(const Scheme& s, const std::vector<TypeP>& inst) {
    return substType(s.body, zipSubst(s.vars, inst));
  }

  static const TypeP& arrowDom(const TypeP& t, const char* what) {
    if (t->k != Type::K::Arrow) throw DesugarError(std::string(what) + ": expected a function type, got " + printCoreType(t));
    return t->args[0];
  }

  // Binds the variables of a pattern against a scrutinee of type t.
  void bindPattern(const Pattern& p, const TypeP& t) {
    switch (p.k) {
      case Pattern::K::Var: bind(p.name, t); return;
      case Pattern::K::Wild:
      case Pattern::K::Int: return;
      case Pattern::K::Ctor: {
        const CoreCtor& c = cenv_.ctors.at(p.name);
        if (t->k != Type::K::Con) throw DesugarError("pattern on non-data type " + printCoreType(t));
        TypeSubst s = zipSubst(c.params, t->args);
        for (size_t i = 0; i < p.args.size() && i < c.fields.size(); ++i)
          bindPattern(p.args[i], substType(c.fields[i].second, s));
        return;
      }
    }
  }

  Typed go(const DNodeP& n, const TypeP& expected) {
    Typed r = build(n, expected);
    auto t = std::make_shared<CoreTerm>(*r.term);
    if (!t->span.valid()) t->span = n->span;
    return {t, r.type};
  }

  Typed build(const DNodeP& n, const TypeP& expected) {
    switch (n->rule) {
      case Rule::Var: {
        std::vector<TypeP> inst = translateAll(n->inst);
        if (n->varKind == DNode::VarKind::Local) return {cVar(n->name), lookup(n->name).body};
        CoreP head;
        TypeP ht;
        if (n->varKind == DNode::VarKind::LocalScheme) {
          head = cVar(n->name, inst);
          ht = instantiate(lookup(n->name), inst);
        } else {
          bool prim = !env_.globals.at(n->name).hasBody;
          head = prim ? cPrim(n->name, inst) : cVar(n->name, inst);
          const Scheme& s = prim ? cenv_.prims.at(n->name) : cenv_.globals.at(n->name);
          ht = instantiate(s, inst);
        }
        return {cApp(head, evidence(n.get(), arrowDom(ht, n->name.c_str()))), ht->args[1]};
      }
      case Rule::Ctor: {
        std::vector<TypeP> inst = translateAll(n->inst);
        const CoreCtor& c = cenv_.ctors.at(n->name);
        TypeSubst s = zipSubst(c.params, inst);
        std::vector<TypeP> params;
        for (const auto& p : c.params) params.push_back(s.at(p));
        TypeP t = tCon(c.type, params);
        for (size_t i = c.fields.size(); i-- > 0;)
          t = tArrow(c.fields[i].first, substType(c.fields[i].second, s), t);
        return {cCtor(n->name, inst), t};
      }
      case Rule::Lit:
        return n->isStr ? Typed{cStr(n->sval), tCon("String")} : Typed{cInt(n->ival), tInt()};
      case Rule::QElim: {
        Typed k = go(n->kids[0], nullptr);
        return {cApp(k.term, evidence(n.get(), arrowDom(k.type, "qualified value"))), k.type->args[1]};
      }
      case Rule::Abs: {
        TypeP dom = (expected && expected->k == Type::K::Arrow) ? expected->args[0]
                                                               : translateType(n->binderType);
        TypeP cod = (expected && expected->k == Type::K::Arrow) ? expected->args[1] : nullptr;
        size_t mark = locals_.size();
        bind(n->name, dom);
        Typed b = go(n->kids[0], cod);
        unbind(mark);
        return {cLam(n->name, n->mult, dom, b.term), tArrow(n->mult, dom, b.type)};
      }
      case Rule::App: {
        Typed f = go(n->kids[0], nullptr);
        const TypeP& dom = arrowDom(f.type, "application");
        Typed a = go(n->kids[1], dom);
        return {cApp(f.term, a.term), f.type->args[1]};
      }
      case Rule::Pack: {
        TypeP ex = (expected && expected->k == Type::K::Exists) ? expected : translateType(n->exType);
        std::vector<TypeP> inst = translateAll(n->inst);
        TypeSubst s = zipSubst(ex->vars, inst);
        CoreP ev = evidence(n.get(), substType(ex->args[1], s));
        Typed k = go(n->kids[0], substType(ex->args[0], s));
        return {cPack(ex, inst, ev, k.term), ex};
      }
      case Rule::PackId: return go(n->kids[0], expected);
      case Rule::Unpack: {
        Typed rhs = go(n->kids[0], nullptr);
        if (rhs.type->k != Type::K::Exists || rhs.type->args.size() != 2)
          throw DesugarError("unpacking a non-existential " + printCoreType(rhs.type));
        std::vector<TypeP> sk;
        for (const auto& v : n->skolems) sk.push_back(tVar(v));
        TypeSubst s = zipSubst(rhs.type->vars, sk);
        int id = enter(n.get(), substType(rhs.type->args[1], s));
        size_t mark = locals_.size();
        bind(n->name, substType(rhs.type->args[0], s));
        Typed b = go(n->kids[1], expected);
        unbind(mark);
        res_.active.pop_back();
        const EvidenceLevel& lv = plan_.levels[id];
        return {cUnpack(lv.var, n->name, n->skolems, rhs.term, openLevel(lv, b.term)), b.type};
      }
      case Rule::Case: {
        Typed scrut = go(n->kids[0], nullptr);
        auto saved = res_.used;
        decltype(res_.used) afterFirst;
        std::vector<CoreAlt> alts;
        TypeP result = expected;
        for (size_t i = 1; i < n->kids.size(); ++i) {
          res_.used = saved;
          size_t mark = locals_.size();
          bindPattern(n->pats[i - 1], scrut.type);
          Typed b = go(n->kids[i], result);
          unbind(mark);
          if (!result) result = b.type;
          if (i == 1) afterFirst = res_.used;
          alts.push_back({convertPat(n->pats[i - 1]), b.term});
        }
        res_.used = afterFirst;
        return {cCase(n->mult, scrut.term, alts), result};
      }
      case Rule::Let: {
        Typed rhs = go(n->kids[0], nullptr);
        size_t mark = locals_.size();
        bind(n->name, rhs.type);
        Typed b = go(n->kids[1], expected);
        unbind(mark);
        return {cLet(n->mult, n->name, std::nullopt, rhs.term, b.term), b.type};
      }
      case Rule::LetSig: {
        Scheme s = translateScheme(*n->sig);
        int id = enter(n.get(), s.body->args[0]);
        Typed rhs = go(n->kids[0], s.body->args[1]);
        res_.active.pop_back();
        const EvidenceLevel& lv = plan_.levels[id];
        CoreP fn = cLam(lv.var, Mult::One, lv.type, openLevel(lv, rhs.term));
        size_t mark = locals_.size();
        bindScheme(n->name, s);
        Typed b = go(n->kids[1], expected);
        unbind(mark);
        return {cLet(n->mult, n->name, s, fn, b.term), b.type};
      }
      case Rule::QIntro: {
        TypeP evT, cod;
        if (expected && expected->k == Type::K::Arrow) {
          evT = expected->args[0];
          cod = expected->args[1];
        } else {
          evT = evidenceType(n->q);
        }
        int id = enter(n.get(), evT);
        Typed k = go(n->kids[0], cod);
        res_.active.pop_back();
        const EvidenceLevel& lv = plan_.levels[id];
        return {cLam(lv.var, Mult::One, lv.type, openLevel(lv, k.term)),
                tArrow(Mult::One, lv.type, k.type)};
      }
    }
    throw DesugarError("unknown derivation node");
  }
};

}  // namespace

ElaborationPlan planElaboration(const GlobalEnv& env, const CoreEnv& cenv,
                                const TypingDerivation& deriv) {
  ElaborationPlan plan;
  Elaborator(env, cenv, plan, false).run(deriv);
  return plan;
}

CoreP desugarDerivation(const GlobalEnv& env, const CoreEnv& cenv, const TypingDerivation& deriv,
                        const ElaborationPlan& plan) {
  ElaborationPlan p = plan;
  return Elaborator(env, cenv, p, true).run(deriv);
}

CoreDecl desugarDecl(const GlobalEnv& env, const CoreEnv& cenv, const TypingDerivation& deriv) {
  ElaborationPlan plan = planElaboration(env, cenv, deriv);
  CoreDecl d;
  d.name = deriv.name;
  d.scheme = translateScheme(deriv.sig);
  d.body = flattenPatterns(cenv, desugarDerivation(env, cenv, deriv, plan));
  d.span = deriv.span;
  return d;
}

// ---------------------------------------------------------------------------
// Standalone evidence functions

CoreP entailmentEvidence(const SimpleConstraint& q1, const SimpleConstraint& q2,
                         const DuplicableSet& d) {
  if (!entailsSimple(q1, q2, d))
    throw NoDerivation(showSimple(q1) + " does not entail " + showSimple(q2));
  std::vector<EvidenceSlot> have = evidenceLayout(q1), want = evidenceLayout(q2);
  if (have.size() == 1 && want.size() == 1 && !have[0].unrestricted && !want[0].unrestricted)
    return cLam("z", Mult::One, evidenceType(have), cVar("z"));

  std::vector<EvidenceLevel> levels;
  Names names;
  levels.push_back(makeLevel("z", have, d, names));
  Resolver res(levels);
  res.active.push_back(0);
  std::vector<EvidenceSource> srcs;
  for (const auto& s : want) srcs.push_back(res.resolve(s));
  CoreP body = evidenceTuple(levels, want, srcs);
  return cLam("z", Mult::One, levels[0].type, openLevel(levels[0], body));
}

CoreP urCoerce(const CoreP& e, const SimpleConstraint& q) {
  std::vector<EvidenceSlot> want = evidenceLayout(q);
  if (want.size() == 1 && !want[0].unrestricted) return e;
  std::vector<EvidenceSlot> have = evidenceLayout(scaleSimple(Mult::Many, q));
  std::vector<CorePat> ps;
  std::map<std::string, std::string> var;  // atom -> bound variable
  for (size_t i = 0; i < have.size(); ++i) {
    std::string v = "w" + std::to_string(i + 1);
    var[have[i].atom.key()] = v;
    ps.push_back(pCtor("Ur", {pVar(v)}));
  }
  std::vector<TypeP> ts;
  std::vector<CoreP> es;
  for (const auto& s : want) {
    ts.push_back(slotType(s));
    CoreP w = cVar(var.at(s.atom.key()));
    es.push_back(s.unrestricted ? cApp(cCtor("Ur", {atomEvidenceType(s.atom)}), w) : w);
  }
  CoreP body = cApp(cCtor("Ur", {evidenceType(want)}), tupleTerm(ts, es));
  CoreP scrut = e;
  if (have.size() == 1) return cCase(Mult::One, scrut, {{ps[0], body}});
  return cCase(Mult::One, scrut, {{tuplePat(ps), body}});
}

}  // namespace linck
