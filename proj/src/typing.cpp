#include "linck/typing.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace linck {

std::string typeErrorKindStr(TypeError::Kind k) {
  switch (k) {
    case TypeError::Kind::Mismatch: return "TypeError";
    case TypeError::Kind::Linearity: return "LinearityError";
    case TypeError::Kind::Arity: return "ArityError";
    case TypeError::Kind::UnknownName: return "UnknownName";
    case TypeError::Kind::Other: return "TypeError";
  }
  return "TypeError";
}

std::string ruleStr(Rule r) {
  switch (r) {
    case Rule::Var: return "G-VAR";
    case Rule::Ctor: return "G-CTOR";
    case Rule::QElim: return "G-QELIM";
    case Rule::Abs: return "G-ABS";
    case Rule::App: return "G-APP";
    case Rule::Pack: return "G-PACK";
    case Rule::PackId: return "G-PACKID";
    case Rule::Unpack: return "G-UNPACK";
    case Rule::Case: return "G-CASE";
    case Rule::Let: return "G-LET";
    case Rule::LetSig: return "G-LETSIG";
    case Rule::QIntro: return "G-QINTRO";
    case Rule::Lit: return "G-LIT";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Usage

Use useAdd(Use a, Use b) {
  if (a == Use::Zero) return b;
  if (b == Use::Zero) return a;
  if (a == Use::Mixed || b == Use::Mixed) return Use::Mixed;
  return Use::Many;
}

Use useScale(Mult m, Use u) {
  if (m == Mult::One || u == Use::Zero || u == Use::Mixed) return u;
  return Use::Many;
}

Use useJoin(Use a, Use b) { return a == b ? a : Use::Mixed; }

std::string useStr(Use u) {
  switch (u) {
    case Use::Zero: return "0";
    case Use::One: return "1";
    case Use::Many: return "w";
    case Use::Mixed: return "mixed";
  }
  return "?";
}

namespace {

UsageMap addUsage(const UsageMap& a, const UsageMap& b) {
  UsageMap r = a;
  for (const auto& [k, u] : b) r[k] = useAdd(r.count(k) ? r[k] : Use::Zero, u);
  return r;
}

UsageMap scaleUsage(Mult m, const UsageMap& a) {
  UsageMap r;
  for (const auto& [k, u] : a) r[k] = useScale(m, u);
  return r;
}

UsageMap joinUsage(const UsageMap& a, const UsageMap& b) {
  UsageMap r;
  std::set<std::string> keys;
  for (const auto& [k, u] : a) keys.insert(k);
  for (const auto& [k, u] : b) keys.insert(k);
  for (const auto& k : keys) {
    Use x = a.count(k) ? a.at(k) : Use::Zero;
    Use y = b.count(k) ? b.at(k) : Use::Zero;
    r[k] = useJoin(x, y);
  }
  return r;
}

[[noreturn]] void typeFail(TypeError::Kind k, const std::string& msg, const SourceSpan& at) {
  throw TypeError(k, msg, at);
}

}  // namespace

// ---------------------------------------------------------------------------
// Environment

namespace {

SimpleConstraint resolveConstraint(const GlobalEnv& env, const SimpleConstraint& q,
                                   const SourceSpan& at, int depth = 0);

TypeP resolveTypeImpl(const GlobalEnv& env, const TypeP& t, const SourceSpan& at) {
  switch (t->k) {
    case Type::K::Var:
    case Type::K::Meta: return t;
    case Type::K::Con: {
      if (t->name == "w.") typeFail(TypeError::Kind::Other, "'w.' is only allowed in constraints", at);
      auto it = env.types.find(t->name);
      if (it == env.types.end()) {
        if (env.classes.count(t->name) || env.synonyms.count(t->name))
          typeFail(TypeError::Kind::Mismatch,
                   "constraint " + t->name + " used where a type is expected", at);
        typeFail(TypeError::Kind::UnknownName, "unknown type constructor " + t->name, at);
      }
      if (it->second.params.size() != t->args.size())
        typeFail(TypeError::Kind::Arity,
                 "type constructor " + t->name + " expects " +
                     std::to_string(it->second.params.size()) + " argument(s), given " +
                     std::to_string(t->args.size()),
                 at);
      std::vector<TypeP> args;
      for (const auto& a : t->args) args.push_back(resolveTypeImpl(env, a, at));
      return tCon(t->name, std::move(args));
    }
    case Type::K::Arrow:
      return tArrow(t->mult, resolveTypeImpl(env, t->args[0], at),
                    resolveTypeImpl(env, t->args[1], at));
    case Type::K::Exists:
      return tExists(t->vars, resolveTypeImpl(env, t->args[0], at),
                     resolveConstraint(env, t->q, at));
    case Type::K::Qual:
      return tQual(resolveConstraint(env, t->q, at), resolveTypeImpl(env, t->args[0], at));
  }
  return t;
}

SimpleConstraint resolveAtom(const GlobalEnv& env, const Atom& a, Mult m, int count,
                             const SourceSpan& at, int depth) {
  if (depth > 32) typeFail(TypeError::Kind::Other, "constraint synonym cycle at " + a.cls, at);
  std::vector<TypeP> args;
  for (const auto& x : a.args) args.push_back(resolveTypeImpl(env, x, at));
  auto syn = env.synonyms.find(a.cls);
  SimpleConstraint out;
  if (syn != env.synonyms.end()) {
    if (syn->second.params.size() != args.size())
      typeFail(TypeError::Kind::Arity,
               "constraint synonym " + a.cls + " expects " +
                   std::to_string(syn->second.params.size()) + " argument(s)",
               at);
    TypeSubst s;
    for (size_t i = 0; i < args.size(); ++i) s[syn->second.params[i]] = args[i];
    SimpleConstraint body = scaleSimple(m, substituteSimple(syn->second.body, s, true));
    body = resolveConstraint(env, body, at, depth + 1);
    for (int i = 0; i < count; ++i) out = tensor(out, body);
    return out;
  }
  auto cls = env.classes.find(a.cls);
  if (cls == env.classes.end()) {
    if (env.types.count(a.cls))
      typeFail(TypeError::Kind::Mismatch, "type " + a.cls + " used where a constraint is expected",
               at);
    typeFail(TypeError::Kind::UnknownName, "unknown constraint class " + a.cls, at);
  }
  if (cls->second.arity != static_cast<int>(args.size()))
    typeFail(TypeError::Kind::Arity,
             "class " + a.cls + " expects " + std::to_string(cls->second.arity) +
                 " argument(s), given " + std::to_string(args.size()),
             at);
  Atom r(a.cls, args);
  if (m == Mult::Many)
    out.U.insert(r);
  else
    out.addLinear(r, count);
  return out;
}

SimpleConstraint resolveConstraint(const GlobalEnv& env, const SimpleConstraint& q,
                                   const SourceSpan& at, int depth) {
  SimpleConstraint out;
  for (const auto& a : q.U) out = tensor(out, resolveAtom(env, a, Mult::Many, 1, at, depth));
  for (const auto& [a, n] : q.L) out = tensor(out, resolveAtom(env, a, Mult::One, n, at, depth));
  return out;
}

void orderedFreeVars(const TypeP& t, std::vector<std::string>& out,
                     std::set<std::string> bound = {}) {
  switch (t->k) {
    case Type::K::Var:
      if (!bound.count(t->name) && std::find(out.begin(), out.end(), t->name) == out.end())
        out.push_back(t->name);
      return;
    case Type::K::Meta: return;
    case Type::K::Exists:
      for (const auto& v : t->vars) bound.insert(v);
      [[fallthrough]];
    default:
      for (const auto& a : t->q.atoms())
        for (const auto& x : a.args) orderedFreeVars(x, out, bound);
      for (const auto& a : t->args) orderedFreeVars(a, out, bound);
  }
}

void orderedFreeVars(const SimpleConstraint& q, std::vector<std::string>& out) {
  for (const auto& a : q.atoms())
    for (const auto& x : a.args) orderedFreeVars(x, out);
}

}  // namespace

TypeP resolveType(const GlobalEnv& env, const TypeP& t, const SourceSpan& at) {
  return resolveTypeImpl(env, t, at);
}

Scheme resolveScheme(const GlobalEnv& env, const Scheme& s, const SourceSpan& at) {
  Scheme r;
  r.vars = s.vars;
  r.q = resolveConstraint(env, s.q, at);
  r.body = resolveTypeImpl(env, s.body, at);
  return r;
}

namespace {

// Top-level schemes quantify over their free variables in order of
// appearance unless an explicit forall lists them.
Scheme closeScheme(const GlobalEnv& env, const Scheme& s, const SourceSpan& at) {
  Scheme r = resolveScheme(env, s, at);
  std::vector<std::string> fv;
  orderedFreeVars(r.q, fv);
  orderedFreeVars(r.body, fv);
  if (s.vars.empty()) {
    r.vars = fv;
  } else {
    for (const auto& v : fv)
      if (std::find(s.vars.begin(), s.vars.end(), v) == s.vars.end())
        typeFail(TypeError::Kind::UnknownName, "unbound type variable " + v, at);
  }
  return r;
}

}  // namespace

GlobalEnv buildGlobalEnv(const std::vector<const SurfaceProgram*>& programs) {
  GlobalEnv env;
  env.types["Int"] = {};
  env.types["String"] = {};
  env.types["()"] = {{}, {"()"}};
  env.types["(,)"] = {{"a", "b"}, {"(,)"}};
  env.ctors["()"] = {"()", {}, {}};
  env.ctors["(,)"] = {"(,)", {"a", "b"}, {{Mult::One, tVar("a")}, {Mult::One, tVar("b")}}};
  for (const auto* p : programs) {
    for (const auto& c : p->classDecls) {
      if (env.classes.count(c.name) || env.synonyms.count(c.name))
        typeFail(TypeError::Kind::Other, "duplicate constraint class " + c.name, c.span);
      env.classes[c.name] = {c.arity, c.duplicable};
      if (c.duplicable) env.dset.members.insert(c.name);
    }
    for (const auto& s : p->synonyms) {
      if (env.classes.count(s.name) || env.synonyms.count(s.name))
        typeFail(TypeError::Kind::Other, "duplicate constraint synonym " + s.name, s.span);
      env.synonyms[s.name] = s;
    }
    for (const auto& d : p->dataDecls) {
      if (env.types.count(d.name))
        typeFail(TypeError::Kind::Other, "duplicate type " + d.name, d.span);
      TypeConInfo info;
      info.params = d.params;
      for (const auto& k : d.cons) info.ctors.push_back(k.name);
      env.types[d.name] = info;
    }
  }
  for (const auto* p : programs) {
    for (const auto& d : p->dataDecls) {
      for (const auto& k : d.cons) {
        if (env.ctors.count(k.name))
          typeFail(TypeError::Kind::Other, "duplicate constructor " + k.name, d.span);
        CtorInfo ci;
        ci.type = d.name;
        ci.params = d.params;
        for (const auto& [m, t] : k.fields) {
          TypeP rt = resolveTypeImpl(env, t, d.span);
          std::set<std::string> fv;
          freeTypeVars(rt, fv);
          for (const auto& v : fv)
            if (std::find(d.params.begin(), d.params.end(), v) == d.params.end())
              typeFail(TypeError::Kind::UnknownName, "unbound type variable " + v, d.span);
          ci.fields.push_back({m, rt});
        }
        env.ctors[k.name] = ci;
      }
    }
  }
  for (const auto* p : programs) {
    const bool prelude = p->file.find("prelude") != std::string::npos;
    for (const auto& v : p->valueDecls) {
      if (env.globals.count(v.name))
        typeFail(TypeError::Kind::Other, "duplicate declaration of " + v.name,
                 v.sigSpan.valid() ? v.sigSpan : v.span);
      if (!v.sig)
        typeFail(TypeError::Kind::Other, "declaration " + v.name + " needs a type signature",
                 v.span);
      GlobalInfo g;
      g.sig = closeScheme(env, *v.sig, v.sigSpan);
      g.hasBody = v.body != nullptr;
      g.fromPrelude = prelude;
      g.span = v.sigSpan;
      env.globals[v.name] = g;
    }
  }
  return env;
}

Instantiation instantiateScheme(const Scheme& s, const std::optional<std::vector<TypeP>>& args,
                                int& nextMeta) {
  if (args && args->size() != s.vars.size())
    throw TypeError(TypeError::Kind::Arity,
                    "scheme expects " + std::to_string(s.vars.size()) + " type argument(s), given " +
                        std::to_string(args->size()),
                    {});
  Instantiation r;
  for (size_t i = 0; i < s.vars.size(); ++i)
    r.subst[s.vars[i]] = args ? (*args)[i] : tMeta(nextMeta++);
  r.type = substType(s.body, r.subst);
  r.q = substituteSimple(s.q, r.subst, true);
  return r;
}

// ---------------------------------------------------------------------------
// Checker

namespace {

struct Local {
  std::string name;
  std::string key;
  Mult mult;
  Scheme sch;  // vars empty for monomorphic binders
  bool poly = false;
};

class Checker {
 public:
  Checker(const GlobalEnv& env) : env_(env) {}

  TypingDerivation checkDecl(const std::string& name, const ExprP& body) {
    const GlobalInfo& g = env_.globals.at(name);
    tyScope_ = g.sig.vars;
    usedTyNames_.insert(g.sig.vars.begin(), g.sig.vars.end());
    DNodeP root = go(body, g.sig.body, body->span);
    finish(root);
    if (!root->usage.empty())
      typeFail(TypeError::Kind::Other, "internal: free local variables remain", body->span);
    TypingDerivation d;
    d.name = name;
    d.sig = g.sig;
    d.root = root;
    d.span = body->span;
    d.fromPrelude = g.fromPrelude;
    return d;
  }

 private:
  const GlobalEnv& env_;
  std::vector<TypeP> sol_;
  int nextMeta_ = 0;
  int nextKey_ = 0;
  std::vector<Local> locals_;
  std::vector<std::string> tyScope_;
  std::set<std::string> usedTyNames_;
  std::vector<DNodeP> unpacks_;

  // ---- metas and unification ----

  TypeP fresh() {
    sol_.push_back(nullptr);
    return tMeta(nextMeta_++);
  }

  void syncMetas() {
    if (static_cast<int>(sol_.size()) < nextMeta_) sol_.resize(nextMeta_);
  }

  TypeP zonk(const TypeP& t) {
    switch (t->k) {
      case Type::K::Meta: {
        if (t->meta < static_cast<int>(sol_.size()) && sol_[t->meta]) {
          TypeP z = zonk(sol_[t->meta]);
          sol_[t->meta] = z;
          return z;
        }
        return t;
      }
      case Type::K::Var: return t;
      case Type::K::Exists: {
        // Solutions may mention rigid names that coincide with the binders.
        std::set<std::string> sfv;
        metaSolutionVars(t, sfv);
        TypeSubst ren;
        for (const auto& v : t->vars) {
          if (!sfv.count(v)) continue;
          std::string n = v + "'";
          while (sfv.count(n) || std::find(t->vars.begin(), t->vars.end(), n) != t->vars.end())
            n += "'";
          ren[v] = tVar(n);
          sfv.insert(n);
        }
        auto r = std::make_shared<Type>(*t);
        if (!ren.empty()) {
          for (auto& v : r->vars)
            if (ren.count(v)) v = ren[v]->name;
          r->args[0] = substType(t->args[0], ren);
          r->q = substituteSimple(t->q, ren, true);
        }
        r->args[0] = zonk(r->args[0]);
        r->q = zonkQ(r->q);
        return r;
      }
      default: {
        auto r = std::make_shared<Type>(*t);
        for (auto& a : r->args) a = zonk(a);
        r->q = zonkQ(t->q);
        return r;
      }
    }
  }

  void metaSolutionVars(const TypeP& t, std::set<std::string>& out) {
    if (t->k == Type::K::Meta) {
      TypeP z = zonk(t);
      if (z->k != Type::K::Meta) freeTypeVars(z, out);
      return;
    }
    for (const auto& a : t->args) metaSolutionVars(a, out);
    for (const auto& a : t->q.atoms())
      for (const auto& x : a.args) metaSolutionVars(x, out);
  }

  SimpleConstraint zonkQ(const SimpleConstraint& q) {
    SimpleConstraint r;
    auto za = [&](const Atom& a) {
      std::vector<TypeP> args;
      for (const auto& x : a.args) args.push_back(zonk(x));
      return Atom(a.cls, args);
    };
    for (const auto& a : q.U) r.U.insert(za(a));
    for (const auto& [a, n] : q.L) r.addLinear(za(a), n);
    return r;
  }

  bool occurs(int m, const TypeP& t) {
    TypeP z = zonk(t);
    if (z->k == Type::K::Meta) return z->meta == m;
    for (const auto& a : z->args)
      if (occurs(m, a)) return true;
    for (const auto& a : z->q.atoms())
      for (const auto& x : a.args)
        if (occurs(m, x)) return true;
    return false;
  }

  bool unifyRec(TypeP a, TypeP b) {
    a = zonk(a);
    b = zonk(b);
    if (a->k == Type::K::Meta && b->k == Type::K::Meta && a->meta == b->meta) return true;
    if (a->k == Type::K::Meta) {
      if (occurs(a->meta, b)) return false;
      sol_[a->meta] = b;
      return true;
    }
    if (b->k == Type::K::Meta) return unifyRec(b, a);
    if (a->k != b->k) return false;
    switch (a->k) {
      case Type::K::Var: return a->name == b->name;
      case Type::K::Con:
        if (a->name != b->name || a->args.size() != b->args.size()) return false;
        for (size_t i = 0; i < a->args.size(); ++i)
          if (!unifyRec(a->args[i], b->args[i])) return false;
        return true;
      case Type::K::Arrow:
        return a->mult == b->mult && unifyRec(a->args[0], b->args[0]) &&
               unifyRec(a->args[1], b->args[1]);
      case Type::K::Exists: {
        if (a->vars.size() != b->vars.size()) return false;
        TypeSubst sa, sb;
        for (size_t i = 0; i < a->vars.size(); ++i) {
          TypeP v = tVar("$u" + std::to_string(nextKey_++));
          sa[a->vars[i]] = v;
          sb[b->vars[i]] = v;
        }
        return unifyRec(substType(a->args[0], sa), substType(b->args[0], sb)) &&
               unifyQ(substituteSimple(a->q, sa, true), substituteSimple(b->q, sb, true));
      }
      case Type::K::Qual: return unifyQ(a->q, b->q) && unifyRec(a->args[0], b->args[0]);
      case Type::K::Meta: return false;
    }
    return false;
  }

  // Pairs atoms class by class, in canonical order, then compares.
  bool unifyQ(const SimpleConstraint& x0, const SimpleConstraint& y0) {
    SimpleConstraint x = zonkQ(x0), y = zonkQ(y0);
    if (x == y) return true;
    auto group = [](const SimpleConstraint& q, bool ur) {
      std::map<std::string, std::vector<Atom>> g;
      if (ur) {
        for (const auto& a : q.U) g[a.cls].push_back(a);
      } else {
        for (const auto& [a, n] : q.L)
          for (int i = 0; i < n; ++i) g[a.cls].push_back(a);
      }
      return g;
    };
    for (bool ur : {true, false}) {
      auto gx = group(x, ur), gy = group(y, ur);
      if (gx.size() != gy.size()) return false;
      for (const auto& [cls, as] : gx) {
        auto it = gy.find(cls);
        if (it == gy.end() || it->second.size() != as.size()) return false;
        for (size_t i = 0; i < as.size(); ++i) {
          if (as[i].args.size() != it->second[i].args.size()) return false;
          for (size_t j = 0; j < as[i].args.size(); ++j)
            if (!unifyRec(as[i].args[j], it->second[i].args[j])) return false;
        }
      }
    }
    return zonkQ(x) == zonkQ(y);
  }

  void unify(const TypeP& actual, const TypeP& expected, const SourceSpan& at) {
    syncMetas();
    if (!unifyRec(actual, expected))
      typeFail(TypeError::Kind::Mismatch,
               "type mismatch: expected " + showType(zonk(expected)) + ", found " +
                   showType(zonk(actual)),
               at);
  }

  Instantiation inst(const Scheme& s) {
    Instantiation r = instantiateScheme(s, std::nullopt, nextMeta_);
    syncMetas();
    return r;
  }

  // ---- scopes ----

  std::string newKey(const std::string& name) { return name + "/" + std::to_string(nextKey_++); }

  std::string freshTyName(const std::string& base) {
    std::string n = base;
    for (int i = 1; usedTyNames_.count(n); ++i) n = base + std::to_string(i);
    usedTyNames_.insert(n);
    return n;
  }

  void pushLocal(const std::string& name, const std::string& key, Mult m, TypeP t) {
    Local l;
    l.name = name;
    l.key = key;
    l.mult = m;
    l.sch.body = std::move(t);
    locals_.push_back(std::move(l));
  }

  const Local* findLocalByKey(const std::string& key) const {
    for (const auto& l : locals_)
      if (l.key == key) return &l;
    return nullptr;
  }

  // Validates a binder's usage against its multiplicity and drops it.
  void closeBinder(UsageMap& usage, const std::string& key, const std::string& name, Mult m,
                   const SourceSpan& at) {
    Use u = usage.count(key) ? usage[key] : Use::Zero;
    usage.erase(key);
    if (m == Mult::Many) return;
    switch (u) {
      case Use::One: return;
      case Use::Zero:
        typeFail(TypeError::Kind::Linearity, "linear variable " + name + " is not used", at);
      case Use::Many:
        typeFail(TypeError::Kind::Linearity, "linear variable " + name + " is used more than once",
                 at);
      case Use::Mixed:
        typeFail(TypeError::Kind::Linearity,
                 "linear variable " + name + " is used in some case branches but not others", at);
    }
  }

  TypeP resolveInScope(const TypeP& t, const SourceSpan& at) {
    TypeP r = resolveType(env_, t, at);
    std::set<std::string> fv;
    freeTypeVars(r, fv);
    for (const auto& v : fv)
      if (std::find(tyScope_.begin(), tyScope_.end(), v) == tyScope_.end())
        typeFail(TypeError::Kind::UnknownName, "unbound type variable " + v, at);
    return r;
  }

  // Local signatures may mention type variables in scope; the rest are
  // quantified. Quantified names are freshened to keep them distinct.
  Scheme resolveLocalScheme(const Scheme& s0, const SourceSpan& at) {
    Scheme s = resolveScheme(env_, s0, at);
    std::vector<std::string> fv;
    orderedFreeVars(s.q, fv);
    orderedFreeVars(s.body, fv);
    std::vector<std::string> quant = s.vars;
    for (const auto& v : fv) {
      bool inScope = std::find(tyScope_.begin(), tyScope_.end(), v) != tyScope_.end();
      bool listed = std::find(quant.begin(), quant.end(), v) != quant.end();
      if (!inScope && !listed) quant.push_back(v);
    }
    TypeSubst ren;
    Scheme r;
    for (const auto& v : quant) {
      std::string n = freshTyName(v);
      r.vars.push_back(n);
      if (n != v) ren[v] = tVar(n);
    }
    r.q = substituteSimple(s.q, ren, true);
    r.body = substType(s.body, ren);
    return r;
  }

  DNodeP node(Rule r, const SourceSpan& span) {
    auto n = std::make_shared<DNode>();
    n->rule = r;
    n->span = span;
    return n;
  }

  DNodeP elimQual(DNodeP n) {
    while (true) {
      TypeP t = zonk(n->type);
      if (t->k != Type::K::Qual) return n;
      DNodeP e = node(Rule::QElim, n->span);
      e->q = t->q;
      e->type = t->args[0];
      e->usage = n->usage;
      e->kids = {n};
      n = e;
    }
  }

  // ---- expressions ----

  DNodeP go(const ExprP& e, std::optional<TypeP> expected, const SourceSpan& site) {
    if (expected) {
      TypeP ex = zonk(*expected);
      if (ex->k == Type::K::Qual) {
        DNodeP n = node(Rule::QIntro, e->span);
        n->q = ex->q;
        n->implSpan = site.valid() ? site : e->span;
        DNodeP k = go(e, ex->args[0], e->span);
        n->kids = {k};
        n->usage = k->usage;
        n->type = ex;
        return n;
      }
    }
    switch (e->k) {
      case Expr::K::Var: {
        DNodeP n = var(e);
        if (expected) unify(n->type, *expected, e->span);
        return n;
      }
      case Expr::K::Ctor: {
        DNodeP n = ctor(e);
        if (expected) unify(n->type, *expected, e->span);
        return n;
      }
      case Expr::K::Int:
      case Expr::K::Str: {
        DNodeP n = node(Rule::Lit, e->span);
        n->isStr = e->k == Expr::K::Str;
        n->ival = e->ival;
        n->sval = e->sval;
        n->type = n->isStr ? tCon("String") : tInt();
        if (expected) unify(n->type, *expected, e->span);
        return n;
      }
      case Expr::K::App: return app(e, expected);
      case Expr::K::Lambda: return lambda(e, expected);
      case Expr::K::Pack: return pack(e, expected);
      case Expr::K::Unpack: {
        DNodeP rhs = go(e->a, std::nullopt, e->a->span);
        return unpack(e->name, nullptr, rhs, e->b, expected, e->span);
      }
      case Expr::K::Case: return caseExpr(e, expected);
      case Expr::K::Let: return let(e, expected);
    }
    typeFail(TypeError::Kind::Other, "unsupported expression", e->span);
  }

  DNodeP var(const ExprP& e) {
    for (auto it = locals_.rbegin(); it != locals_.rend(); ++it) {
      if (it->name != e->name) continue;
      DNodeP n = node(Rule::Var, e->span);
      n->name = e->name;
      n->key = it->key;
      if (it->poly) {
        Instantiation in = inst(it->sch);
        n->varKind = DNode::VarKind::LocalScheme;
        for (const auto& v : it->sch.vars) n->inst.push_back(in.subst.at(v));
        n->type = in.type;
        n->q = in.q;
      } else {
        n->varKind = DNode::VarKind::Local;
        n->type = it->sch.body;
      }
      n->usage[it->key] = Use::One;
      return elimQual(n);
    }
    auto g = env_.globals.find(e->name);
    if (g == env_.globals.end()) {
      if (e->name == kBind || e->name == kThen)
        typeFail(TypeError::Kind::Other,
                 e->name + " must be applied to an action and a continuation", e->span);
      typeFail(TypeError::Kind::UnknownName, "unknown variable " + e->name, e->span);
    }
    DNodeP n = node(Rule::Var, e->span);
    n->name = e->name;
    n->varKind = DNode::VarKind::Global;
    Instantiation in = inst(g->second.sig);
    for (const auto& v : g->second.sig.vars) n->inst.push_back(in.subst.at(v));
    n->type = in.type;
    n->q = in.q;
    return elimQual(n);
  }

  TypeP ctorType(const CtorInfo& ci, std::vector<TypeP>& instOut) {
    TypeSubst s;
    std::vector<TypeP> args;
    for (const auto& p : ci.params) {
      TypeP m = fresh();
      s[p] = m;
      args.push_back(m);
      instOut.push_back(m);
    }
    TypeP t = tCon(ci.type, args);
    for (size_t i = ci.fields.size(); i-- > 0;)
      t = tArrow(ci.fields[i].first, substType(ci.fields[i].second, s), t);
    return t;
  }

  DNodeP ctor(const ExprP& e) {
    auto it = env_.ctors.find(e->name);
    if (it == env_.ctors.end())
      typeFail(TypeError::Kind::UnknownName, "unknown constructor " + e->name, e->span);
    DNodeP n = node(Rule::Ctor, e->span);
    n->name = e->name;
    n->type = ctorType(it->second, n->inst);
    return n;
  }

  DNodeP app(const ExprP& e, std::optional<TypeP> expected) {
    std::vector<ExprP> spine;
    ExprP head = e;
    while (head->k == Expr::K::App) {
      spine.push_back(head);
      head = head->a;
    }
    std::reverse(spine.begin(), spine.end());  // innermost application first
    if (head->k == Expr::K::Var && (head->name == kBind || head->name == kThen) &&
        !findLocal(head->name)) {
      if (spine.size() != 2)
        typeFail(TypeError::Kind::Other,
                 head->name + " must be applied to an action and a continuation", e->span);
      return bindOrThen(head->name == kBind, spine[0]->b, spine[1]->b, expected, e->span);
    }
    DNodeP f = go(head, std::nullopt, head->span);
    // Peel the arrows first so the expected result type can inform the
    // arguments.
    std::vector<std::pair<Mult, TypeP>> params;
    TypeP t = zonk(f->type);
    for (size_t i = 0; i < spine.size(); ++i) {
      if (t->k != Type::K::Arrow) {
        if (i == 0)
          typeFail(TypeError::Kind::Mismatch,
                   "cannot apply a value of type " + showType(t) + " to an argument", spine[i]->span);
        break;
      }
      params.push_back({t->mult, t->args[0]});
      t = zonk(t->args[1]);
    }
    if (params.size() < spine.size())
      typeFail(TypeError::Kind::Arity,
               "function applied to too many arguments (" + std::to_string(spine.size()) +
                   " given, " + std::to_string(params.size()) + " accepted)",
               e->span);
    if (expected && t->k != Type::K::Qual) unify(t, *expected, e->span);
    DNodeP cur = f;
    for (size_t i = 0; i < spine.size(); ++i) {
      DNodeP arg = go(spine[i]->b, params[i].second, spine[i]->span);
      TypeP ft = zonk(cur->type);
      DNodeP n = node(Rule::App, spine[i]->span);
      n->mult = params[i].first;
      n->type = ft->args[1];
      n->kids = {cur, arg};
      n->usage = addUsage(cur->usage, scaleUsage(n->mult, arg->usage));
      cur = (i + 1 < spine.size()) ? n : elimQual(n);
    }
    if (expected) unify(cur->type, *expected, e->span);
    return cur;
  }

  const Local* findLocal(const std::string& name) const {
    for (auto it = locals_.rbegin(); it != locals_.rend(); ++it)
      if (it->name == name) return &*it;
    return nullptr;
  }

  DNodeP bindOrThen(bool isBind, const ExprP& u, const ExprP& k, std::optional<TypeP> expected,
                    const SourceSpan& span) {
    DNodeP rhs = go(u, std::nullopt, u->span);
    TypeP t = zonk(rhs->type);
    if (isBind) {
      if (k->k != Expr::K::Lambda)
        typeFail(TypeError::Kind::Other, "the continuation of a bind must be a lambda", k->span);
      if (t->k == Type::K::Exists) return unpack(k->name, k->annot, rhs, k->a, expected, span);
      // A plain value: bind it linearly.
      if (k->annot) unify(t, resolveInScope(k->annot, k->span), k->span);
      DNodeP n = node(Rule::Let, span);
      n->name = k->name;
      n->key = newKey(k->name);
      n->mult = Mult::One;
      n->binderType = t;
      pushLocal(k->name, n->key, Mult::One, t);
      DNodeP body = go(k->a, expected, k->a->span);
      locals_.pop_back();
      n->kids = {rhs, body};
      n->usage = addUsage(rhs->usage, body->usage);
      closeBinder(n->usage, n->key, n->name, Mult::One, span);
      n->type = body->type;
      return n;
    }
    // then: the action must produce (), possibly alongside constraints.
    std::function<DNodeP()> rest = [&]() -> DNodeP { return go(k, expected, k->span); };
    if (t->k == Type::K::Exists) {
      std::string x = "u#" + std::to_string(nextKey_);
      return unpackWith(x, rhs, span, expected, [&](const std::string& key, const TypeP& payload) {
        unify(payload, tUnit(), u->span);
        DNodeP v = node(Rule::Var, u->span);
        v->name = x;
        v->key = key;
        v->type = tUnit();
        v->usage[key] = Use::One;
        return unitCase(v, rest(), span);
      });
    }
    unify(t, tUnit(), u->span);
    return unitCase(rhs, rest(), span);
  }

  DNodeP unitCase(DNodeP scrut, DNodeP body, const SourceSpan& span) {
    DNodeP n = node(Rule::Case, span);
    n->mult = Mult::One;
    n->binderType = tUnit();
    Pattern p;
    p.k = Pattern::K::Ctor;
    p.name = "()";
    n->pats = {p};
    n->kids = {scrut, body};
    n->usage = addUsage(scrut->usage, body->usage);
    n->type = body->type;
    return n;
  }

  DNodeP unpack(const std::string& x, const TypeP& annot, DNodeP rhs, const ExprP& bodyE,
                std::optional<TypeP> expected, const SourceSpan& span) {
    return unpackWith(x, rhs, span, expected, [&](const std::string& key, const TypeP& payload) {
      if (annot) unify(payload, resolveInScope(annot, span), span);
      pushLocal(x, key, Mult::One, payload);
      DNodeP body = go(bodyE, expected, bodyE->span);
      locals_.pop_back();
      return body;
    });
  }

  DNodeP unpackWith(const std::string& x, DNodeP rhs, const SourceSpan& span,
                    std::optional<TypeP>,
                    const std::function<DNodeP(const std::string&, const TypeP&)>& body) {
    TypeP t = zonk(rhs->type);
    if (t->k != Type::K::Exists)
      typeFail(TypeError::Kind::Mismatch,
               "expected an existential type to unpack, found " + showType(t), rhs->span);
    DNodeP n = node(Rule::Unpack, span);
    n->name = x;
    n->key = newKey(x);
    n->exType = t;
    TypeSubst s;
    for (const auto& v : t->vars) {
      std::string base = v;
      while (base.size() > 1 && base.back() == '\'') base.pop_back();
      std::string sk = freshTyName(base);
      n->skolems.push_back(sk);
      s[v] = tVar(sk);
    }
    n->binderType = substType(t->args[0], s);
    n->q = substituteSimple(t->q, s, true);
    n->implSpan = span;
    size_t scopeSize = tyScope_.size();
    tyScope_.insert(tyScope_.end(), n->skolems.begin(), n->skolems.end());
    DNodeP b = body(n->key, n->binderType);
    tyScope_.resize(scopeSize);
    n->kids = {rhs, b};
    n->usage = addUsage(rhs->usage, b->usage);
    closeBinder(n->usage, n->key, x, Mult::One, span);
    n->type = b->type;
    unpacks_.push_back(n);
    return n;
  }

  DNodeP lambda(const ExprP& e, std::optional<TypeP> expected) {
    DNodeP n = node(Rule::Abs, e->span);
    n->name = e->name;
    n->key = newKey(e->name);
    TypeP ex = expected ? zonk(*expected) : nullptr;
    TypeP annot = e->annot ? resolveInScope(e->annot, e->span) : nullptr;
    if (ex && ex->k == Type::K::Arrow) {
      n->mult = ex->mult;
      n->binderType = ex->args[0];
      if (annot) unify(annot, n->binderType, e->span);
      pushLocal(e->name, n->key, n->mult, n->binderType);
      DNodeP body = go(e->a, ex->args[1], e->a->span);
      locals_.pop_back();
      n->kids = {body};
      n->usage = body->usage;
      closeBinder(n->usage, n->key, e->name, n->mult, e->span);
      n->type = ex;
      return n;
    }
    if (ex && ex->k != Type::K::Meta)
      typeFail(TypeError::Kind::Mismatch,
               "type mismatch: expected " + showType(ex) + ", found a function", e->span);
    if (!annot)
      typeFail(TypeError::Kind::Other, "cannot infer the type of an unannotated lambda", e->span);
    n->binderType = annot;
    pushLocal(e->name, n->key, Mult::Many, annot);
    DNodeP body = go(e->a, std::nullopt, e->a->span);
    locals_.pop_back();
    n->kids = {body};
    n->usage = body->usage;
    Use u = n->usage.count(n->key) ? n->usage[n->key] : Use::Zero;
    n->mult = u == Use::One ? Mult::One : Mult::Many;
    closeBinder(n->usage, n->key, e->name, n->mult, e->span);
    n->type = tArrow(n->mult, annot, body->type);
    if (ex) unify(n->type, ex, e->span);
    return n;
  }

  DNodeP pack(const ExprP& e, std::optional<TypeP> expected) {
    TypeP ex = expected ? zonk(*expected) : nullptr;
    if (!ex || ex->k == Type::K::Meta)
      typeFail(TypeError::Kind::Other,
               "cannot infer the type of pack; it needs a known existential type", e->span);
    if (ex->k != Type::K::Exists) {
      DNodeP n = node(Rule::PackId, e->span);
      DNodeP k = go(e->a, ex, e->a->span);
      n->kids = {k};
      n->usage = k->usage;
      n->type = ex;
      return n;
    }
    DNodeP n = node(Rule::Pack, e->span);
    TypeSubst s;
    for (const auto& v : ex->vars) {
      TypeP m = fresh();
      s[v] = m;
      n->inst.push_back(m);
    }
    n->exType = ex;
    n->q = substituteSimple(ex->q, s, true);
    DNodeP k = go(e->a, substType(ex->args[0], s), e->a->span);
    n->kids = {k};
    n->usage = k->usage;
    n->type = ex;
    return n;
  }

  // ---- patterns ----

  struct Bound {
    std::string name, key;
    Mult mult;
    TypeP type;
    SourceSpan span;
  };

  void bindPattern(const Pattern& p, const TypeP& t0, Mult m, std::vector<Bound>& out) {
    switch (p.k) {
      case Pattern::K::Var:
        out.push_back({p.name, newKey(p.name), m, zonk(t0), p.span});
        return;
      case Pattern::K::Wild:
        if (m == Mult::One)
          typeFail(TypeError::Kind::Linearity, "wildcard pattern discards a linear value", p.span);
        return;
      case Pattern::K::Int:
        typeFail(TypeError::Kind::Other, "integer patterns are not supported", p.span);
      case Pattern::K::Ctor: {
        auto it = env_.ctors.find(p.name);
        if (it == env_.ctors.end())
          typeFail(TypeError::Kind::UnknownName, "unknown constructor " + p.name, p.span);
        const CtorInfo& ci = it->second;
        std::vector<TypeP> args;
        TypeSubst s;
        for (const auto& prm : ci.params) {
          TypeP mv = fresh();
          args.push_back(mv);
          s[prm] = mv;
        }
        unify(t0, tCon(ci.type, args), p.span);
        if (p.args.size() != ci.fields.size())
          typeFail(TypeError::Kind::Arity,
                   "constructor " + p.name + " has " + std::to_string(ci.fields.size()) +
                       " field(s), pattern gives " + std::to_string(p.args.size()),
                   p.span);
        for (size_t i = 0; i < p.args.size(); ++i) {
          const Pattern& sub = p.args[i];
          if (sub.k == Pattern::K::Ctor) {
            const auto& sci = env_.ctors.find(sub.name);
            if (sci != env_.ctors.end() && env_.types.at(sci->second.type).ctors.size() != 1)
              typeFail(TypeError::Kind::Other,
                       "nested pattern " + sub.name + " is refutable; use a separate case",
                       sub.span);
          }
          bindPattern(sub, substType(ci.fields[i].second, s), multMul(m, ci.fields[i].first), out);
        }
        return;
      }
    }
  }

  void checkExhaustive(const std::vector<Alt>& alts, const TypeP& scrutType,
                       const SourceSpan& span) {
    TypeP t = zonk(scrutType);
    std::set<std::string> seen;
    for (size_t i = 0; i < alts.size(); ++i) {
      const Pattern& p = alts[i].pat;
      if (p.k == Pattern::K::Var || p.k == Pattern::K::Wild) {
        if (i + 1 != alts.size())
          typeFail(TypeError::Kind::Other, "unreachable case alternative after a catch-all",
                   alts[i + 1].pat.span);
        return;
      }
      if (!seen.insert(p.name).second)
        typeFail(TypeError::Kind::Other, "duplicate alternative for " + p.name, p.span);
    }
    if (t->k != Type::K::Con) return;
    const auto& info = env_.types.at(t->name);
    if (info.ctors.empty())
      typeFail(TypeError::Kind::Other, "cannot pattern match on abstract type " + t->name, span);
    for (const auto& c : info.ctors)
      if (!seen.count(c))
        typeFail(TypeError::Kind::Other, "non-exhaustive case: missing alternative for " + c, span);
  }

  DNodeP caseExpr(const ExprP& e, std::optional<TypeP> expected) {
    DNodeP n = node(Rule::Case, e->span);
    n->mult = e->mult;
    DNodeP scrut = go(e->a, std::nullopt, e->a->span);
    n->kids.push_back(scrut);
    std::optional<TypeP> resultType = expected;
    UsageMap joined;
    bool first = true;
    for (const auto& alt : e->alts) {
      std::vector<Bound> bound;
      bindPattern(alt.pat, scrut->type, e->mult, bound);
      for (const auto& b : bound) pushLocal(b.name, b.key, b.mult, b.type);
      DNodeP body = go(alt.body, resultType, alt.body->span);
      for (size_t i = 0; i < bound.size(); ++i) locals_.pop_back();
      if (!resultType) resultType = body->type;
      UsageMap u = body->usage;
      for (const auto& b : bound) closeBinder(u, b.key, b.name, b.mult, b.span);
      joined = first ? u : joinUsage(joined, u);
      first = false;
      n->pats.push_back(alt.pat);
      n->kids.push_back(body);
    }
    if (e->alts.empty()) typeFail(TypeError::Kind::Other, "case with no alternatives", e->span);
    n->binderType = zonk(scrut->type);
    checkExhaustive(e->alts, n->binderType, e->span);
    for (const auto& [k, u] : joined) {
      if (u != Use::Mixed) continue;
      const Local* l = findLocalByKey(k);
      if (l && l->mult == Mult::One)
        typeFail(TypeError::Kind::Linearity,
                 "linear variable " + l->name + " is used in some case branches but not others",
                 e->span);
    }
    n->usage = addUsage(scaleUsage(e->mult, scrut->usage), joined);
    n->type = *resultType;
    return n;
  }

  DNodeP let(const ExprP& e, std::optional<TypeP> expected) {
    if (e->sig) {
      DNodeP n = node(Rule::LetSig, e->span);
      n->name = e->name;
      n->key = newKey(e->name);
      n->mult = e->mult;
      Scheme s = resolveLocalScheme(*e->sig, e->span);
      n->sig = s;
      n->skolems = s.vars;
      n->implSpan = e->span;
      size_t scopeSize = tyScope_.size();
      tyScope_.insert(tyScope_.end(), s.vars.begin(), s.vars.end());
      DNodeP rhs = go(e->a, s.body, e->a->span);
      tyScope_.resize(scopeSize);
      Local l;
      l.name = e->name;
      l.key = n->key;
      l.mult = e->mult;
      l.sch = s;
      l.poly = true;
      locals_.push_back(l);
      DNodeP body = go(e->b, expected, e->b->span);
      locals_.pop_back();
      n->kids = {rhs, body};
      n->usage = addUsage(scaleUsage(e->mult, rhs->usage), body->usage);
      closeBinder(n->usage, n->key, e->name, e->mult, e->span);
      n->binderType = s.body;
      n->type = body->type;
      return n;
    }
    DNodeP n = node(Rule::Let, e->span);
    n->name = e->name;
    n->key = newKey(e->name);
    n->mult = e->mult;
    DNodeP rhs = go(e->a, std::nullopt, e->a->span);
    n->binderType = zonk(rhs->type);
    pushLocal(e->name, n->key, e->mult, n->binderType);
    DNodeP body = go(e->b, expected, e->b->span);
    locals_.pop_back();
    n->kids = {rhs, body};
    n->usage = addUsage(scaleUsage(e->mult, rhs->usage), body->usage);
    closeBinder(n->usage, n->key, e->name, e->mult, e->span);
    n->type = body->type;
    return n;
  }

  // ---- finishing ----

  // Unsolved unification variables are defaulted to () so that every
  // recorded type is ground up to rigid variables.
  void defaultMetas(const TypeP& t) {
    TypeP z = zonk(t);
    if (z->k == Type::K::Meta) {
      sol_[z->meta] = tUnit();
      return;
    }
    for (const auto& a : z->args) defaultMetas(a);
    for (const auto& a : z->q.atoms())
      for (const auto& x : a.args) defaultMetas(x);
  }

  void finishNode(const DNodeP& n) {
    auto fix = [&](TypeP& t) {
      if (!t) return;
      defaultMetas(t);
      t = zonk(t);
    };
    auto fixQ = [&](SimpleConstraint& q) {
      for (const auto& a : q.atoms())
        for (const auto& x : a.args) defaultMetas(x);
      q = zonkQ(q);
    };
    fix(n->type);
    fix(n->binderType);
    fix(n->exType);
    for (auto& t : n->inst) fix(t);
    fixQ(n->q);
    for (const auto& k : n->kids) finishNode(k);
  }

  void finish(const DNodeP& root) {
    syncMetas();
    finishNode(root);
    for (const auto& u : unpacks_) {
      std::set<std::string> fv;
      freeTypeVars(u->type, fv);
      for (const auto& sk : u->skolems)
        if (fv.count(sk))
          typeFail(TypeError::Kind::Mismatch,
                   "existential type variable " + sk + " escapes its scope in type " +
                       showType(u->type),
                   u->span);
    }
  }
};

}  // namespace

std::vector<DeclResult> checkProgram(const SurfaceProgram& prog, const GlobalEnv& env,
                                     bool fromPrelude) {
  std::vector<DeclResult> out;
  for (const auto& v : prog.valueDecls) {
    if (!v.body) continue;
    DeclResult r;
    r.name = v.name;
    r.span = v.span;
    try {
      if (!env.globals.count(v.name))
        throw TypeError(TypeError::Kind::Other, "declaration " + v.name + " has no signature",
                        v.span);
      Checker c(env);
      r.deriv = c.checkDecl(v.name, v.body);
      r.deriv->fromPrelude = fromPrelude;
      r.deriv->span = v.span;
    } catch (const TypeError& e) {
      r.error = e;
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Constraint generation

WantedP generateConstraints(const DNodeP& n) {
  auto gen = [](const DNodeP& k) { return generateConstraints(k); };
  switch (n->rule) {
    case Rule::Var: return wSimple(n->q, n->span);
    case Rule::Ctor:
    case Rule::Lit: return wEps();
    case Rule::QElim: return wTensor(gen(n->kids[0]), wSimple(n->q, n->span));
    case Rule::Abs: return gen(n->kids[0]);
    case Rule::App: return wTensor(gen(n->kids[0]), scaleWanted(n->mult, gen(n->kids[1])));
    case Rule::Pack: return wTensor(gen(n->kids[0]), wSimple(n->q, n->span));
    case Rule::PackId: return gen(n->kids[0]);
    case Rule::Unpack:
      return wTensor(gen(n->kids[0]), wImpl(Mult::One, n->q, gen(n->kids[1]), n->implSpan));
    case Rule::Case: {
      WantedP alts = gen(n->kids.back());
      for (size_t i = n->kids.size() - 1; i-- > 1;) alts = wWith(gen(n->kids[i]), alts);
      return wTensor(scaleWanted(n->mult, gen(n->kids[0])), alts);
    }
    case Rule::Let: return wTensor(scaleWanted(n->mult, gen(n->kids[0])), gen(n->kids[1]));
    case Rule::LetSig:
      return wTensor(gen(n->kids[1]),
                     scaleWanted(n->mult, wImpl(Mult::One, n->sig->q, gen(n->kids[0]), n->implSpan)));
    case Rule::QIntro: return wImpl(Mult::One, n->q, gen(n->kids[0]), n->implSpan);
  }
  return wEps();
}

WantedP generateConstraints(const TypingDerivation& d) { return generateConstraints(d.root); }

}  // namespace linck
