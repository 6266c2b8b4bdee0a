#include "linck/corecalc.hpp"

#include <algorithm>
#include <sstream>

#include "linck/typing.hpp"

namespace linck {

// ---------------------------------------------------------------------------
// Construction

namespace {

std::shared_ptr<CoreTerm> mk(CoreTerm::K k) {
  auto t = std::make_shared<CoreTerm>();
  t->k = k;
  return t;
}

}  // namespace

CoreP cVar(const std::string& x, std::vector<TypeP> tyArgs) {
  auto t = mk(CoreTerm::K::Var);
  t->name = x;
  t->tyArgs = std::move(tyArgs);
  return t;
}

CoreP cPrim(const std::string& p, std::vector<TypeP> tyArgs) {
  auto t = mk(CoreTerm::K::Prim);
  t->name = p;
  t->tyArgs = std::move(tyArgs);
  return t;
}

CoreP cCtor(const std::string& k, std::vector<TypeP> tyArgs) {
  auto t = mk(CoreTerm::K::Ctor);
  t->name = k;
  t->tyArgs = std::move(tyArgs);
  return t;
}

CoreP cLam(const std::string& x, Mult m, TypeP ty, CoreP body) {
  auto t = mk(CoreTerm::K::Lambda);
  t->name = x;
  t->mult = m;
  t->type = std::move(ty);
  t->a = std::move(body);
  return t;
}

CoreP cApp(CoreP f, CoreP x) {
  auto t = mk(CoreTerm::K::App);
  t->a = std::move(f);
  t->b = std::move(x);
  return t;
}

CoreP cPack(TypeP exType, std::vector<TypeP> witnesses, CoreP ev, CoreP payload) {
  auto t = mk(CoreTerm::K::Pack);
  t->type = std::move(exType);
  t->tyArgs = std::move(witnesses);
  t->a = std::move(ev);
  t->b = std::move(payload);
  return t;
}

CoreP cUnpack(const std::string& z, const std::string& x, std::vector<std::string> skolems,
              CoreP rhs, CoreP body) {
  auto t = mk(CoreTerm::K::Unpack);
  t->evName = z;
  t->name = x;
  t->skolems = std::move(skolems);
  t->a = std::move(rhs);
  t->b = std::move(body);
  return t;
}

CoreP cCase(Mult m, CoreP scrut, std::vector<CoreAlt> alts) {
  auto t = mk(CoreTerm::K::Case);
  t->mult = m;
  t->a = std::move(scrut);
  t->alts = std::move(alts);
  return t;
}

CoreP cLet(Mult m, const std::string& x, std::optional<Scheme> s, CoreP rhs, CoreP body) {
  auto t = mk(CoreTerm::K::Let);
  t->mult = m;
  t->name = x;
  t->scheme = std::move(s);
  t->a = std::move(rhs);
  t->b = std::move(body);
  return t;
}

CoreP cInt(long long v) {
  auto t = mk(CoreTerm::K::Int);
  t->ival = v;
  return t;
}

CoreP cStr(const std::string& s) {
  auto t = mk(CoreTerm::K::Str);
  t->sval = s;
  return t;
}

CoreP cUnit() { return cCtor("()"); }

CoreP cPair(TypeP ta, TypeP tb, CoreP a, CoreP b) {
  return cApp(cApp(cCtor("(,)", {std::move(ta), std::move(tb)}), std::move(a)), std::move(b));
}

CorePat pVar(const std::string& x) {
  CorePat p;
  p.k = CorePat::K::Var;
  p.name = x;
  return p;
}

CorePat pWild() { return CorePat{}; }

CorePat pCtor(const std::string& k, std::vector<CorePat> args) {
  CorePat p;
  p.k = CorePat::K::Ctor;
  p.name = k;
  p.args = std::move(args);
  return p;
}

CoreEnv baseCoreEnv() {
  CoreEnv env;
  env.ctors["()"] = {"()", {}, {}};
  env.ctors["(,)"] = {"(,)", {"a", "b"}, {{Mult::One, tVar("a")}, {Mult::One, tVar("b")}}};
  env.typeCtors["()"] = {"()"};
  env.typeCtors["(,)"] = {"(,)"};
  return env;
}

// ---------------------------------------------------------------------------
// Contexts

namespace {

bool schemeEq(const Scheme& a, const Scheme& b) {
  if (a.vars.size() != b.vars.size()) return false;
  TypeSubst s;
  for (size_t i = 0; i < a.vars.size(); ++i) s[b.vars[i]] = tVar(a.vars[i]);
  return typeEq(a.body, substType(b.body, s));
}

}  // namespace

CoreContext contextAdd(const CoreContext& a, const CoreContext& b) {
  CoreContext r = a;
  for (const auto& [x, bind] : b) {
    auto it = r.find(x);
    if (it == r.end()) {
      r[x] = bind;
      continue;
    }
    if (!schemeEq(it->second.scheme, bind.scheme))
      throw ContextClashError(x, "variable " + x + " is bound at two different types: " +
                                     showScheme(it->second.scheme) + " and " +
                                     showScheme(bind.scheme));
    it->second.mult = multAdd(it->second.mult, bind.mult);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Lint

namespace {

std::string showT(const TypeP& t) { return printCoreType(t); }

using LUsage = std::map<int, Use>;

LUsage lAdd(const LUsage& a, const LUsage& b) {
  LUsage r = a;
  for (const auto& [k, u] : b) r[k] = useAdd(r.count(k) ? r[k] : Use::Zero, u);
  return r;
}

LUsage lScale(Mult m, const LUsage& a) {
  LUsage r;
  for (const auto& [k, u] : a) r[k] = useScale(m, u);
  return r;
}

LUsage lJoin(const LUsage& a, const LUsage& b) {
  LUsage r;
  std::set<int> keys;
  for (const auto& [k, u] : a) keys.insert(k);
  for (const auto& [k, u] : b) keys.insert(k);
  for (int k : keys)
    r[k] = useJoin(a.count(k) ? a.at(k) : Use::Zero, b.count(k) ? b.at(k) : Use::Zero);
  return r;
}

class Linter {
 public:
  Linter(const CoreEnv& env, std::vector<std::string> rigid) : env_(env), rigid_(std::move(rigid)) {}

  struct Binder {
    std::string name;
    Mult mult;
    Scheme sch;
    int id;
  };

  int bind(const std::string& name, Mult m, Scheme s) {
    int id = next_++;
    scope_.push_back({name, m, std::move(s), id});
    return id;
  }

  void close(LUsage& u, int id, const char* rule, const SourceSpan& at) {
    const Binder& b = *std::find_if(scope_.begin(), scope_.end(),
                                    [&](const Binder& x) { return x.id == id; });
    Use use = u.count(id) ? u[id] : Use::Zero;
    u.erase(id);
    if (b.mult == Mult::One && use != Use::One) {
      std::string how = use == Use::Zero   ? "is not used"
                        : use == Use::Many ? "is used more than once"
                                           : "is used in some branches but not others";
      throw CoreLintError(rule, "linear variable " + b.name + " " + how, at);
    }
  }

  void pop(int id) {
    scope_.erase(std::remove_if(scope_.begin(), scope_.end(),
                                [&](const Binder& x) { return x.id == id; }),
                 scope_.end());
  }

  TypeP inst(const Scheme& s, const std::vector<TypeP>& args, const std::string& what,
             const char* rule, const SourceSpan& at) {
    if (args.size() != s.vars.size())
      throw CoreLintError(rule,
                          what + " expects " + std::to_string(s.vars.size()) +
                              " type argument(s), given " + std::to_string(args.size()),
                          at);
    TypeSubst sub;
    for (size_t i = 0; i < args.size(); ++i) sub[s.vars[i]] = args[i];
    return substType(s.body, sub);
  }

  std::pair<TypeP, LUsage> synth(const CoreP& e) {
    switch (e->k) {
      case CoreTerm::K::Var: {
        for (auto it = scope_.rbegin(); it != scope_.rend(); ++it) {
          if (it->name != e->name) continue;
          return {inst(it->sch, e->tyArgs, e->name, "L-VAR", e->span), {{it->id, Use::One}}};
        }
        auto g = env_.globals.find(e->name);
        if (g == env_.globals.end())
          throw CoreLintError("L-VAR", "unbound variable " + e->name, e->span);
        return {inst(g->second, e->tyArgs, e->name, "L-VAR", e->span), {}};
      }
      case CoreTerm::K::Prim: {
        auto p = env_.prims.find(e->name);
        if (p == env_.prims.end())
          throw CoreLintError("L-VAR", "unknown primitive " + e->name, e->span);
        return {inst(p->second, e->tyArgs, e->name, "L-VAR", e->span), {}};
      }
      case CoreTerm::K::Ctor: {
        auto c = env_.ctors.find(e->name);
        if (c == env_.ctors.end())
          throw CoreLintError("L-VAR", "unknown constructor " + e->name, e->span);
        std::vector<TypeP> params;
        for (const auto& p : c->second.params) params.push_back(tVar(p));
        TypeP t = tCon(c->second.type, params);
        for (size_t i = c->second.fields.size(); i-- > 0;)
          t = tArrow(c->second.fields[i].first, c->second.fields[i].second, t);
        Scheme s;
        s.vars = c->second.params;
        s.body = t;
        return {inst(s, e->tyArgs, e->name, "L-VAR", e->span), {}};
      }
      case CoreTerm::K::Lambda: {
        int id = bind(e->name, e->mult, Scheme{{}, {}, e->type});
        auto [bt, u] = synth(e->a);
        close(u, id, "L-ABS", e->span);
        pop(id);
        return {tArrow(e->mult, e->type, bt), u};
      }
      case CoreTerm::K::App: {
        auto [ft, fu] = synth(e->a);
        if (ft->k != Type::K::Arrow)
          throw CoreLintError("L-APP", "applying a non-function of type " + showT(ft), e->span);
        auto [at, au] = synth(e->b);
        if (!typeEq(at, ft->args[0]))
          throw CoreLintError("L-APP",
                              "argument has type " + showT(at) + ", expected " +
                                  showT(ft->args[0]),
                              e->span);
        return {ft->args[1], lAdd(fu, lScale(ft->mult, au))};
      }
      case CoreTerm::K::Pack: {
        const TypeP& ex = e->type;
        if (!ex || ex->k != Type::K::Exists || ex->args.size() != 2)
          throw CoreLintError("L-PACK", "pack needs an existential type", e->span);
        if (e->tyArgs.size() != ex->vars.size())
          throw CoreLintError("L-PACK", "wrong number of witnesses", e->span);
        TypeSubst s;
        for (size_t i = 0; i < ex->vars.size(); ++i) s[ex->vars[i]] = e->tyArgs[i];
        auto [et, eu] = synth(e->a);
        auto [pt, pu] = synth(e->b);
        TypeP wantEv = substType(ex->args[1], s), wantPay = substType(ex->args[0], s);
        if (!typeEq(et, wantEv))
          throw CoreLintError("L-PACK",
                              "evidence has type " + showT(et) + ", expected " + showT(wantEv),
                              e->span);
        if (!typeEq(pt, wantPay))
          throw CoreLintError("L-PACK",
                              "payload has type " + showT(pt) + ", expected " + showT(wantPay),
                              e->span);
        return {ex, lAdd(eu, pu)};
      }
      case CoreTerm::K::Unpack: {
        auto [rt, ru] = synth(e->a);
        if (rt->k != Type::K::Exists || rt->args.size() != 2)
          throw CoreLintError("L-UNPACK", "unpacking a non-existential of type " + showT(rt),
                              e->span);
        if (rt->vars.size() != e->skolems.size())
          throw CoreLintError("L-UNPACK", "wrong number of type binders", e->span);
        TypeSubst s;
        for (size_t i = 0; i < rt->vars.size(); ++i) s[rt->vars[i]] = tVar(e->skolems[i]);
        size_t rs = rigid_.size();
        rigid_.insert(rigid_.end(), e->skolems.begin(), e->skolems.end());
        int zid = bind(e->evName, Mult::One, Scheme{{}, {}, substType(rt->args[1], s)});
        int xid = bind(e->name, Mult::One, Scheme{{}, {}, substType(rt->args[0], s)});
        auto [bt, bu] = synth(e->b);
        close(bu, zid, "L-UNPACK", e->span);
        close(bu, xid, "L-UNPACK", e->span);
        pop(xid);
        pop(zid);
        rigid_.resize(rs);
        std::set<std::string> fv;
        freeTypeVars(bt, fv);
        for (const auto& sk : e->skolems)
          if (fv.count(sk))
            throw CoreLintError("L-UNPACK", "type variable " + sk + " escapes in " + showT(bt),
                                e->span);
        return {bt, lAdd(ru, bu)};
      }
      case CoreTerm::K::Case: return synthCase(e);
      case CoreTerm::K::Let: {
        TypeP rt;
        LUsage ru;
        Scheme xs;
        if (e->scheme) {
          size_t rs = rigid_.size();
          rigid_.insert(rigid_.end(), e->scheme->vars.begin(), e->scheme->vars.end());
          std::tie(rt, ru) = synth(e->a);
          rigid_.resize(rs);
          if (!typeEq(rt, e->scheme->body))
            throw CoreLintError("L-LET",
                                "right-hand side has type " + showT(rt) + ", signature says " +
                                    showT(e->scheme->body),
                                e->span);
          xs = *e->scheme;
        } else {
          std::tie(rt, ru) = synth(e->a);
          xs.body = rt;
        }
        int id = bind(e->name, e->mult, xs);
        auto [bt, bu] = synth(e->b);
        close(bu, id, "L-LET", e->span);
        pop(id);
        return {bt, lAdd(lScale(e->mult, ru), bu)};
      }
      case CoreTerm::K::Int: return {tInt(), {}};
      case CoreTerm::K::Str: return {tCon("String"), {}};
    }
    throw CoreLintError("L-VAR", "unknown term", e->span);
  }

  std::pair<TypeP, LUsage> synthCase(const CoreP& e) {
    auto [st, su] = synth(e->a);
    if (e->alts.empty()) throw CoreLintError("L-CASE", "case with no alternatives", e->span);
    TypeP result;
    LUsage joined;
    std::set<std::string> seen;
    bool catchAll = false;
    for (size_t ai = 0; ai < e->alts.size(); ++ai) {
      const CoreAlt& alt = e->alts[ai];
      std::vector<int> ids;
      const CorePat& p = alt.pat;
      if (catchAll) throw CoreLintError("L-CASE", "alternative after a catch-all", e->span);
      switch (p.k) {
        case CorePat::K::Wild:
          if (e->mult == Mult::One)
            throw CoreLintError("L-CASE", "wildcard discards a linear scrutinee", e->span);
          catchAll = true;
          break;
        case CorePat::K::Var:
          ids.push_back(bind(p.name, e->mult, Scheme{{}, {}, st}));
          catchAll = true;
          break;
        case CorePat::K::Ctor: {
          auto c = env_.ctors.find(p.name);
          if (c == env_.ctors.end())
            throw CoreLintError("L-CASE", "unknown constructor " + p.name, e->span);
          if (st->k != Type::K::Con || st->name != c->second.type)
            throw CoreLintError("L-CASE",
                                "pattern " + p.name + " does not match scrutinee type " + showT(st),
                                e->span);
          if (!seen.insert(p.name).second)
            throw CoreLintError("L-CASE", "duplicate alternative " + p.name, e->span);
          if (p.args.size() != c->second.fields.size())
            throw CoreLintError("L-CASE", "wrong number of fields for " + p.name, e->span);
          TypeSubst s;
          for (size_t i = 0; i < c->second.params.size(); ++i) s[c->second.params[i]] = st->args[i];
          for (size_t i = 0; i < p.args.size(); ++i) {
            const CorePat& sub = p.args[i];
            Mult fm = multMul(e->mult, c->second.fields[i].first);
            if (sub.k == CorePat::K::Ctor)
              throw CoreLintError("L-CASE", "nested pattern in core case", e->span);
            if (sub.k == CorePat::K::Wild) {
              if (fm == Mult::One)
                throw CoreLintError("L-CASE", "wildcard discards a linear field of " + p.name,
                                    e->span);
              continue;
            }
            ids.push_back(bind(sub.name, fm, Scheme{{}, {}, substType(c->second.fields[i].second, s)}));
          }
          break;
        }
      }
      auto [bt, bu] = synth(alt.body);
      for (int id : ids) close(bu, id, "L-CASE", e->span);
      for (int id : ids) pop(id);
      if (!result) {
        result = bt;
        joined = bu;
      } else {
        if (!typeEq(result, bt))
          throw CoreLintError("L-CASE",
                              "alternatives disagree: " + showT(result) + " and " + showT(bt),
                              e->span);
        joined = lJoin(joined, bu);
      }
    }
    if (!catchAll) {
      if (st->k != Type::K::Con || !env_.typeCtors.count(st->name))
        throw CoreLintError("L-CASE", "case on a type without constructors", e->span);
      for (const auto& k : env_.typeCtors.at(st->name))
        if (!seen.count(k)) throw CoreLintError("L-CASE", "missing alternative " + k, e->span);
    }
    for (const auto& [id, u] : joined) {
      if (u != Use::Mixed) continue;
      for (const auto& b : scope_)
        if (b.id == id && b.mult == Mult::One)
          throw CoreLintError("L-CASE",
                              "linear variable " + b.name +
                                  " is used in some branches but not others",
                              e->span);
    }
    return {result, lAdd(lScale(e->mult, su), joined)};
  }

  const CoreEnv& env_;
  std::vector<std::string> rigid_;
  std::vector<Binder> scope_;
  int next_ = 0;
};

}  // namespace

TypeP coreTypecheck(const CoreEnv& env, const CoreContext& ctx, const CoreP& e,
                    const std::vector<std::string>& rigid) {
  Linter l(env, rigid);
  std::vector<int> ids;
  for (const auto& [x, b] : ctx) ids.push_back(l.bind(x, b.mult, b.scheme));
  auto [t, u] = l.synth(e);
  for (int id : ids) l.close(u, id, "L-VAR", e->span);
  return t;
}

void coreLintDecl(const CoreEnv& env, const CoreDecl& d) {
  TypeP t = coreTypecheck(env, {}, d.body, d.scheme.vars);
  if (!typeEq(t, d.scheme.body))
    throw CoreLintError("L-DECL",
                        "declaration " + d.name + " has type " + printCoreType(t) +
                            ", expected " + printCoreType(d.scheme.body),
                        d.span);
}

// ---------------------------------------------------------------------------
// Pattern flattening

namespace {

class Flattener {
 public:
  explicit Flattener(const CoreEnv& env) : env_(env) {}

  CoreP go(const CoreP& e) {
    if (!e) return e;
    auto t = std::make_shared<CoreTerm>(*e);
    t->a = go(e->a);
    t->b = go(e->b);
    if (e->k != CoreTerm::K::Case) return t;
    for (auto& alt : t->alts) {
      CoreP body = go(alt.body);
      alt.pat = flattenAlt(t->mult, alt.pat, body);
      alt.body = body;
    }
    return t;
  }

 private:
  const CoreEnv& env_;
  int fresh_ = 0;

  // Replaces nested sub-patterns by fresh variables and wraps `body` in the
  // matching inner cases.
  CorePat flattenAlt(Mult m, const CorePat& p, CoreP& body) {
    if (p.k != CorePat::K::Ctor) return p;
    auto c = env_.ctors.find(p.name);
    CorePat out = p;
    std::vector<std::tuple<std::string, CorePat, Mult>> inner;
    for (size_t i = 0; i < p.args.size(); ++i) {
      if (p.args[i].k != CorePat::K::Ctor) continue;
      Mult fm = m;
      if (c != env_.ctors.end() && i < c->second.fields.size())
        fm = multMul(m, c->second.fields[i].first);
      std::string v = "f#" + std::to_string(fresh_++);
      inner.emplace_back(v, p.args[i], fm);
      out.args[i] = pVar(v);
    }
    for (size_t i = inner.size(); i-- > 0;) {
      auto& [v, sub, fm] = inner[i];
      CoreP b = body;
      CorePat flat = flattenAlt(fm, sub, b);
      body = cCase(fm, cVar(v), {{flat, b}});
    }
    return out;
  }
};

}  // namespace

CoreP flattenPatterns(const CoreEnv& env, const CoreP& e) {
  Flattener f(env);
  return f.go(e);
}

// ---------------------------------------------------------------------------
// Equality

namespace {

bool patEq(const CorePat& a, const CorePat& b) {
  if (a.k != b.k || a.name != b.name || a.args.size() != b.args.size()) return false;
  for (size_t i = 0; i < a.args.size(); ++i)
    if (!patEq(a.args[i], b.args[i])) return false;
  return true;
}

bool typesEq(const std::vector<TypeP>& a, const std::vector<TypeP>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (!typeEq(a[i], b[i])) return false;
  return true;
}

}  // namespace

bool coreEq(const CoreP& a, const CoreP& b) {
  if (!a || !b) return !a && !b;
  if (a->k != b->k || a->name != b->name || a->evName != b->evName || a->mult != b->mult ||
      a->ival != b->ival || a->sval != b->sval || a->skolems != b->skolems ||
      !typesEq(a->tyArgs, b->tyArgs) || a->alts.size() != b->alts.size())
    return false;
  if ((a->type == nullptr) != (b->type == nullptr)) return false;
  if (a->type && !typeEq(a->type, b->type)) return false;
  if (a->scheme.has_value() != b->scheme.has_value()) return false;
  if (a->scheme && (a->scheme->vars != b->scheme->vars || !typeEq(a->scheme->body, b->scheme->body)))
    return false;
  if (!coreEq(a->a, b->a) || !coreEq(a->b, b->b)) return false;
  for (size_t i = 0; i < a->alts.size(); ++i)
    if (!patEq(a->alts[i].pat, b->alts[i].pat) || !coreEq(a->alts[i].body, b->alts[i].body))
      return false;
  return true;
}

// ---------------------------------------------------------------------------
// Printing

namespace {

// Minimal s-expression tree so long terms can be broken across lines.
struct SX {
  std::string atom;
  std::vector<SX> items;
  bool isList = false;
};

SX atom(std::string s) { return SX{std::move(s), {}, false}; }
SX list(std::vector<SX> items) { return SX{"", std::move(items), true}; }

std::string flat(const SX& s) {
  if (!s.isList) return s.atom;
  std::string out = "(";
  for (size_t i = 0; i < s.items.size(); ++i) out += (i ? " " : "") + flat(s.items[i]);
  return out + ")";
}

void render(const SX& s, int indent, std::string& out) {
  std::string f = flat(s);
  if (!s.isList || indent + static_cast<int>(f.size()) <= 100 || s.items.size() < 2) {
    out += f;
    return;
  }
  // Keep the head and any short leading atoms on the first line.
  out += "(";
  size_t i = 0;
  std::string first = flat(s.items[0]);
  out += first;
  ++i;
  while (i < s.items.size() && !s.items[i].isList && i < 3) {
    out += " " + s.items[i].atom;
    ++i;
  }
  for (; i < s.items.size(); ++i) {
    out += "\n" + std::string(indent + 2, ' ');
    render(s.items[i], indent + 2, out);
  }
  out += ")";
}

SX typeSX(const TypeP& t) {
  switch (t->k) {
    case Type::K::Var: return atom(t->name);
    case Type::K::Meta: return atom("?" + std::to_string(t->meta));
    case Type::K::Con: {
      if (t->args.empty()) return atom(t->name);
      std::vector<SX> v{atom(t->name == "(,)" ? "," : t->name)};
      for (const auto& a : t->args) v.push_back(typeSX(a));
      return list(v);
    }
    case Type::K::Arrow:
      return list({atom(t->mult == Mult::One ? "-o" : "->"), typeSX(t->args[0]),
                   typeSX(t->args[1])});
    case Type::K::Exists: {
      std::vector<SX> vars;
      for (const auto& v : t->vars) vars.push_back(atom(v));
      if (t->args.size() == 2)
        return list({atom("exists"), list(vars), typeSX(t->args[1]), typeSX(t->args[0])});
      return list({atom("exists"), list(vars), atom("{" + showSimple(t->q) + "}"),
                   typeSX(t->args[0])});
    }
    case Type::K::Qual:
      return list({atom("=o"), atom("{" + showSimple(t->q) + "}"), typeSX(t->args[0])});
  }
  return atom("?");
}

SX patSX(const CorePat& p) {
  switch (p.k) {
    case CorePat::K::Var: return atom(p.name);
    case CorePat::K::Wild: return atom("_");
    case CorePat::K::Ctor: {
      if (p.args.empty()) return atom(p.name);
      std::vector<SX> v{atom(p.name == "(,)" ? "," : p.name)};
      for (const auto& a : p.args) v.push_back(patSX(a));
      return list(v);
    }
  }
  return atom("?");
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

SX headSX(const std::string& name, const std::vector<TypeP>& tyArgs) {
  if (tyArgs.empty()) return atom(name);
  std::vector<SX> v{atom("@"), atom(name)};
  for (const auto& t : tyArgs) v.push_back(typeSX(t));
  return list(v);
}

std::string mstr(Mult m) { return m == Mult::One ? "1" : "w"; }

SX schemeSX(const Scheme& s) {
  std::vector<SX> vars;
  for (const auto& v : s.vars) vars.push_back(atom(v));
  return list({atom("forall"), list(vars), typeSX(s.body)});
}

SX termSX(const CoreP& e) {
  switch (e->k) {
    case CoreTerm::K::Var: return headSX(e->name, e->tyArgs);
    case CoreTerm::K::Prim: {
      std::vector<SX> v{atom("prim"), atom(e->name)};
      for (const auto& t : e->tyArgs) v.push_back(typeSX(t));
      return list(v);
    }
    case CoreTerm::K::Ctor: return headSX(e->name == "(,)" ? "," : e->name, e->tyArgs);
    case CoreTerm::K::Lambda:
      return list({atom("lam"), list({atom(e->name), atom(mstr(e->mult)), typeSX(e->type)}),
                   termSX(e->a)});
    case CoreTerm::K::App: return list({atom("app"), termSX(e->a), termSX(e->b)});
    case CoreTerm::K::Pack: {
      std::vector<SX> w;
      for (const auto& t : e->tyArgs) w.push_back(typeSX(t));
      return list({atom("pack"), typeSX(e->type), list(w), termSX(e->a), termSX(e->b)});
    }
    case CoreTerm::K::Unpack: {
      std::vector<SX> sk;
      for (const auto& s : e->skolems) sk.push_back(atom(s));
      return list({atom("unpack"), list({atom(e->evName), atom(e->name)}), list(sk),
                   termSX(e->a), termSX(e->b)});
    }
    case CoreTerm::K::Case: {
      std::vector<SX> v{atom("case"), atom(mstr(e->mult)), termSX(e->a)};
      for (const auto& alt : e->alts) v.push_back(list({patSX(alt.pat), termSX(alt.body)}));
      return list(v);
    }
    case CoreTerm::K::Let: {
      SX binder = e->scheme ? list({atom(e->name), schemeSX(*e->scheme)}) : atom(e->name);
      return list({atom("let"), atom(mstr(e->mult)), binder, termSX(e->a), termSX(e->b)});
    }
    case CoreTerm::K::Int: return atom(std::to_string(e->ival));
    case CoreTerm::K::Str: return atom(quote(e->sval));
  }
  return atom("?");
}

}  // namespace

std::string printCoreType(const TypeP& t) { return flat(typeSX(t)); }

std::string printCore(const CoreP& e) {
  std::string out;
  render(termSX(e), 0, out);
  return out;
}

std::string printCoreDecl(const CoreDecl& d) {
  std::string out;
  render(list({atom("def"), atom(d.name), schemeSX(d.scheme), termSX(d.body)}), 0, out);
  return out;
}

// ---------------------------------------------------------------------------
// Values

ValueP vInt(long long v) {
  auto r = std::make_shared<Value>();
  r->k = Value::K::Int;
  r->ival = v;
  return r;
}

ValueP vCon(const std::string& k, std::vector<ValueP> fields) {
  auto r = std::make_shared<Value>();
  r->k = Value::K::Con;
  r->name = k;
  r->fields = std::move(fields);
  return r;
}

ValueP vToken(const std::string& cls) {
  auto r = std::make_shared<Value>();
  r->k = Value::K::Token;
  r->name = cls;
  return r;
}

ValueP vArray(int id) {
  auto r = std::make_shared<Value>();
  r->k = Value::K::Array;
  r->ival = id;
  return r;
}

ValueP vPack(ValueP ev, ValueP payload) {
  auto r = std::make_shared<Value>();
  r->k = Value::K::Pack;
  r->fields = {std::move(ev), std::move(payload)};
  return r;
}

ValueP vUnit() { return vCon("()"); }

ValueP evidenceValue(const TypeP& t) {
  if (t->k != Type::K::Con) throw RuntimeFault("malformed evidence type " + printCoreType(t));
  if (!t->name.empty() && t->name[0] == '#') return vToken(t->name.substr(1));
  std::vector<ValueP> fs;
  for (const auto& a : t->args) fs.push_back(evidenceValue(a));
  return vCon(t->name, fs);
}

namespace {

bool isList(const ValueP& v) {
  const Value* p = v.get();
  while (p->k == Value::K::Con && p->name == "Cons" && p->fields.size() == 2)
    p = p->fields[1].get();
  return p->k == Value::K::Con && p->name == "Nil";
}

std::string show(const ValueP& v, bool nested) {
  switch (v->k) {
    case Value::K::Int: return std::to_string(v->ival);
    case Value::K::Str: return quote(v->sval);
    case Value::K::Token: return "<evidence " + v->name + ">";
    case Value::K::Array: return "<array " + std::to_string(v->ival) + ">";
    case Value::K::Closure:
    case Value::K::Prim: return "<function>";
    case Value::K::Pack: return show(v->fields[1], nested);
    case Value::K::Con: {
      if (v->name == "Ur" && v->fields.size() == 1) return show(v->fields[0], nested);
      if (v->name == "(,)" && v->fields.size() == 2)
        return "(" + show(v->fields[0], false) + ", " + show(v->fields[1], false) + ")";
      if ((v->name == "Cons" || v->name == "Nil") && isList(v)) {
        std::string out = "[";
        const Value* p = v.get();
        bool first = true;
        while (p->name == "Cons") {
          out += (first ? "" : ",") + show(p->fields[0], false);
          first = false;
          p = p->fields[1].get();
        }
        return out + "]";
      }
      if (v->fields.empty()) return v->name;
      std::string out = v->name;
      for (const auto& f : v->fields) out += " " + show(f, true);
      return nested ? "(" + out + ")" : out;
    }
  }
  return "?";
}

}  // namespace

std::string showValue(const ValueP& v) { return show(v, false); }

bool valueEq(const ValueP& a, const ValueP& b) {
  if (a->k != b->k || a->name != b->name || a->ival != b->ival || a->sval != b->sval ||
      a->fields.size() != b->fields.size())
    return false;
  if (a->k == Value::K::Closure) return a.get() == b.get();
  for (size_t i = 0; i < a->fields.size(); ++i)
    if (!valueEq(a->fields[i], b->fields[i])) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Store

void Store::fault(const std::string& msg) {
  faults_.push_back(msg);
  throw RuntimeFault(msg);
}

Store::Window& Store::access(int id, const char* op) {
  if (id < 0 || id >= static_cast<int>(windows_.size()))
    fault(std::string(op) + ": no such array " + std::to_string(id));
  Window& w = windows_[id];
  if (w.freed) fault(std::string(op) + ": array " + std::to_string(id) + " used after free");
  if (!w.live) fault(std::string(op) + ": slice " + std::to_string(id) + " used after release");
  if (w.suspended)
    fault(std::string(op) + ": array " + std::to_string(id) + " accessed while borrowed");
  return w;
}

int Store::allocate(std::vector<long long> contents) {
  long long n = static_cast<long long>(contents.size());
  backings_.push_back(std::move(contents));
  windows_.push_back({static_cast<int>(backings_.size()) - 1, 0, n});
  return static_cast<int>(windows_.size()) - 1;
}

long long Store::read(int id, long long i) {
  Window& w = access(id, "read");
  if (i < 0 || i >= w.length)
    fault("read: index " + std::to_string(i) + " out of bounds for length " +
          std::to_string(w.length));
  return backings_[w.backing][w.offset + i];
}

void Store::write(int id, long long i, long long v) {
  Window& w = access(id, "write");
  if (i < 0 || i >= w.length)
    fault("write: index " + std::to_string(i) + " out of bounds for length " +
          std::to_string(w.length));
  backings_[w.backing][w.offset + i] = v;
}

void Store::free(int id) {
  if (id >= 0 && id < static_cast<int>(windows_.size()) && windows_[id].freed)
    fault("free: array " + std::to_string(id) + " freed twice");
  Window& w = access(id, "free");
  if (w.parent != -1) fault("free: slice " + std::to_string(id) + " is borrowed, not owned");
  w.freed = true;
  w.live = false;
}

long long Store::length(int id) {
  if (id < 0 || id >= static_cast<int>(windows_.size()))
    fault("length: no such array " + std::to_string(id));
  return windows_[id].length;
}

std::pair<int, int> Store::slice(int id, long long k) {
  Window w = access(id, "slice");
  if (k < 0 || k > w.length)
    fault("slice: split point " + std::to_string(k) + " out of range for length " +
          std::to_string(w.length));
  windows_.push_back({w.backing, w.offset, k, id});
  windows_.push_back({w.backing, w.offset + k, w.length - k, id});
  windows_[id].suspended = true;
  int r = static_cast<int>(windows_.size()) - 1;
  return {r - 1, r};
}

void Store::release(int left, int right) {
  Window& l = access(left, "release");
  Window& r = access(right, "release");
  if (l.parent != r.parent || l.parent < 0) fault("release: slices do not share a parent");
  l.live = false;
  r.live = false;
  windows_[l.parent].suspended = false;
}

std::vector<long long> Store::readAll(int id) {
  access(id, "toList");
  return contents(id);
}

std::vector<long long> Store::contents(int id) const {
  const Window& w = windows_.at(id);
  const auto& b = backings_[w.backing];
  return std::vector<long long>(b.begin() + w.offset, b.begin() + w.offset + w.length);
}

std::vector<int> Store::leaked() const {
  std::vector<int> out;
  for (size_t i = 0; i < windows_.size(); ++i)
    if (windows_[i].live) out.push_back(static_cast<int>(i));
  return out;
}

bool Store::operator==(const Store& o) const {
  if (backings_ != o.backings_ || windows_.size() != o.windows_.size()) return false;
  for (size_t i = 0; i < windows_.size(); ++i) {
    const Window &a = windows_[i], &b = o.windows_[i];
    if (a.backing != b.backing || a.offset != b.offset || a.length != b.length ||
        a.parent != b.parent || a.live != b.live || a.suspended != b.suspended ||
        a.freed != b.freed)
      return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

EnvP extend(const EnvP& env, const std::string& name, ValueP v) {
  auto e = std::make_shared<Env>();
  e->name = name;
  e->value = std::move(v);
  e->next = env;
  return e;
}

constexpr int kMaxDepth = 20000;

struct DepthGuard {
  int& d;
  explicit DepthGuard(int& depth) : d(depth) {
    if (++d > kMaxDepth) {
      --d;
      throw RuntimeFault("evaluation nested too deeply");
    }
  }
  ~DepthGuard() { --d; }
};

}  // namespace

Evaluator::Evaluator(const CoreEnv& env, const std::vector<CoreDecl>& decls,
                     const PrimTable& prims, Store& store)
    : env_(env), prims_(prims), store_(store) {
  for (const auto& d : decls) decls_[d.name] = &d;
}

ValueP Evaluator::global(const std::string& name) {
  auto c = cache_.find(name);
  if (c != cache_.end()) return c->second;
  auto d = decls_.find(name);
  if (d == decls_.end()) throw RuntimeFault("no definition for " + name);
  if (!evaluating_.insert(name).second)
    throw RuntimeFault("global " + name + " depends on itself");
  ValueP v = eval(d->second->body, nullptr);
  evaluating_.erase(name);
  cache_[name] = v;
  return v;
}

bool Evaluator::match(const CorePat& p, const ValueP& v, EnvP& env) {
  switch (p.k) {
    case CorePat::K::Wild: return true;
    case CorePat::K::Var: env = extend(env, p.name, v); return true;
    case CorePat::K::Ctor: {
      if (v->k != Value::K::Con || v->name != p.name || v->fields.size() != p.args.size())
        return false;
      for (size_t i = 0; i < p.args.size(); ++i)
        if (!match(p.args[i], v->fields[i], env)) return false;
      return true;
    }
  }
  return false;
}

ValueP Evaluator::eval(const CoreP& e, const EnvP& env) {
  DepthGuard g(depth_);
  switch (e->k) {
    case CoreTerm::K::Var: {
      for (const Env* p = env.get(); p; p = p->next.get())
        if (p->name == e->name) return p->value;
      return global(e->name);
    }
    case CoreTerm::K::Prim: {
      auto p = prims_.find(e->name);
      if (p == prims_.end()) throw RuntimeFault("unknown primitive " + e->name);
      auto v = std::make_shared<Value>();
      v->k = Value::K::Prim;
      v->name = e->name;
      v->arity = p->second.arity;
      return v;
    }
    case CoreTerm::K::Ctor: {
      auto c = env_.ctors.find(e->name);
      if (c == env_.ctors.end()) throw RuntimeFault("unknown constructor " + e->name);
      if (c->second.fields.empty()) return vCon(e->name);
      auto v = std::make_shared<Value>();
      v->k = Value::K::Prim;
      v->ctorFn = true;
      v->name = e->name;
      v->arity = static_cast<int>(c->second.fields.size());
      return v;
    }
    case CoreTerm::K::Lambda: {
      auto v = std::make_shared<Value>();
      v->k = Value::K::Closure;
      v->param = e->name;
      v->body = e->a;
      v->env = env;
      return v;
    }
    case CoreTerm::K::App: {
      ValueP f = eval(e->a, env);
      ValueP x = eval(e->b, env);
      return apply(f, x);
    }
    case CoreTerm::K::Pack: {
      ValueP ev = eval(e->a, env);
      return vPack(ev, eval(e->b, env));
    }
    case CoreTerm::K::Unpack: {
      ValueP r = eval(e->a, env);
      if (r->k != Value::K::Pack) throw RuntimeFault("unpack of a non-package value");
      return eval(e->b, extend(extend(env, e->evName, r->fields[0]), e->name, r->fields[1]));
    }
    case CoreTerm::K::Case: {
      ValueP s = eval(e->a, env);
      for (const auto& alt : e->alts) {
        EnvP env2 = env;
        if (match(alt.pat, s, env2)) return eval(alt.body, env2);
      }
      throw RuntimeFault("no case alternative matches " + showValue(s));
    }
    case CoreTerm::K::Let: return eval(e->b, extend(env, e->name, eval(e->a, env)));
    case CoreTerm::K::Int: return vInt(e->ival);
    case CoreTerm::K::Str: {
      auto v = std::make_shared<Value>();
      v->k = Value::K::Str;
      v->sval = e->sval;
      return v;
    }
  }
  throw RuntimeFault("unknown term");
}

ValueP Evaluator::apply(const ValueP& f, const ValueP& x) {
  DepthGuard g(depth_);
  if (f->k == Value::K::Closure) return eval(f->body, extend(f->env, f->param, x));
  if (f->k != Value::K::Prim) throw RuntimeFault("applying a non-function value");
  auto v = std::make_shared<Value>(*f);
  v->fields.push_back(x);
  if (static_cast<int>(v->fields.size()) < v->arity) return v;
  if (v->ctorFn) return vCon(v->name, v->fields);
  const PrimImpl& impl = prims_.at(v->name);
  PrimCall call{v->fields, *this, store_, impl.resultEvidence};
  return impl.fn(call);
}

}  // namespace linck
