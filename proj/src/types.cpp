#include "linck/types.hpp"

#include <algorithm>

#include "linck/span.hpp"

namespace linck {

std::string SourceSpan::str() const {
  return file + ":" + std::to_string(startLine) + ":" + std::to_string(startCol);
}

bool spanBefore(const SourceSpan& a, const SourceSpan& b) {
  if (a.file != b.file) return a.file < b.file;
  if (a.startLine != b.startLine) return a.startLine < b.startLine;
  return a.startCol < b.startCol;
}

SourceSpan spanJoin(const SourceSpan& a, const SourceSpan& b) {
  if (!a.valid()) return b;
  if (!b.valid()) return a;
  SourceSpan r = a;
  if (spanBefore(b, a)) {
    r.startLine = b.startLine;
    r.startCol = b.startCol;
  }
  if (b.endLine > r.endLine || (b.endLine == r.endLine && b.endCol > r.endCol)) {
    r.endLine = b.endLine;
    r.endCol = b.endCol;
  }
  return r;
}

TypeP tVar(const std::string& n) {
  auto t = std::make_shared<Type>();
  t->k = Type::K::Var;
  t->name = n;
  return t;
}

TypeP tMeta(int id) {
  auto t = std::make_shared<Type>();
  t->k = Type::K::Meta;
  t->meta = id;
  return t;
}

TypeP tCon(const std::string& n, std::vector<TypeP> args) {
  auto t = std::make_shared<Type>();
  t->k = Type::K::Con;
  t->name = n;
  t->args = std::move(args);
  return t;
}

TypeP tArrow(Mult m, TypeP dom, TypeP cod) {
  auto t = std::make_shared<Type>();
  t->k = Type::K::Arrow;
  t->mult = m;
  t->args = {std::move(dom), std::move(cod)};
  return t;
}

TypeP tExists(std::vector<std::string> vars, TypeP body, SimpleConstraint q) {
  auto t = std::make_shared<Type>();
  t->k = Type::K::Exists;
  t->vars = std::move(vars);
  t->args = {std::move(body)};
  t->q = std::move(q);
  return t;
}

TypeP tCoreExists(std::vector<std::string> vars, TypeP ev, TypeP payload) {
  auto t = std::make_shared<Type>();
  t->k = Type::K::Exists;
  t->vars = std::move(vars);
  t->args = {std::move(payload), std::move(ev)};
  return t;
}

TypeP tQual(SimpleConstraint q, TypeP body) {
  auto t = std::make_shared<Type>();
  t->k = Type::K::Qual;
  t->q = std::move(q);
  t->args = {std::move(body)};
  return t;
}

TypeP tUnit() { return tCon("()"); }
TypeP tPair(TypeP a, TypeP b) { return tCon("(,)", {std::move(a), std::move(b)}); }
TypeP tUr(TypeP a) { return tCon("Ur", {std::move(a)}); }
TypeP tInt() { return tCon("Int"); }
TypeP tBool() { return tCon("Bool"); }

namespace {

// Surface constraint syntax: "()" , "C a", or "(C a, D b)". Unrestricted
// atoms are written with a leading "w.", which the parser also accepts.
std::string showConstraintSurface(const SimpleConstraint& q) {
  std::vector<std::string> parts;
  for (const auto& a : q.atoms()) {
    if (q.U.count(a)) parts.push_back("w." + a.key());
    for (int i = 0; i < q.linearCount(a); ++i) parts.push_back(a.key());
  }
  if (parts.empty()) return "()";
  if (parts.size() == 1) return parts[0];
  std::string s = "(";
  for (size_t i = 0; i < parts.size(); ++i) s += (i ? ", " : "") + parts[i];
  return s + ")";
}

// Precedence levels: 0 top (arrows, exists, qual), 1 application arg.
std::string show(const TypeP& t, int prec) {
  switch (t->k) {
    case Type::K::Var: return t->name;
    case Type::K::Meta: return "?" + std::to_string(t->meta);
    case Type::K::Con: {
      if (t->name == "()") return "()";
      if (t->name == "(,)") return "(" + show(t->args[0], 0) + ", " + show(t->args[1], 0) + ")";
      if (t->args.empty()) return t->name;
      std::string s = t->name;
      for (const auto& a : t->args) s += " " + show(a, 1);
      return prec > 0 ? "(" + s + ")" : s;
    }
    case Type::K::Arrow: {
      std::string s = show(t->args[0], 1) + (t->mult == Mult::One ? " -o " : " -> ") +
                      show(t->args[1], 0);
      return prec > 0 ? "(" + s + ")" : s;
    }
    case Type::K::Exists: {
      std::string s;
      if (!t->vars.empty()) {
        s = "exists";
        for (const auto& v : t->vars) s += " " + v;
        s += ". ";
      }
      s += show(t->args[0], 1) + " * " + showConstraintSurface(t->q);
      return "(" + s + ")";
    }
    case Type::K::Qual: {
      std::string s;
      SimpleConstraint u, l;
      u.U = t->q.U;
      l.L = t->q.L;
      if (!u.isEps()) {
        std::vector<std::string> ps;
        for (const auto& a : u.U) ps.push_back(a.key());
        s += ps.size() == 1 ? ps[0] : "(" + [&] {
          std::string r;
          for (size_t i = 0; i < ps.size(); ++i) r += (i ? ", " : "") + ps[i];
          return r;
        }() + ")";
        s += " => ";
      }
      if (!l.isEps() || u.isEps()) s += showConstraintSurface(l) + " =o ";
      s += show(t->args[0], 0);
      return prec > 0 ? "(" + s + ")" : s;
    }
  }
  return "?";
}

}  // namespace

std::string showType(const TypeP& t) {
  std::string s = show(t, 0);
  // Top-level existentials need no outer parentheses.
  if (t->k == Type::K::Exists && s.size() >= 2 && s.front() == '(' && s.back() == ')')
    return s.substr(1, s.size() - 2);
  return s;
}

namespace {

bool eqImpl(const TypeP& a, const TypeP& b, std::map<std::string, std::string>& ren) {
  if (a->k != b->k) return false;
  switch (a->k) {
    case Type::K::Var: {
      auto it = ren.find(a->name);
      return (it != ren.end() ? it->second : a->name) == b->name;
    }
    case Type::K::Meta: return a->meta == b->meta;
    case Type::K::Con:
      if (a->name != b->name || a->args.size() != b->args.size()) return false;
      for (size_t i = 0; i < a->args.size(); ++i)
        if (!eqImpl(a->args[i], b->args[i], ren)) return false;
      return true;
    case Type::K::Arrow:
      return a->mult == b->mult && eqImpl(a->args[0], b->args[0], ren) &&
             eqImpl(a->args[1], b->args[1], ren);
    case Type::K::Exists: {
      if (a->vars.size() != b->vars.size()) return false;
      auto saved = ren;
      for (size_t i = 0; i < a->vars.size(); ++i) ren[a->vars[i]] = b->vars[i];
      // Compare constraints after renaming a's binders to b's.
      TypeSubst s;
      for (const auto& [from, to] : ren) s[from] = tVar(to);
      bool ok = a->args.size() == b->args.size() && substituteSimple(a->q, s, true) == b->q;
      for (size_t i = 0; ok && i < a->args.size(); ++i) ok = eqImpl(a->args[i], b->args[i], ren);
      ren = saved;
      return ok;
    }
    case Type::K::Qual: {
      TypeSubst s;
      for (const auto& [from, to] : ren) s[from] = tVar(to);
      return substituteSimple(a->q, s, true) == b->q && eqImpl(a->args[0], b->args[0], ren);
    }
  }
  return false;
}

}  // namespace

bool typeEq(const TypeP& a, const TypeP& b) {
  std::map<std::string, std::string> ren;
  return eqImpl(a, b, ren);
}

TypeP substType(const TypeP& t, const TypeSubst& s) {
  if (s.empty()) return t;
  switch (t->k) {
    case Type::K::Var: {
      auto it = s.find(t->name);
      return it == s.end() ? t : it->second;
    }
    case Type::K::Meta: return t;
    case Type::K::Con: {
      std::vector<TypeP> args;
      for (const auto& a : t->args) args.push_back(substType(a, s));
      return tCon(t->name, std::move(args));
    }
    case Type::K::Arrow:
      return tArrow(t->mult, substType(t->args[0], s), substType(t->args[1], s));
    case Type::K::Exists: {
      TypeSubst inner = s;
      for (const auto& v : t->vars) inner.erase(v);
      // Binders are generated fresh by callers that could capture; rename
      // any binder that clashes with a free variable of the range.
      std::set<std::string> rangeFv;
      for (const auto& [k, v] : inner) freeTypeVars(v, rangeFv);
      std::vector<std::string> vars = t->vars;
      for (auto& v : vars) {
        if (rangeFv.count(v)) {
          std::string fresh = v;
          while (rangeFv.count(fresh)) fresh += "'";
          inner[v] = tVar(fresh);
          v = fresh;
        }
      }
      auto r = std::make_shared<Type>(*t);
      r->vars = vars;
      for (auto& a : r->args) a = substType(a, inner);
      r->q = substituteSimple(t->q, inner, true);
      return r;
    }
    case Type::K::Qual:
      return tQual(substituteSimple(t->q, s, true), substType(t->args[0], s));
  }
  return t;
}

void freeTypeVars(const SimpleConstraint& q, std::set<std::string>& out) {
  for (const auto& a : q.atoms())
    for (const auto& t : a.args) freeTypeVars(t, out);
}

void freeTypeVars(const TypeP& t, std::set<std::string>& out) {
  switch (t->k) {
    case Type::K::Var: out.insert(t->name); return;
    case Type::K::Meta: return;
    case Type::K::Con:
    case Type::K::Arrow:
      for (const auto& a : t->args) freeTypeVars(a, out);
      return;
    case Type::K::Exists: {
      std::set<std::string> inner;
      for (const auto& a : t->args) freeTypeVars(a, inner);
      freeTypeVars(t->q, inner);
      for (const auto& v : t->vars) inner.erase(v);
      out.insert(inner.begin(), inner.end());
      return;
    }
    case Type::K::Qual:
      freeTypeVars(t->q, out);
      freeTypeVars(t->args[0], out);
      return;
  }
}

bool hasMeta(const TypeP& t) {
  if (t->k == Type::K::Meta) return true;
  for (const auto& a : t->args)
    if (hasMeta(a)) return true;
  for (const auto& a : t->q.atoms())
    for (const auto& x : a.args)
      if (hasMeta(x)) return true;
  return false;
}

std::string showScheme(const Scheme& s) {
  std::string r;
  if (!s.vars.empty()) {
    r = "forall";
    for (const auto& v : s.vars) r += " " + v;
    r += ". ";
  }
  if (!s.q.isEps()) return r + showType(tQual(s.q, s.body));
  return r + showType(s.body);
}

}  // namespace linck
