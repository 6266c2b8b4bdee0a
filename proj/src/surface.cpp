#include "linck/surface.hpp"

#include <cctype>
#include <cstring>
#include <set>
#include <functional>
#include <map>

namespace linck {

// ---------------------------------------------------------------------------
// Node constructors

namespace {
ExprP node(Expr::K k, SourceSpan s) {
  auto e = std::make_shared<Expr>();
  e->k = k;
  e->span = std::move(s);
  return e;
}
}  // namespace

ExprP mkVar(const std::string& n, SourceSpan s) {
  auto e = node(Expr::K::Var, std::move(s));
  e->name = n;
  return e;
}

ExprP mkCtor(const std::string& n, SourceSpan s) {
  auto e = node(Expr::K::Ctor, std::move(s));
  e->name = n;
  return e;
}

ExprP mkApp(ExprP f, ExprP x, SourceSpan s) {
  if (!s.valid()) s = spanJoin(f->span, x->span);
  auto e = node(Expr::K::App, std::move(s));
  e->a = std::move(f);
  e->b = std::move(x);
  return e;
}

ExprP mkLambda(const std::string& x, ExprP body, SourceSpan s, TypeP annot) {
  auto e = node(Expr::K::Lambda, std::move(s));
  e->name = x;
  e->a = std::move(body);
  e->annot = std::move(annot);
  return e;
}

ExprP mkPack(ExprP b, SourceSpan s) {
  auto e = node(Expr::K::Pack, std::move(s));
  e->a = std::move(b);
  return e;
}

ExprP mkUnpack(const std::string& x, ExprP rhs, ExprP body, SourceSpan s) {
  auto e = node(Expr::K::Unpack, std::move(s));
  e->name = x;
  e->a = std::move(rhs);
  e->b = std::move(body);
  return e;
}

ExprP mkCase(Mult m, ExprP scrut, std::vector<Alt> alts, SourceSpan s) {
  auto e = node(Expr::K::Case, std::move(s));
  e->mult = m;
  e->a = std::move(scrut);
  e->alts = std::move(alts);
  return e;
}

ExprP mkLet(Mult m, const std::string& x, std::optional<Scheme> sig, ExprP rhs, ExprP body,
            SourceSpan s) {
  auto e = node(Expr::K::Let, std::move(s));
  e->mult = m;
  e->name = x;
  e->sig = std::move(sig);
  e->a = std::move(rhs);
  e->b = std::move(body);
  return e;
}

ExprP mkInt(long long v, SourceSpan s) {
  auto e = node(Expr::K::Int, std::move(s));
  e->ival = v;
  return e;
}

// ---------------------------------------------------------------------------
// Do-notation

ExprP desugarDo(const std::vector<DoStmt>& stmts, int& fresh) {
  if (stmts.empty()) throw MalformedDo("empty do block");
  std::function<ExprP(size_t)> go = [&](size_t i) -> ExprP {
    const DoStmt& s = stmts[i];
    const bool last = i + 1 == stmts.size();
    if (last) {
      if (s.k != DoStmt::K::Expr)
        throw MalformedDo("do block at " + s.span.str() + " must end in an expression");
      return s.e;
    }
    ExprP rest = go(i + 1);
    switch (s.k) {
      case DoStmt::K::Expr: {
        auto then = mkApp(mkVar(kThen, s.span), s.e, s.span);
        return mkApp(then, rest, s.span);
      }
      case DoStmt::K::Let:
        return mkLet(s.letMult, s.letName, s.letSig, s.e, rest, s.span);
      case DoStmt::K::Bind: {
        ExprP k;
        if (s.pat.k == Pattern::K::Var) {
          k = mkLambda(s.pat.name, rest, s.span);
        } else {
          std::string tmp = "_do" + std::to_string(++fresh);
          k = mkLambda(tmp, mkCase(Mult::One, mkVar(tmp, s.span), {Alt{s.pat, rest}}, s.span),
                       s.span);
        }
        auto bind = mkApp(mkVar(kBind, s.span), s.e, s.span);
        return mkApp(bind, k, s.span);
      }
    }
    return rest;
  };
  return go(0);
}

// ---------------------------------------------------------------------------
// Lexer

namespace {

enum class TK { Ident, UIdent, Qual, Int, Str, Sym, Kw, End };

struct Token {
  TK k = TK::End;
  std::string text;
  long long ival = 0;
  SourceSpan span;
};

const std::set<std::string> kKeywords = {"let", "in",     "case",   "of",    "if",
                                         "then", "else",  "do",     "pack",  "exists",
                                         "forall", "class", "data", "type"};

struct Lexer {
  const std::string& src;
  std::string file;
  size_t i = 0;
  int line = 1, col = 1;

  Lexer(const std::string& s, std::string f) : src(s), file(std::move(f)) {}

  char cur(size_t off = 0) const { return i + off < src.size() ? src[i + off] : '\0'; }
  bool startsWith(const char* s) const { return src.compare(i, std::strlen(s), s) == 0; }

  void advance(size_t n) {
    for (size_t j = 0; j < n && i < src.size(); ++j) {
      unsigned char c = static_cast<unsigned char>(src[i]);
      if (c == '\n') {
        ++line;
        col = 1;
      } else if ((c & 0xC0) != 0x80) {
        ++col;
      }
      ++i;
    }
  }

  SourceSpan here() const { return {file, line, col, line, col}; }

  [[noreturn]] void fail(const std::string& msg, std::vector<std::string> exp = {}) {
    throw ParseError(msg, here(), std::move(exp));
  }

  static bool identChar(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
  }

  std::vector<Token> run() {
    // Unicode aliases for ASCII tokens.
    static const std::vector<std::pair<std::string, std::string>> aliases = {
        {"⊸", "-o"}, {"=∘", "=o"}, {"⊗", "*"},  {"∃", "exists"},
        {"□", "pack"}, {"→", "->"}, {"←", "<-"}, {"⇒", "=>"},
        {"λ", "\\"},  {"∀", "forall"}};
    static const std::vector<std::string> syms = {"->", "-o", "=>", "=o", "==", "/=", "<=", ">=",
                                                  "<-", "&&", "||", "::", "\\", "(",  ")",  ",",
                                                  ";",  "{",  "}",  "|",  "=",  "*",  "+",  "-",
                                                  "/",  "<",  ">",  "$",  ".",  ":"};
    std::vector<Token> out;
    while (true) {
      // Whitespace and comments.
      while (i < src.size()) {
        if (std::isspace(static_cast<unsigned char>(cur()))) {
          advance(1);
        } else if (startsWith("--")) {
          while (i < src.size() && cur() != '\n') advance(1);
        } else {
          break;
        }
      }
      if (i >= src.size()) break;
      Token t;
      t.span = here();
      auto finish = [&](size_t n) {
        advance(n);
        t.span.endLine = line;
        t.span.endCol = col;
        out.push_back(t);
      };
      bool aliased = false;
      for (const auto& [u, a] : aliases) {
        if (startsWith(u.c_str())) {
          t.text = a;
          t.k = kKeywords.count(a) ? TK::Kw : TK::Sym;
          finish(u.size());
          aliased = true;
          break;
        }
      }
      if (aliased) continue;
      char c = cur();
      if (c == '@' || c == '%') {
        std::string rest;
        size_t n = 1;
        if (cur(1) == '1' && !identChar(cur(2))) {
          rest = "1";
          n = 2;
        } else if (cur(1) == 'w' && !identChar(cur(2))) {
          rest = "w";
          n = 2;
        } else if (src.compare(i + 1, 2, "ω") == 0) {
          rest = "w";
          n = 3;
        } else {
          std::string bad;
          for (size_t j = 1; identChar(cur(j)); ++j) bad += cur(j);
          fail("unknown multiplicity '" + std::string(1, c) + bad + "'",
               {std::string(1, c) + "1", std::string(1, c) + "w"});
        }
        t.k = TK::Sym;
        t.text = std::string(1, c) + rest;
        finish(n);
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c))) {
        size_t n = 0;
        while (std::isdigit(static_cast<unsigned char>(cur(n)))) ++n;
        t.k = TK::Int;
        t.text = src.substr(i, n);
        t.ival = std::stoll(t.text);
        finish(n);
        continue;
      }
      if (c == '"') {
        size_t n = 1;
        std::string val;
        while (true) {
          char d = cur(n);
          if (d == '\0' || d == '\n') fail("unterminated string literal", {"\""});
          if (d == '"') break;
          if (d == '\\') {
            char e = cur(n + 1);
            val += e == 'n' ? '\n' : e == 't' ? '\t' : e;
            n += 2;
          } else {
            val += d;
            ++n;
          }
        }
        t.k = TK::Str;
        t.text = val;
        finish(n + 1);
        continue;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        size_t n = 0;
        while (identChar(cur(n))) ++n;
        std::string word = src.substr(i, n);
        if (std::isupper(static_cast<unsigned char>(c)) && cur(n) == '.' &&
            std::islower(static_cast<unsigned char>(cur(n + 1)))) {
          size_t m = n + 1;
          while (identChar(cur(m))) ++m;
          t.k = TK::Qual;
          t.text = src.substr(i, m);
          finish(m);
          continue;
        }
        if (word == "_") {
          t.k = TK::Sym;
        } else if (kKeywords.count(word)) {
          t.k = TK::Kw;
        } else {
          t.k = std::isupper(static_cast<unsigned char>(c)) ? TK::UIdent : TK::Ident;
        }
        t.text = word;
        finish(n);
        continue;
      }
      bool matched = false;
      for (const auto& s : syms) {
        if (!startsWith(s.c_str())) continue;
        // "-o" and "=o" must not swallow the start of an identifier.
        if ((s == "-o" || s == "=o") && identChar(cur(2))) continue;
        t.k = TK::Sym;
        t.text = s;
        finish(s.size());
        matched = true;
        break;
      }
      if (!matched) fail(std::string("unexpected character '") + c + "'");
    }
    Token end;
    end.k = TK::End;
    end.text = "<end of input>";
    end.span = here();
    out.push_back(end);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Parser

const std::set<std::string> kBinOps = {"+",  "-",  "*",  "/",  "==", "/=",
                                       "<",  "<=", ">",  ">=", "&&", "||"};

int opPrec(const std::string& op) {
  if (op == "||") return 2;
  if (op == "&&") return 3;
  if (op == "==" || op == "/=" || op == "<" || op == "<=" || op == ">" || op == ">=") return 4;
  if (op == "+" || op == "-") return 6;
  if (op == "*" || op == "/") return 7;
  return -1;
}

bool rightAssoc(const std::string& op) { return op == "||" || op == "&&"; }

// Marker for "w." prefixed constraint atoms inside type syntax.
const char* kUrMarker = "w.";

SimpleConstraint toConstraint(const TypeP& t, Mult m, const SourceSpan& at) {
  if (t->k == Type::K::Con) {
    if (t->name == "()") return SimpleConstraint::eps();
    if (t->name == "(,)")
      return tensor(toConstraint(t->args[0], m, at), toConstraint(t->args[1], m, at));
    if (t->name == kUrMarker) return toConstraint(t->args[0], Mult::Many, at);
    if (!t->name.empty() && std::isupper(static_cast<unsigned char>(t->name[0])))
      return SimpleConstraint::atom(m, Atom(t->name, t->args));
  }
  throw ParseError("expected a constraint, found type " + showType(t), at, {"constraint"});
}

struct Parser {
  std::vector<Token> toks;
  size_t pos = 0;
  std::string file;
  int* fresh;
  int doDepth = 0;
  SourceSpan lastEnd;

  const Token& peek(size_t off = 0) const {
    size_t j = std::min(pos + off, toks.size() - 1);
    return toks[j];
  }
  bool isSym(const std::string& s, size_t off = 0) const {
    const Token& t = peek(off);
    return t.k == TK::Sym && t.text == s;
  }
  bool isKw(const std::string& s, size_t off = 0) const {
    const Token& t = peek(off);
    return t.k == TK::Kw && t.text == s;
  }
  Token take() {
    Token t = peek();
    if (pos < toks.size() - 1) ++pos;
    lastEnd = t.span;
    return t;
  }
  [[noreturn]] void fail(const std::string& what, std::vector<std::string> exp) {
    const Token& t = peek();
    std::string msg = "unexpected " + (t.k == TK::End ? std::string("end of input")
                                                      : "'" + t.text + "'");
    if (!what.empty()) msg += " " + what;
    if (!exp.empty()) {
      msg += "; expected ";
      for (size_t i = 0; i < exp.size(); ++i) msg += (i ? ", " : "") + exp[i];
    }
    throw ParseError(msg, t.span, std::move(exp));
  }
  void expectSym(const std::string& s, const std::string& what = "") {
    if (!isSym(s)) fail(what, {"'" + s + "'"});
    take();
  }
  void expectKw(const std::string& s, const std::string& what = "") {
    if (!isKw(s)) fail(what, {"'" + s + "'"});
    take();
  }
  std::string expectIdent(const std::string& what = "") {
    if (peek().k != TK::Ident) fail(what, {"identifier"});
    return take().text;
  }
  SourceSpan from(const SourceSpan& start) const {
    SourceSpan s = start;
    s.endLine = lastEnd.endLine;
    s.endCol = lastEnd.endCol;
    return s;
  }
  Mult defaultMult() const { return doDepth > 0 ? Mult::One : Mult::Many; }
  std::optional<Mult> optMult() {
    if (isSym("@1")) {
      take();
      return Mult::One;
    }
    if (isSym("@w")) {
      take();
      return Mult::Many;
    }
    return std::nullopt;
  }

  // ---- types ----

  TypeP type() {
    if (isKw("exists")) {
      take();
      std::vector<std::string> vars;
      while (peek().k == TK::Ident) vars.push_back(take().text);
      if (vars.empty()) fail("after 'exists'", {"type variable"});
      expectSym(".", "after existential binders");
      TypeP body = type();
      if (body->k == Type::K::Exists) {
        vars.insert(vars.end(), body->vars.begin(), body->vars.end());
        return tExists(vars, body->args[0], body->q);
      }
      return tExists(vars, body, SimpleConstraint::eps());
    }
    SourceSpan start = peek().span;
    TypeP lhs = starType();
    if (isSym("->") || isSym("-o")) {
      Mult m = take().text == "->" ? Mult::Many : Mult::One;
      return tArrow(m, lhs, type());
    }
    if (isSym("=o") || isSym("=>")) {
      Mult m = take().text == "=>" ? Mult::Many : Mult::One;
      SimpleConstraint q = toConstraint(lhs, m, from(start));
      TypeP rhs = type();
      if (m == Mult::Many && rhs->k == Type::K::Qual) return tQual(tensor(q, rhs->q), rhs->args[0]);
      return tQual(q, rhs);
    }
    return lhs;
  }

  TypeP starType() {
    TypeP body = btype();
    if (!isSym("*")) return body;
    SourceSpan start = peek().span;
    take();
    TypeP c = btype();
    return tExists({}, body, toConstraint(c, Mult::One, from(start)));
  }

  bool atypeStart() const {
    const Token& t = peek();
    return t.k == TK::Ident || t.k == TK::UIdent || isSym("(");
  }

  TypeP btype() {
    if (peek().k == TK::UIdent) {
      std::string n = take().text;
      std::vector<TypeP> args;
      while (atypeStart()) args.push_back(atype());
      return tCon(n, std::move(args));
    }
    return atype();
  }

  TypeP atype() {
    const Token& t = peek();
    if (t.k == TK::Ident) {
      std::string n = take().text;
      if (n == "w" && isSym(".")) {
        take();
        return tCon(kUrMarker, {btype()});
      }
      return tVar(n);
    }
    if (t.k == TK::UIdent) return tCon(take().text);
    if (isSym("(")) {
      take();
      if (isSym(")")) {
        take();
        return tUnit();
      }
      std::vector<TypeP> items{type()};
      while (isSym(",")) {
        take();
        items.push_back(type());
      }
      expectSym(")", "in type");
      TypeP r = items.back();
      for (size_t i = items.size() - 1; i-- > 0;) r = tPair(items[i], r);
      return r;
    }
    fail("in type", {"type variable", "type constructor", "'('"});
  }

  Scheme scheme() {
    Scheme s;
    if (isKw("forall")) {
      take();
      while (peek().k == TK::Ident) s.vars.push_back(take().text);
      expectSym(".", "after quantified variables");
    }
    TypeP t = type();
    if (t->k == Type::K::Qual) {
      s.q = t->q;
      s.body = t->args[0];
    } else {
      s.body = t;
    }
    return s;
  }

  // ---- patterns ----

  bool apatStart() const {
    const Token& t = peek();
    return t.k == TK::Ident || t.k == TK::UIdent || t.k == TK::Int || isSym("_") || isSym("(");
  }

  Pattern pattern() {
    if (peek().k == TK::UIdent) {
      Pattern p;
      p.span = peek().span;
      p.k = Pattern::K::Ctor;
      p.name = take().text;
      while (apatStart()) p.args.push_back(apat());
      p.span = from(p.span);
      return p;
    }
    return apat();
  }

  Pattern apat() {
    Pattern p;
    p.span = peek().span;
    const Token& t = peek();
    if (t.k == TK::Ident) {
      p.k = Pattern::K::Var;
      p.name = take().text;
    } else if (isSym("_")) {
      take();
      p.k = Pattern::K::Wild;
    } else if (t.k == TK::Int) {
      p.k = Pattern::K::Int;
      p.ival = take().ival;
    } else if (t.k == TK::UIdent) {
      p.k = Pattern::K::Ctor;
      p.name = take().text;
    } else if (isSym("(")) {
      take();
      if (isSym(")")) {
        take();
        p.k = Pattern::K::Ctor;
        p.name = "()";
      } else {
        std::vector<Pattern> items{pattern()};
        while (isSym(",")) {
          take();
          items.push_back(pattern());
        }
        expectSym(")", "in pattern");
        p = items.back();
        for (size_t i = items.size() - 1; i-- > 0;) {
          Pattern pr;
          pr.k = Pattern::K::Ctor;
          pr.name = "(,)";
          pr.args = {items[i], p};
          p = pr;
        }
      }
    } else {
      fail("in pattern", {"variable", "'_'", "constructor", "integer", "'('"});
    }
    p.span = from(p.span);
    return p;
  }

  // ---- expressions ----

  ExprP expr() {
    SourceSpan start = peek().span;
    ExprP lhs = opExpr(0);
    if (isSym("$")) {
      take();
      ExprP rhs = expr();
      return mkApp(lhs, rhs, from(start));
    }
    return lhs;
  }

  ExprP opExpr(int minPrec) {
    SourceSpan start = peek().span;
    ExprP lhs = appExpr();
    while (peek().k == TK::Sym && kBinOps.count(peek().text) && opPrec(peek().text) >= minPrec) {
      Token op = take();
      int p = opPrec(op.text);
      ExprP rhs = opExpr(rightAssoc(op.text) ? p : p + 1);
      lhs = mkApp(mkApp(mkVar(op.text, op.span), lhs, from(start)), rhs, from(start));
      if (p == 4 && peek().k == TK::Sym && opPrec(peek().text) == 4)
        fail("(comparison operators do not associate)", {});
    }
    return lhs;
  }

  bool aexprStart() const {
    const Token& t = peek();
    return t.k == TK::Ident || t.k == TK::UIdent || t.k == TK::Int || t.k == TK::Str ||
           (t.k == TK::Qual && t.text != "Linearly.return") || isSym("(") || isKw("do");
  }

  ExprP appExpr() {
    SourceSpan start = peek().span;
    if (isSym("\\")) return lambda();
    if (isKw("let")) return letExpr();
    if (isKw("case")) return caseExpr();
    if (isKw("if")) return ifExpr();
    if (isKw("pack") || (peek().k == TK::Qual && peek().text == "Linearly.return")) {
      take();
      if (isSym("$")) {
        take();
        ExprP e = expr();
        return mkPack(e, from(start));
      }
      ExprP e = appExpr();
      return mkPack(e, from(start));
    }
    if (!aexprStart())
      fail("in expression", {"identifier", "constructor", "literal", "'('", "'\\'", "'let'",
                             "'case'", "'if'", "'do'", "'pack'"});
    ExprP f = aexpr();
    while (aexprStart()) {
      ExprP x = aexpr();
      f = mkApp(f, x, from(start));
    }
    return f;
  }

  ExprP aexpr() {
    SourceSpan start = peek().span;
    const Token& t = peek();
    switch (t.k) {
      case TK::Ident: return mkVar(take().text, start);
      case TK::UIdent: return mkCtor(take().text, start);
      case TK::Int: return mkInt(take().ival, start);
      case TK::Str: {
        auto e = node(Expr::K::Str, start);
        e->sval = take().text;
        return e;
      }
      case TK::Qual:
        if (t.text == "Linearly.do") {
          take();
          return doBlock(start);
        }
        return mkVar(take().text, start);
      default: break;
    }
    if (isKw("do")) {
      take();
      return doBlock(start);
    }
    expectSym("(", "in expression");
    if (isSym(")")) {
      take();
      return mkCtor("()", from(start));
    }
    if (isSym(",") && isSym(")", 1)) {
      take();
      take();
      return mkCtor("(,)", from(start));
    }
    if (peek().k == TK::Sym && kBinOps.count(peek().text) && isSym(")", 1)) {
      std::string op = take().text;
      take();
      return mkVar(op, from(start));
    }
    std::vector<ExprP> items{expr()};
    while (isSym(",")) {
      take();
      items.push_back(expr());
    }
    expectSym(")", "in expression");
    if (items.size() == 1) return items[0];
    SourceSpan whole = from(start);
    ExprP r = items.back();
    for (size_t i = items.size() - 1; i-- > 0;)
      r = mkApp(mkApp(mkCtor("(,)", whole), items[i], whole), r, whole);
    return r;
  }

  ExprP lambda() {
    SourceSpan start = peek().span;
    take();
    std::vector<std::pair<std::string, TypeP>> binders;
    while (true) {
      if (peek().k == TK::Ident) {
        binders.push_back({take().text, nullptr});
      } else if (isSym("(") && peek(1).k == TK::Ident && isSym(":", 2)) {
        take();
        std::string n = take().text;
        take();
        TypeP t = type();
        expectSym(")", "after binder annotation");
        binders.push_back({n, t});
      } else {
        break;
      }
    }
    if (binders.empty()) fail("after '\\'", {"binder"});
    expectSym("->", "in lambda");
    ExprP body = expr();
    SourceSpan s = from(start);
    for (size_t i = binders.size(); i-- > 0;) body = mkLambda(binders[i].first, body, s, binders[i].second);
    return body;
  }

  struct LetHead {
    Mult mult;
    std::string name;
    std::optional<Scheme> sig;
    ExprP rhs;
  };

  LetHead letHead() {
    LetHead h;
    h.mult = optMult().value_or(defaultMult());
    h.name = expectIdent("in let binding");
    std::vector<std::string> params;
    if (isSym("::")) {
      take();
      h.sig = scheme();
    } else {
      while (peek().k == TK::Ident) params.push_back(take().text);
    }
    expectSym("=", "in let binding");
    SourceSpan bodyStart = peek().span;
    h.rhs = expr();
    for (size_t i = params.size(); i-- > 0;) h.rhs = mkLambda(params[i], h.rhs, from(bodyStart));
    return h;
  }

  ExprP letExpr() {
    SourceSpan start = peek().span;
    take();
    if (isKw("pack")) {
      take();
      std::string x = expectIdent("in let pack");
      expectSym("=", "in let pack");
      ExprP rhs = expr();
      expectKw("in", "after let pack binding");
      ExprP body = expr();
      return mkUnpack(x, rhs, body, from(start));
    }
    LetHead h = letHead();
    expectKw("in", "after let binding");
    ExprP body = expr();
    return mkLet(h.mult, h.name, h.sig, h.rhs, body, from(start));
  }

  ExprP caseExpr() {
    SourceSpan start = peek().span;
    take();
    Mult m = optMult().value_or(defaultMult());
    ExprP scrut = expr();
    expectKw("of", "in case");
    expectSym("{", "after 'of'");
    std::vector<Alt> alts;
    while (true) {
      Pattern p = pattern();
      expectSym("->", "in case alternative");
      ExprP body = expr();
      alts.push_back({p, body});
      if (isSym(";")) {
        take();
        if (isSym("}")) break;
        continue;
      }
      break;
    }
    expectSym("}", "to close case alternatives");
    return mkCase(m, scrut, std::move(alts), from(start));
  }

  ExprP ifExpr() {
    SourceSpan start = peek().span;
    take();
    ExprP c = expr();
    expectKw("then", "in if");
    ExprP a = expr();
    expectKw("else", "in if");
    ExprP b = expr();
    Pattern pt, pf;
    pt.k = pf.k = Pattern::K::Ctor;
    pt.name = "True";
    pf.name = "False";
    return mkCase(defaultMult(), c, {{pt, a}, {pf, b}}, from(start));
  }

  ExprP doBlock(SourceSpan start) {
    expectSym("{", "after 'do'");
    ++doDepth;
    std::vector<DoStmt> stmts;
    while (!isSym("}")) {
      stmts.push_back(stmt());
      if (isSym(";")) {
        take();
        continue;
      }
      if (!isSym("}")) fail("in do block", {"';'", "'}'"});
    }
    take();
    --doDepth;
    try {
      ExprP e = desugarDo(stmts, *fresh);
      e = std::make_shared<Expr>(*e);
      e->span = from(start);
      return e;
    } catch (const MalformedDo& m) {
      throw ParseError(m.what(), from(start), {"expression"});
    }
  }

  DoStmt stmt() {
    DoStmt s;
    s.span = peek().span;
    if (isKw("let") && !isKw("pack", 1)) {
      size_t save = pos;
      take();
      LetHead h = letHead();
      if (isKw("in")) {
        pos = save;
      } else {
        s.k = DoStmt::K::Let;
        s.letMult = h.mult;
        s.letName = h.name;
        s.letSig = h.sig;
        s.e = h.rhs;
        s.span = from(s.span);
        return s;
      }
    }
    {
      size_t save = pos;
      bool isBind = false;
      Pattern p;
      if (apatStart()) {
        try {
          p = pattern();
          isBind = isSym("<-");
        } catch (const ParseError&) {
          isBind = false;
        }
      }
      if (isBind) {
        take();
        s.k = DoStmt::K::Bind;
        s.pat = p;
        s.e = expr();
        s.span = from(s.span);
        return s;
      }
      pos = save;
    }
    s.k = DoStmt::K::Expr;
    s.e = expr();
    s.span = from(s.span);
    return s;
  }

  void expectEnd(const std::string& what) {
    if (peek().k != TK::End) fail(what, {"end of declaration"});
  }
};

// Splits a token stream into declarations: each starts at column 1.
std::vector<std::vector<Token>> splitDecls(const std::vector<Token>& toks) {
  std::vector<std::vector<Token>> groups;
  for (const auto& t : toks) {
    if (t.k == TK::End) break;
    if (t.span.startCol == 1 || groups.empty()) groups.emplace_back();
    groups.back().push_back(t);
  }
  for (auto& g : groups) {
    Token end;
    end.k = TK::End;
    end.text = "<end of declaration>";
    end.span = g.back().span;
    end.span.startLine = end.span.endLine;
    end.span.startCol = end.span.endCol;
    g.push_back(end);
  }
  return groups;
}

}  // namespace

SurfaceProgram parseProgram(const std::string& text, const std::string& file) {
  Lexer lx(text, file);
  auto toks = lx.run();
  SurfaceProgram prog;
  prog.file = file;
  int fresh = 0;
  std::map<std::string, size_t> byName;
  for (auto& group : splitDecls(toks)) {
    Parser p;
    p.toks = std::move(group);
    p.file = file;
    p.fresh = &fresh;
    SourceSpan start = p.peek().span;
    auto dupKw = [&] { return p.peek().k == TK::Ident && p.peek().text == "dup"; };
    if (p.isKw("class") || (dupKw() && p.isKw("class", 1))) {
      ClassDecl c;
      if (dupKw()) {
        p.take();
        c.duplicable = true;
      }
      p.take();
      if (p.peek().k != TK::UIdent) p.fail("in class declaration", {"class name"});
      c.name = p.take().text;
      while (p.peek().k == TK::Ident) {
        p.take();
        ++c.arity;
      }
      p.expectEnd("in class declaration");
      c.span = p.from(start);
      prog.classDecls.push_back(c);
    } else if (p.isKw("data")) {
      p.take();
      DataDecl d;
      if (p.peek().k != TK::UIdent) p.fail("in data declaration", {"type name"});
      d.name = p.take().text;
      while (p.peek().k == TK::Ident) d.params.push_back(p.take().text);
      bool abstract = !p.isSym("=");
      if (!abstract) p.take();
      while (!abstract) {
        DataCon k;
        if (p.peek().k != TK::UIdent) p.fail("in data declaration", {"constructor"});
        k.name = p.take().text;
        while (p.atypeStart() || p.isSym("%1") || p.isSym("%w")) {
          Mult m = Mult::One;
          if (p.isSym("%1") || p.isSym("%w")) m = p.take().text == "%w" ? Mult::Many : Mult::One;
          k.fields.push_back({m, p.atype()});
        }
        d.cons.push_back(k);
        if (!p.isSym("|")) break;
        p.take();
      }
      p.expectEnd("in data declaration");
      d.span = p.from(start);
      prog.dataDecls.push_back(d);
    } else if (p.isKw("type")) {
      p.take();
      SynonymDecl s;
      if (p.peek().k != TK::UIdent) p.fail("in constraint synonym", {"name"});
      s.name = p.take().text;
      while (p.peek().k == TK::Ident) s.params.push_back(p.take().text);
      p.expectSym("=", "in constraint synonym");
      SourceSpan bs = p.peek().span;
      TypeP t = p.type();
      s.body = toConstraint(t, Mult::One, p.from(bs));
      p.expectEnd("in constraint synonym");
      s.span = p.from(start);
      prog.synonyms.push_back(s);
    } else {
      std::string name;
      if (p.peek().k == TK::Ident) {
        name = p.take().text;
      } else if (p.isSym("(") && p.peek(1).k == TK::Sym && kBinOps.count(p.peek(1).text) &&
                 p.isSym(")", 2)) {
        p.take();
        name = p.take().text;
        p.take();
      } else {
        p.fail("at top level",
               {"'class'", "'dup class'", "'data'", "'type'", "signature", "definition"});
      }
      auto slot = [&]() -> ValueDecl& {
        auto it = byName.find(name);
        if (it == byName.end()) {
          byName[name] = prog.valueDecls.size();
          prog.valueDecls.push_back(ValueDecl{name, std::nullopt, nullptr, {}, {}});
          return prog.valueDecls.back();
        }
        return prog.valueDecls[it->second];
      };
      if (p.isSym("::")) {
        p.take();
        Scheme s = p.scheme();
        p.expectEnd("in signature");
        ValueDecl& v = slot();
        if (v.sig)
          throw ParseError("duplicate signature for " + name, p.from(start), {});
        v.sig = s;
        v.sigSpan = p.from(start);
      } else {
        std::vector<std::string> params;
        while (p.peek().k == TK::Ident) params.push_back(p.take().text);
        p.expectSym("=", "in definition");
        SourceSpan bodyStart = p.peek().span;
        ExprP body = p.expr();
        p.expectEnd("after definition");
        for (size_t i = params.size(); i-- > 0;) body = mkLambda(params[i], body, p.from(bodyStart));
        ValueDecl& v = slot();
        if (v.body) throw ParseError("duplicate definition of " + name, p.from(start), {});
        v.body = body;
        v.span = p.from(start);
      }
    }
  }
  return prog;
}

namespace {
Parser standalone(const std::string& text, const std::string& file, int& fresh) {
  Lexer lx(text, file);
  Parser p;
  p.toks = lx.run();
  p.file = file;
  p.fresh = &fresh;
  return p;
}
}  // namespace

ExprP parseExpr(const std::string& text, const std::string& file) {
  int fresh = 0;
  Parser p = standalone(text, file, fresh);
  ExprP e = p.expr();
  p.expectEnd("after expression");
  return e;
}

TypeP parseType(const std::string& text) {
  int fresh = 0;
  Parser p = standalone(text, "<type>", fresh);
  TypeP t = p.type();
  p.expectEnd("after type");
  return t;
}

Scheme parseScheme(const std::string& text) {
  int fresh = 0;
  Parser p = standalone(text, "<scheme>", fresh);
  Scheme s = p.scheme();
  p.expectEnd("after type");
  return s;
}

// ---------------------------------------------------------------------------
// Printer

namespace {

bool isOpName(const std::string& n) { return kBinOps.count(n) > 0; }

std::string quote(const std::string& s) {
  std::string r = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') r += '\\';
    if (c == '\n') {
      r += "\\n";
      continue;
    }
    r += c;
  }
  return r + "\"";
}

std::string pat(const Pattern& p, bool atomic) {
  switch (p.k) {
    case Pattern::K::Var: return p.name;
    case Pattern::K::Wild: return "_";
    case Pattern::K::Int: return std::to_string(p.ival);
    case Pattern::K::Ctor: {
      if (p.name == "(,)" && p.args.size() == 2)
        return "(" + pat(p.args[0], false) + ", " + pat(p.args[1], false) + ")";
      if (p.args.empty()) return p.name;
      std::string s = p.name;
      for (const auto& a : p.args) s += " " + pat(a, true);
      return atomic ? "(" + s + ")" : s;
    }
  }
  return "_";
}

std::string scheme(const Scheme& s) { return showScheme(s); }

// Levels: 0 anything, 1 operand or function head, 2 argument.
std::string pr(const ExprP& e, int lvl) {
  auto paren = [&](const std::string& s, int need) { return lvl >= need ? "(" + s + ")" : s; };
  switch (e->k) {
    case Expr::K::Var: return isOpName(e->name) ? "(" + e->name + ")" : e->name;
    case Expr::K::Ctor: return e->name;
    case Expr::K::Int: return std::to_string(e->ival);
    case Expr::K::Str: return quote(e->sval);
    case Expr::K::App: {
      if (e->a->k == Expr::K::App) {
        const ExprP& f = e->a->a;
        if (f->k == Expr::K::Ctor && f->name == "(,)")
          return "(" + pr(e->a->b, 0) + ", " + pr(e->b, 0) + ")";
        if (f->k == Expr::K::Var && isOpName(f->name))
          return "(" + pr(e->a->b, 1) + " " + f->name + " " + pr(e->b, 1) + ")";
      }
      std::string fn = e->a->k == Expr::K::App ? pr(e->a, 1) : pr(e->a, 2);
      return paren(fn + " " + pr(e->b, 2), 2);
    }
    case Expr::K::Lambda: {
      std::string b = e->annot ? "(" + e->name + " : " + showType(e->annot) + ")" : e->name;
      return paren("\\" + b + " -> " + pr(e->a, 0), 1);
    }
    case Expr::K::Pack: return paren("pack " + pr(e->a, 2), 2);
    case Expr::K::Unpack:
      return paren("let pack " + e->name + " = " + pr(e->a, 0) + " in " + pr(e->b, 0), 1);
    case Expr::K::Let: {
      std::string s = "let @" + multStr(e->mult) + " " + e->name;
      if (e->sig) s += " :: " + scheme(*e->sig);
      s += " = " + pr(e->a, 0) + " in " + pr(e->b, 0);
      return paren(s, 1);
    }
    case Expr::K::Case: {
      std::string s = "case @" + multStr(e->mult) + " " + pr(e->a, 0) + " of { ";
      for (size_t i = 0; i < e->alts.size(); ++i)
        s += (i ? "; " : "") + pat(e->alts[i].pat, false) + " -> " + pr(e->alts[i].body, 0);
      return paren(s + " }", 1);
    }
  }
  return "?";
}

std::string fieldStr(Mult m, const TypeP& t) {
  std::string s = showType(t);
  bool simple = t->k == Type::K::Var || (t->k == Type::K::Con && (t->args.empty() ||
                                                                  t->name == "(,)"));
  if (!simple) s = "(" + s + ")";
  return m == Mult::Many ? "%w " + s : s;
}

}  // namespace

std::string prettyExpr(const ExprP& e) { return pr(e, 0); }
std::string prettyPattern(const Pattern& p) { return pat(p, false); }

std::string prettyProgram(const SurfaceProgram& p) {
  std::string out;
  for (const auto& c : p.classDecls) {
    out += c.duplicable ? "dup class " : "class ";
    out += c.name;
    for (int i = 0; i < c.arity; ++i) out += " t" + std::to_string(i + 1);
    out += "\n";
  }
  for (const auto& s : p.synonyms) {
    out += "type " + s.name;
    for (const auto& v : s.params) out += " " + v;
    // Printed through a qualified type so the constraint syntax is shared.
    std::string q = showType(tQual(s.body, tUnit()));
    out += " = " + q.substr(0, q.size() - std::string(" =o ()").size()) + "\n";
  }
  for (const auto& d : p.dataDecls) {
    out += "data " + d.name;
    for (const auto& v : d.params) out += " " + v;
    if (!d.cons.empty()) out += " =";
    for (size_t i = 0; i < d.cons.size(); ++i) {
      out += (i ? " | " : " ") + d.cons[i].name;
      for (const auto& [m, t] : d.cons[i].fields) out += " " + fieldStr(m, t);
    }
    out += "\n";
  }
  for (const auto& v : p.valueDecls) {
    std::string n = isOpName(v.name) ? "(" + v.name + ")" : v.name;
    if (v.sig) out += n + " :: " + scheme(*v.sig) + "\n";
    if (v.body) out += n + " = " + pr(v.body, 0) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Structural equality

bool patternEq(const Pattern& a, const Pattern& b) {
  if (a.k != b.k || a.name != b.name || a.ival != b.ival || a.args.size() != b.args.size())
    return false;
  for (size_t i = 0; i < a.args.size(); ++i)
    if (!patternEq(a.args[i], b.args[i])) return false;
  return true;
}

namespace {
bool schemeEq(const Scheme& a, const Scheme& b) {
  return a.vars == b.vars && a.q == b.q && typeEq(a.body, b.body);
}
bool optTypeEq(const TypeP& a, const TypeP& b) {
  if (!a || !b) return !a && !b;
  return typeEq(a, b);
}
}  // namespace

bool exprEq(const ExprP& a, const ExprP& b) {
  if (!a || !b) return !a && !b;
  if (a->k != b->k || a->name != b->name || a->ival != b->ival || a->sval != b->sval)
    return false;
  if ((a->k == Expr::K::Case || a->k == Expr::K::Let) && a->mult != b->mult) return false;
  if (!optTypeEq(a->annot, b->annot)) return false;
  if (a->sig.has_value() != b->sig.has_value()) return false;
  if (a->sig && !schemeEq(*a->sig, *b->sig)) return false;
  if (!exprEq(a->a, b->a) || !exprEq(a->b, b->b)) return false;
  if (a->alts.size() != b->alts.size()) return false;
  for (size_t i = 0; i < a->alts.size(); ++i)
    if (!patternEq(a->alts[i].pat, b->alts[i].pat) || !exprEq(a->alts[i].body, b->alts[i].body))
      return false;
  return true;
}

bool programEq(const SurfaceProgram& a, const SurfaceProgram& b) {
  if (a.classDecls.size() != b.classDecls.size() || a.dataDecls.size() != b.dataDecls.size() ||
      a.synonyms.size() != b.synonyms.size() || a.valueDecls.size() != b.valueDecls.size())
    return false;
  for (size_t i = 0; i < a.classDecls.size(); ++i) {
    const auto &x = a.classDecls[i], &y = b.classDecls[i];
    if (x.name != y.name || x.arity != y.arity || x.duplicable != y.duplicable) return false;
  }
  for (size_t i = 0; i < a.synonyms.size(); ++i) {
    const auto &x = a.synonyms[i], &y = b.synonyms[i];
    if (x.name != y.name || x.params != y.params || !(x.body == y.body)) return false;
  }
  for (size_t i = 0; i < a.dataDecls.size(); ++i) {
    const auto &x = a.dataDecls[i], &y = b.dataDecls[i];
    if (x.name != y.name || x.params != y.params || x.cons.size() != y.cons.size()) return false;
    for (size_t j = 0; j < x.cons.size(); ++j) {
      const auto &k = x.cons[j], &l = y.cons[j];
      if (k.name != l.name || k.fields.size() != l.fields.size()) return false;
      for (size_t f = 0; f < k.fields.size(); ++f)
        if (k.fields[f].first != l.fields[f].first ||
            !typeEq(k.fields[f].second, l.fields[f].second))
          return false;
    }
  }
  for (size_t i = 0; i < a.valueDecls.size(); ++i) {
    const auto &x = a.valueDecls[i], &y = b.valueDecls[i];
    if (x.name != y.name || x.sig.has_value() != y.sig.has_value()) return false;
    if (x.sig && !schemeEq(*x.sig, *y.sig)) return false;
    if (!exprEq(x.body, y.body)) return false;
  }
  return true;
}

}  // namespace linck
