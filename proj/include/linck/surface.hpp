#pragma once

// Surface syntax: AST, parser, printer and the do-notation expansion.

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "linck/constraint.hpp"
#include "linck/span.hpp"
#include "linck/types.hpp"

namespace linck {

struct Pattern {
  enum class K { Var, Wild, Ctor, Int };
  K k = K::Wild;
  std::string name;  // Var binder or constructor ("()" and "(,)" for tuples)
  std::vector<Pattern> args;
  long long ival = 0;
  SourceSpan span;
};

struct Expr;
using ExprP = std::shared_ptr<Expr>;

struct Alt {
  Pattern pat;
  ExprP body;
};

struct Expr {
  enum class K { Var, Ctor, Lambda, App, Pack, Unpack, Case, Let, Int, Str };
  K k = K::Var;
  SourceSpan span;
  std::string name;  // Var, Ctor; binder of Lambda, Unpack, Let
  TypeP annot;       // optional Lambda binder annotation
  std::optional<Scheme> sig;  // Let with signature
  Mult mult = Mult::Many;     // Case, Let
  ExprP a;  // App fn, Lambda body, Pack body, Unpack/Let rhs, Case scrutinee
  ExprP b;  // App arg, Unpack/Let body
  std::vector<Alt> alts;
  long long ival = 0;
  std::string sval;
};

// Names the do-notation expands to.
inline constexpr const char* kBind = "Linearly.bind";
inline constexpr const char* kThen = "Linearly.then";

ExprP mkVar(const std::string& n, SourceSpan s = {});
ExprP mkCtor(const std::string& n, SourceSpan s = {});
ExprP mkApp(ExprP f, ExprP x, SourceSpan s = {});
ExprP mkLambda(const std::string& x, ExprP body, SourceSpan s = {}, TypeP annot = nullptr);
ExprP mkPack(ExprP e, SourceSpan s = {});
ExprP mkUnpack(const std::string& x, ExprP rhs, ExprP body, SourceSpan s = {});
ExprP mkCase(Mult m, ExprP scrut, std::vector<Alt> alts, SourceSpan s = {});
ExprP mkLet(Mult m, const std::string& x, std::optional<Scheme> sig, ExprP rhs, ExprP body,
            SourceSpan s = {});
ExprP mkInt(long long v, SourceSpan s = {});

struct DoStmt {
  enum class K { Bind, Let, Expr };
  K k = K::Expr;
  Pattern pat;  // Bind
  ExprP e;      // Bind rhs, Expr, Let rhs
  std::string letName;
  Mult letMult = Mult::One;
  std::optional<Scheme> letSig;
  SourceSpan span;
};

struct MalformedDo : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Expands a do-block. `fresh` supplies names for pattern binds.
ExprP desugarDo(const std::vector<DoStmt>& stmts, int& fresh);

struct ClassDecl {
  std::string name;
  int arity = 0;
  bool duplicable = false;
  SourceSpan span;
};

struct DataCon {
  std::string name;
  std::vector<std::pair<Mult, TypeP>> fields;
};

struct DataDecl {
  std::string name;
  std::vector<std::string> params;
  std::vector<DataCon> cons;
  SourceSpan span;
};

// type RW n = (Read n, Write n)
struct SynonymDecl {
  std::string name;
  std::vector<std::string> params;
  SimpleConstraint body;
  SourceSpan span;
};

struct ValueDecl {
  std::string name;
  std::optional<Scheme> sig;
  ExprP body;  // null for a primitive signature
  SourceSpan span;     // definition
  SourceSpan sigSpan;  // signature
};

struct SurfaceProgram {
  std::string file;
  std::vector<ClassDecl> classDecls;
  std::vector<DataDecl> dataDecls;
  std::vector<SynonymDecl> synonyms;
  std::vector<ValueDecl> valueDecls;
};

struct ParseError : std::runtime_error {
  SourceSpan span;
  std::vector<std::string> expected;
  ParseError(const std::string& msg, SourceSpan s, std::vector<std::string> exp = {})
      : std::runtime_error(msg), span(std::move(s)), expected(std::move(exp)) {}
};

SurfaceProgram parseProgram(const std::string& text, const std::string& file = "<input>");
ExprP parseExpr(const std::string& text, const std::string& file = "<input>");
TypeP parseType(const std::string& text);
Scheme parseScheme(const std::string& text);

std::string prettyExpr(const ExprP& e);
std::string prettyPattern(const Pattern& p);
std::string prettyProgram(const SurfaceProgram& p);

// Structural equality, ignoring spans.
bool exprEq(const ExprP& a, const ExprP& b);
bool patternEq(const Pattern& a, const Pattern& b);
bool programEq(const SurfaceProgram& a, const SurfaceProgram& b);

}  // namespace linck
