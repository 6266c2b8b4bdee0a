#pragma once

// The explicitly evidence-passing core calculus: terms, the multiplicity
// linter, nested-pattern flattening, the s-expression printer, and a
// call-by-value evaluator over a store of mutable integer arrays.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "linck/span.hpp"
#include "linck/types.hpp"

namespace linck {

// Core types reuse Type without Qual, and with existentials in the core
// form built by tCoreExists. Evidence atoms are constructors named "#Cls".
// Core schemes are Schemes with an empty constraint.

struct CorePat {
  enum class K { Var, Wild, Ctor };
  K k = K::Wild;
  std::string name;
  std::vector<CorePat> args;
};

struct CoreTerm;
using CoreP = std::shared_ptr<const CoreTerm>;

struct CoreAlt {
  CorePat pat;
  CoreP body;
};

struct CoreTerm {
  enum class K { Var, Prim, Ctor, Lambda, App, Pack, Unpack, Case, Let, Int, Str };
  K k = K::Var;
  std::string name;   // Var/Prim/Ctor; Lambda and Let binder; Unpack payload binder
  std::string evName; // Unpack evidence binder
  std::vector<TypeP> tyArgs;         // Var/Prim/Ctor instantiation; Pack witnesses
  std::vector<std::string> skolems;  // Unpack
  Mult mult = Mult::One;             // Lambda binder, Case, Let
  TypeP type;                        // Lambda binder type; Pack existential type
  std::optional<Scheme> scheme;      // Let with a polymorphic binder
  CoreP a;  // App fn; Lambda body; Pack evidence; Unpack rhs; Case scrutinee; Let rhs
  CoreP b;  // App arg; Pack payload; Unpack body; Let body
  std::vector<CoreAlt> alts;
  long long ival = 0;
  std::string sval;
  SourceSpan span;
};

CoreP cVar(const std::string& x, std::vector<TypeP> tyArgs = {});
CoreP cPrim(const std::string& p, std::vector<TypeP> tyArgs = {});
CoreP cCtor(const std::string& k, std::vector<TypeP> tyArgs = {});
CoreP cLam(const std::string& x, Mult m, TypeP t, CoreP body);
CoreP cApp(CoreP f, CoreP x);
CoreP cPack(TypeP exType, std::vector<TypeP> witnesses, CoreP ev, CoreP payload);
CoreP cUnpack(const std::string& z, const std::string& x, std::vector<std::string> skolems,
              CoreP rhs, CoreP body);
CoreP cCase(Mult m, CoreP scrut, std::vector<CoreAlt> alts);
CoreP cLet(Mult m, const std::string& x, std::optional<Scheme> s, CoreP rhs, CoreP body);
CoreP cInt(long long v);
CoreP cStr(const std::string& s);
CoreP cUnit();
CoreP cPair(TypeP ta, TypeP tb, CoreP a, CoreP b);

CorePat pVar(const std::string& x);
CorePat pWild();
CorePat pCtor(const std::string& k, std::vector<CorePat> args = {});

struct CoreCtor {
  std::string type;
  std::vector<std::string> params;
  std::vector<std::pair<Mult, TypeP>> fields;
};

// Signatures everything in a core program may refer to.
struct CoreEnv {
  std::map<std::string, CoreCtor> ctors;
  std::map<std::string, std::vector<std::string>> typeCtors;  // type -> constructors
  std::map<std::string, Scheme> globals;
  std::map<std::string, Scheme> prims;
};

// Adds the built-in unit and pair types.
CoreEnv baseCoreEnv();

struct CoreDecl {
  std::string name;
  Scheme scheme;
  CoreP body;
  SourceSpan span;
};

// ---------------------------------------------------------------------------
// Contexts and linting

struct CoreBinding {
  Mult mult;
  Scheme scheme;
};
using CoreContext = std::map<std::string, CoreBinding>;

struct ContextClashError : std::runtime_error {
  std::string name;
  ContextClashError(const std::string& n, const std::string& msg)
      : std::runtime_error(msg), name(n) {}
};

// Γ1 + Γ2: shared names must agree on their scheme; multiplicities add.
CoreContext contextAdd(const CoreContext& a, const CoreContext& b);

struct CoreLintError : std::runtime_error {
  std::string rule;  // e.g. "L-VAR"
  SourceSpan span;
  CoreLintError(std::string r, const std::string& msg, SourceSpan s = {})
      : std::runtime_error(msg), rule(std::move(r)), span(std::move(s)) {}
};

// Type of `e` under Γ; every linear binding of Γ and every linear binder
// inside `e` must be used exactly once. Type variables in `rigid` are in
// scope. Throws CoreLintError.
TypeP coreTypecheck(const CoreEnv& env, const CoreContext& ctx, const CoreP& e,
                    const std::vector<std::string>& rigid = {});

// Checks a declaration's body against its scheme.
void coreLintDecl(const CoreEnv& env, const CoreDecl& d);

// Rewrites nested constructor patterns into cascades of single-level cases.
// Field multiplicities come from the constructor signatures in `env`.
CoreP flattenPatterns(const CoreEnv& env, const CoreP& e);

// Structural equality (binder names included).
bool coreEq(const CoreP& a, const CoreP& b);

std::string printCoreType(const TypeP& t);
std::string printCore(const CoreP& e);
std::string printCoreDecl(const CoreDecl& d);

// ---------------------------------------------------------------------------
// Runtime

struct RuntimeFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Value;
using ValueP = std::shared_ptr<const Value>;
struct Env;
using EnvP = std::shared_ptr<const Env>;

struct Value {
  enum class K { Con, Closure, Token, Array, Pack, Prim, Int, Str };
  K k = K::Con;
  std::string name;  // Con name, Token class, Prim name
  std::vector<ValueP> fields;  // Con fields, Pack {evidence, payload}, Prim collected args
  int arity = 0;     // Prim/constructor function arity
  bool ctorFn = false;
  long long ival = 0;  // Int value, Array window id
  std::string sval;
  std::string param;  // Closure
  CoreP body;
  EnvP env;
};

struct Env {
  std::string name;
  ValueP value;
  EnvP next;
};

ValueP vInt(long long v);
ValueP vCon(const std::string& k, std::vector<ValueP> fields = {});
ValueP vToken(const std::string& cls);
ValueP vArray(int id);
ValueP vPack(ValueP ev, ValueP payload);
ValueP vUnit();

// Arrays are windows onto backing vectors. Slicing suspends the parent
// window until both halves are released.
class Store {
 public:
  int allocate(std::vector<long long> contents);
  long long read(int id, long long i);
  void write(int id, long long i, long long v);
  void free(int id);
  long long length(int id);
  std::pair<int, int> slice(int id, long long k);
  void release(int left, int right);
  // Checked read of a whole window.
  std::vector<long long> readAll(int id);
  // Unchecked view of a window, for inspection after a run.
  std::vector<long long> contents(int id) const;

  // Windows that were neither freed nor released.
  std::vector<int> leaked() const;
  const std::vector<std::string>& faults() const { return faults_; }
  int windowCount() const { return static_cast<int>(windows_.size()); }

  bool operator==(const Store& o) const;

  // Records a fault in the ledger and throws RuntimeFault.
  [[noreturn]] void fault(const std::string& msg);

 private:
  struct Window {
    int backing;
    long long offset, length;
    int parent = -1;
    bool live = true;       // not freed and not released
    bool suspended = false;
    bool freed = false;
  };
  std::vector<std::vector<long long>> backings_;
  std::vector<Window> windows_;
  std::vector<std::string> faults_;

  Window& access(int id, const char* op);
};

class Evaluator;

struct PrimCall {
  std::vector<ValueP> args;
  Evaluator& ev;
  Store& store;
  TypeP resultEvidence;  // evidence type of an existential result, if any
};

struct PrimImpl {
  int arity = 0;
  std::function<ValueP(PrimCall&)> fn;
  TypeP resultEvidence;
};

using PrimTable = std::map<std::string, PrimImpl>;

class Evaluator {
 public:
  Evaluator(const CoreEnv& env, const std::vector<CoreDecl>& decls, const PrimTable& prims,
            Store& store);

  ValueP global(const std::string& name);
  ValueP eval(const CoreP& e, const EnvP& env);
  ValueP apply(const ValueP& f, const ValueP& x);
  Store& store() { return store_; }
  const PrimTable& prims() const { return prims_; }

 private:
  const CoreEnv& env_;
  std::map<std::string, const CoreDecl*> decls_;
  std::map<std::string, ValueP> cache_;
  std::set<std::string> evaluating_;
  const PrimTable& prims_;
  Store& store_;
  int depth_ = 0;

  bool match(const CorePat& p, const ValueP& v, EnvP& env);
};

// Builds an evidence value whose shape follows an evidence type.
ValueP evidenceValue(const TypeP& evType);

// Renders values the way `run` prints them: Ur is transparent, lists print
// as [1,2,3], tuples as (a, b).
std::string showValue(const ValueP& v);
bool valueEq(const ValueP& a, const ValueP& b);

}  // namespace linck
