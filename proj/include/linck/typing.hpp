#pragma once

// Usage-counting bidirectional checker, typing derivations and constraint
// generation over them.

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "linck/surface.hpp"
#include "linck/wanted.hpp"

namespace linck {

struct TypeError : std::runtime_error {
  enum class Kind { Mismatch, Linearity, Arity, UnknownName, Other };
  Kind kind;
  SourceSpan span;
  TypeError(Kind k, const std::string& msg, SourceSpan s)
      : std::runtime_error(msg), kind(k), span(std::move(s)) {}
};

std::string typeErrorKindStr(TypeError::Kind k);

struct ClassInfo {
  int arity = 0;
  bool duplicable = false;
};

struct TypeConInfo {
  std::vector<std::string> params;
  std::vector<std::string> ctors;  // empty for abstract types
};

struct CtorInfo {
  std::string type;
  std::vector<std::string> params;
  std::vector<std::pair<Mult, TypeP>> fields;
};

struct GlobalInfo {
  Scheme sig;
  bool hasBody = false;
  bool fromPrelude = false;
  SourceSpan span;
};

// Everything declarations can refer to: prelude plus user program.
struct GlobalEnv {
  std::map<std::string, ClassInfo> classes;
  std::map<std::string, SynonymDecl> synonyms;
  std::map<std::string, TypeConInfo> types;
  std::map<std::string, CtorInfo> ctors;
  std::map<std::string, GlobalInfo> globals;
  DuplicableSet dset;
};

// Builds the environment and resolves every signature (synonym expansion,
// name and arity checks). Throws TypeError.
GlobalEnv buildGlobalEnv(const std::vector<const SurfaceProgram*>& programs);

// Expands constraint synonyms and checks class/type names in a scheme.
Scheme resolveScheme(const GlobalEnv& env, const Scheme& s, const SourceSpan& at);
TypeP resolveType(const GlobalEnv& env, const TypeP& t, const SourceSpan& at);

// ---------------------------------------------------------------------------
// Usage counting in {0, 1, ω}. Mixed marks case branches that disagree.

enum class Use { Zero, One, Many, Mixed };
using UsageMap = std::map<std::string, Use>;  // keyed by unique binder key

Use useAdd(Use a, Use b);
Use useScale(Mult m, Use u);
Use useJoin(Use a, Use b);
std::string useStr(Use u);

// ---------------------------------------------------------------------------
// Derivations

enum class Rule { Var, Ctor, QElim, Abs, App, Pack, PackId, Unpack, Case, Let, LetSig, QIntro, Lit };
std::string ruleStr(Rule r);

struct DNode;
using DNodeP = std::shared_ptr<DNode>;

struct DNode {
  Rule rule = Rule::Lit;
  SourceSpan span;
  TypeP type;  // zonked type of the node

  std::string name;  // Var/Ctor name; binder of Abs, Unpack, Let, LetSig
  std::string key;   // unique binder key (Abs, Unpack, Let, LetSig); Var: key of local
  enum class VarKind { Local, LocalScheme, Global };
  VarKind varKind = VarKind::Local;

  std::vector<TypeP> inst;  // Var/Ctor instantiation, Pack witnesses
  SimpleConstraint q;       // see ruleStr docs in typing.cpp
  Mult mult = Mult::One;    // binder, arrow or case multiplicity
  TypeP binderType;         // Abs/Let/LetSig binder, Unpack payload, Case scrutinee
  TypeP exType;             // Pack/Unpack existential type
  std::vector<std::string> skolems;  // Unpack binders, LetSig quantified variables
  std::optional<Scheme> sig;         // LetSig scheme (resolved)
  std::vector<Pattern> pats;         // Case: pattern of kids[i+1]
  SourceSpan implSpan;               // Unpack/LetSig/QIntro implication site

  long long ival = 0;
  std::string sval;
  bool isStr = false;

  std::vector<DNodeP> kids;
  UsageMap usage;
};

struct TypingDerivation {
  std::string name;
  Scheme sig;  // resolved
  DNodeP root;
  SourceSpan span;
  bool fromPrelude = false;
};

struct DeclResult {
  std::string name;
  SourceSpan span;
  std::optional<TypingDerivation> deriv;
  std::optional<TypeError> error;
};

// Checks every value declaration with a body. Abstract declarations (a
// signature without a body) produce no result.
std::vector<DeclResult> checkProgram(const SurfaceProgram& prog, const GlobalEnv& env,
                                     bool fromPrelude = false);

// Fresh unification variables come from `nextMeta`.
struct Instantiation {
  TypeP type;
  SimpleConstraint q;
  TypeSubst subst;
};
Instantiation instantiateScheme(const Scheme& s, const std::optional<std::vector<TypeP>>& args,
                                int& nextMeta);

WantedP generateConstraints(const DNodeP& node);
WantedP generateConstraints(const TypingDerivation& deriv);

}  // namespace linck
