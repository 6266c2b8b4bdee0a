#pragma once

// Types shared by the surface language, the checker and the constraint atoms.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "linck/constraint.hpp"

namespace linck {

struct Type {
  enum class K { Var, Meta, Con, Arrow, Exists, Qual };
  K k = K::Con;
  std::string name;               // Var, Con
  int meta = -1;                  // Meta
  std::vector<TypeP> args;        // Con args; Arrow {dom, cod}; Exists/Qual {body}
                                  // core existentials: {payload, evidence}
  Mult mult = Mult::One;          // Arrow
  std::vector<std::string> vars;  // Exists binders
  SimpleConstraint q;             // Exists payload constraint, Qual given
};

TypeP tVar(const std::string& n);
TypeP tMeta(int id);
TypeP tCon(const std::string& n, std::vector<TypeP> args = {});
TypeP tArrow(Mult m, TypeP dom, TypeP cod);
TypeP tExists(std::vector<std::string> vars, TypeP body, SimpleConstraint q);
TypeP tQual(SimpleConstraint q, TypeP body);
// Core-calculus existential: evidence type paired with a payload type.
TypeP tCoreExists(std::vector<std::string> vars, TypeP ev, TypeP payload);
TypeP tUnit();
TypeP tPair(TypeP a, TypeP b);
TypeP tUr(TypeP a);
TypeP tInt();
TypeP tBool();

std::string showType(const TypeP& t);

// Alpha-equivalence over Exists binders. Metas compare by id.
bool typeEq(const TypeP& a, const TypeP& b);

// Capture-avoiding substitution of rigid variables.
TypeP substType(const TypeP& t, const TypeSubst& s);

void freeTypeVars(const TypeP& t, std::set<std::string>& out);
void freeTypeVars(const SimpleConstraint& q, std::set<std::string>& out);
bool hasMeta(const TypeP& t);

// Scheme: forall vars. Q =o body.
struct Scheme {
  std::vector<std::string> vars;
  SimpleConstraint q;
  TypeP body;
};

std::string showScheme(const Scheme& s);

}  // namespace linck
