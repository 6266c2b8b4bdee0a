#pragma once

// Wanted constraints: C ::= Q | C * C | C & C | pi.(Q =o C)

#include <memory>
#include <string>

#include "linck/constraint.hpp"
#include "linck/span.hpp"

namespace linck {

struct Wanted;
using WantedP = std::shared_ptr<const Wanted>;

struct Wanted {
  enum class K { Simple, Tensor, With, Impl };
  K k = K::Simple;
  SimpleConstraint q;  // Simple: the constraint; Impl: the given
  Mult mult = Mult::One;
  WantedP left;   // Tensor/With left; Impl body
  WantedP right;  // Tensor/With right
  // Simple: the site that emitted the atoms. Impl: the construct that
  // introduced the implication, used as blame for diff failures.
  SourceSpan span;
};

WantedP wSimple(SimpleConstraint q, SourceSpan span = {});
WantedP wEps();
WantedP wTensor(WantedP a, WantedP b);
WantedP wWith(WantedP a, WantedP b);
WantedP wImpl(Mult m, SimpleConstraint given, WantedP body, SourceSpan span = {});

WantedP scaleWanted(Mult m, const WantedP& c);
WantedP substituteWanted(const WantedP& c, const TypeSubst& s);

bool wantedEq(const WantedP& a, const WantedP& b);
std::string showWanted(const WantedP& c);

struct WantedParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parses the debug text form, e.g. "1.(w.q =o 1.(1.q =o 1.q))".
WantedP parseWanted(const std::string& text);
SimpleConstraint parseSimple(const std::string& text);

// Bounded search for a derivation of Q |- C over the declarative rules
// (domination, identity, tensor, with, implication). A true answer is sound;
// false may be an artifact of the bound. Test-only.
bool oracleEntails(const SimpleConstraint& q, const WantedP& c, const DuplicableSet& d,
                   int depthBound = 4);

}  // namespace linck
