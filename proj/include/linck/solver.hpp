#pragma once

#include <string>
#include <vector>

#include "linck/constraint.hpp"
#include "linck/span.hpp"
#include "linck/wanted.hpp"

namespace linck {

struct SolverOutcome {
  bool solved = false;
  SimpleConstraint q;  // when solved: the demand placed on the environment
  FailKind kind = FailKind::Unsolved;
  Atom atom;
  SourceSpan blame;
};

// One line per rule application: "<RULE> <input> ~> <output>".
using SolverTrace = std::vector<std::string>;

SolverOutcome solve(const WantedP& c, const DuplicableSet& d, SolverTrace* trace = nullptr);

// Succeeds iff 1.(Qg =o C) solves to eps. `site` is blamed for failures of
// the outermost implication.
SolverOutcome checkTopLevel(const SimpleConstraint& qg, const WantedP& c, const DuplicableSet& d,
                            const SourceSpan& site = {}, SolverTrace* trace = nullptr);

// Leftover-threading solver: tensor children run left to right, linear
// givens are used innermost first, and an atom given both linearly and
// unrestrictedly is ambiguous. Only used for differential testing.
SolverOutcome solveStateStyle(const WantedP& c, const DuplicableSet& d);
SolverOutcome checkTopLevelStateStyle(const SimpleConstraint& qg, const WantedP& c,
                                      const DuplicableSet& d, const SourceSpan& site = {});

std::string explainFailure(const SolverOutcome& o);

}  // namespace linck
