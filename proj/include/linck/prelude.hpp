#pragma once

// Runtime side of the prelude: implementations of the primitives declared
// without bodies in prelude.lq.

#include <string>
#include <vector>

#include "linck/corecalc.hpp"
#include "linck/typing.hpp"

namespace linck {

struct PrimSignature {
  std::string name;
  Scheme scheme;       // as declared in the prelude file
  int arity = 0;       // runtime arity, evidence argument included
  std::string effect;  // none, reads, writes, allocates, frees, borrows
};

// Signatures of every body-less prelude declaration, by name.
std::vector<PrimSignature> preludeSignatures(const GlobalEnv& env);

// Runtime implementations, keyed by primitive name. Result evidence types
// are taken from the core signatures in `cenv`.
PrimTable buildPrimTable(const CoreEnv& cenv);

// Mismatches between declared primitives and their implementations: missing
// implementations and arities that disagree with the core signature.
std::vector<std::string> checkPrimArities(const CoreEnv& cenv, const PrimTable& prims);

// Number of arrows along the spine of a core type.
int spineArity(const TypeP& t);

}  // namespace linck
