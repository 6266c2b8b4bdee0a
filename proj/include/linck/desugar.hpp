#pragma once

// Elaboration of typing derivations into the evidence-passing core.
//
// A constraint Q becomes an evidence type: unrestricted atoms first (each as
// Ur #C args), then linear copies (#C args), paired right-nested, () for ε.
// Every scheme ∀ā. Q =o τ becomes ∀ā. ⟦Q⟧ -o ⟦τ⟧.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "linck/corecalc.hpp"
#include "linck/typing.hpp"

namespace linck {

struct DesugarError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoDerivation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One slot of an evidence tuple.
struct EvidenceSlot {
  Atom atom;
  bool unrestricted = false;
};

// Slots of ⟦Q⟧ in tuple order.
std::vector<EvidenceSlot> evidenceLayout(const SimpleConstraint& q);
TypeP evidenceType(const SimpleConstraint& q);
TypeP evidenceType(const std::vector<EvidenceSlot>& layout);
TypeP atomEvidenceType(const Atom& a);

TypeP translateType(const TypeP& t);
Scheme translateScheme(const Scheme& s);

// Names of the duplication and discard primitives for a duplicable class.
std::string dupPrimName(const std::string& cls);
std::string disPrimName(const std::string& cls);

// Core signatures for everything in a global environment: constructors,
// globals with bodies, body-less globals as primitives, and dup/dis for
// every duplicable class.
CoreEnv coreEnvFrom(const GlobalEnv& env);

// ---------------------------------------------------------------------------
// Planning: which given supplies each wanted evidence slot.

struct EvidenceComponent {
  Atom atom;
  bool unrestricted = false;
  bool duplicable = false;
  std::string var;  // bound by opening the level
};

// A scope that receives evidence: the declaration itself, an unpack, a
// local signature, or a qualified-type introduction.
struct EvidenceLevel {
  std::string var;  // the evidence parameter
  TypeP type;
  std::vector<EvidenceComponent> comps;
};

struct EvidenceSource {
  int level = -1;
  int comp = -1;
  bool wrapUr = false;  // an unrestricted given supplying an unrestricted wanted
};

struct ElaborationPlan {
  std::vector<EvidenceLevel> levels;                       // levels[0] is the declaration
  std::map<const DNode*, int> levelOf;                     // Unpack, LetSig, QIntro
  std::map<const DNode*, std::vector<EvidenceSource>> sources;  // Var, QElim, Pack
  std::map<const DNode*, std::vector<EvidenceSlot>> wanted;     // layout of each wanted tuple
};

// Evidence layouts are read off core types, so planning walks the same
// bidirectional translation that desugarDerivation replays.
ElaborationPlan planElaboration(const GlobalEnv& env, const CoreEnv& cenv,
                                const TypingDerivation& deriv);

// The core body of a declaration, before pattern flattening.
CoreP desugarDerivation(const GlobalEnv& env, const CoreEnv& cenv, const TypingDerivation& deriv,
                        const ElaborationPlan& plan);

// Full elaboration of one declaration: plan, translate, flatten.
CoreDecl desugarDecl(const GlobalEnv& env, const CoreEnv& cenv, const TypingDerivation& deriv);

// ---------------------------------------------------------------------------
// Standalone evidence functions

// A closed core function of type ⟦q1⟧ -o ⟦q2⟧. Throws NoDerivation when q1
// does not entail q2.
CoreP entailmentEvidence(const SimpleConstraint& q1, const SimpleConstraint& q2,
                         const DuplicableSet& d);

// Turns e : ⟦ω·q⟧ into a term of type Ur ⟦q⟧.
CoreP urCoerce(const CoreP& e, const SimpleConstraint& q);

// Rewrites the term so the linear variable v of a duplicable class is used
// exactly once on every path, inserting dup and dis calls.
CoreP shareEvidence(const std::string& v, const Atom& a, const CoreP& t);

}  // namespace linck
