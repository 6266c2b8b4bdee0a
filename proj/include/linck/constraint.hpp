#pragma once

// Multiplicities, types, atomic constraints and simple constraints (U, L).

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace linck {

enum class Mult { One, Many };

Mult multAdd(Mult a, Mult b);
Mult multMul(Mult a, Mult b);
std::string multStr(Mult m);  // "1" or "w"

struct Type;
using TypeP = std::shared_ptr<const Type>;

// An atomic constraint: a class name applied to resolved types.
struct Atom {
  std::string cls;
  std::vector<TypeP> args;

  Atom() = default;
  Atom(std::string c, std::vector<TypeP> a = {});

  const std::string& key() const { return key_; }  // printed form, "Read n"
  bool operator<(const Atom& o) const;
  bool operator==(const Atom& o) const { return cls == o.cls && argKey_ == o.argKey_; }

 private:
  std::string argKey_;
  std::string key_;
};

// Q = (U, L). U is a set, L a multiset stored as atom -> positive count.
struct SimpleConstraint {
  std::set<Atom> U;
  std::map<Atom, int> L;

  static SimpleConstraint eps() { return {}; }
  static SimpleConstraint atom(Mult m, const Atom& q);

  bool isEps() const { return U.empty() && L.empty(); }
  int linearCount(const Atom& q) const;
  bool hasUnrestricted(const Atom& q) const { return U.count(q) > 0; }
  bool mentions(const Atom& q) const { return hasUnrestricted(q) || linearCount(q) > 0; }
  void addLinear(const Atom& q, int n = 1);
  // All atoms mentioned, in canonical order, without duplicates.
  std::vector<Atom> atoms() const;
  int size() const;  // |U| + sum of linear counts

  bool operator==(const SimpleConstraint& o) const { return U == o.U && L == o.L; }
};

using DupPred = std::function<bool(const std::string&)>;

// The duplicable set D. Linearly is always a member.
struct DuplicableSet {
  std::set<std::string> members{"Linearly"};
  bool contains(const std::string& cls) const { return members.count(cls) > 0; }
  bool contains(const Atom& q) const { return contains(q.cls); }
};

SimpleConstraint scaleSimple(Mult m, const SimpleConstraint& q);
SimpleConstraint tensor(const SimpleConstraint& a, const SimpleConstraint& b);

struct UnboundTypeVariable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using TypeSubst = std::map<std::string, TypeP>;
// Rewrites every atom argument. Throws UnboundTypeVariable on an unmapped
// variable unless `partial` is set, in which case unmapped names are kept.
SimpleConstraint substituteSimple(const SimpleConstraint& q, const TypeSubst& s,
                                  bool partial = false);
Atom substituteAtom(const Atom& a, const TypeSubst& s, bool partial = false);

bool entailsSimple(const SimpleConstraint& given, const SimpleConstraint& wanted,
                   const DuplicableSet& d);

SimpleConstraint meet(const SimpleConstraint& a, const SimpleConstraint& b,
                      const DuplicableSet& d);

enum class FailKind { Multiplicity, Ambiguity, Unsolved };
std::string failKindStr(FailKind k);

struct DiffFailure {
  FailKind kind;
  Atom atom;
};

struct DiffResult {
  std::optional<SimpleConstraint> out;
  std::optional<DiffFailure> failure;
  bool ok() const { return out.has_value(); }
};

// Qi \ Qb ~> Qo.
DiffResult diff(const SimpleConstraint& qi, const SimpleConstraint& qb, const DuplicableSet& d);

// Debug text form: "eps", "1.q", "w.q", "Q1 * Q2".
std::string showSimple(const SimpleConstraint& q);

// Optional shuffling of atom processing order in meet/diff, used by the
// determinism stress tests. Zero disables it.
void setAtomOrderSeed(unsigned seed);
unsigned atomOrderSeed();
std::vector<Atom> processingOrder(std::vector<Atom> atoms);

}  // namespace linck
