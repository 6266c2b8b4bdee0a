#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "linck/solver.hpp"

using namespace linck;
using namespace th;

namespace {
const Atom q = atom("q");
const Atom p = atom("p");
}  // namespace

TEST_CASE("solver examples") {
  auto none = dset({});
  auto s1 = solve(wSimple(one(q)), none);
  REQUIRE(s1.solved);
  CHECK(s1.q == one(q));

  auto s2 = solve(wImpl(Mult::One, one(q), wSimple(one(q))), none);
  REQUIRE(s2.solved);
  CHECK(s2.q == eps());

  SourceSpan inner{"x.lq", 7, 3, 7, 9};
  auto nested = wImpl(Mult::One, one(q),
                      wImpl(Mult::One, one(q), wTensor(wSimple(one(q)), wSimple(one(q))), inner));
  auto s3 = solve(nested, none);
  REQUIRE_FALSE(s3.solved);
  CHECK(s3.kind == FailKind::Multiplicity);
  CHECK(s3.atom == q);
  CHECK(s3.blame == inner);

  auto s4 = solve(parseWanted("1.(w.q =o 1.(1.q =o 1.q))"), none);
  REQUIRE(s4.solved);
  CHECK(s4.q == eps());

  auto s5 = solve(wImpl(Mult::One, one(q) * one(q), wSimple(one(q))), none);
  REQUIRE_FALSE(s5.solved);
  CHECK(s5.kind == FailKind::Ambiguity);
}

TEST_CASE("checkTopLevel") {
  auto none = dset({});
  auto rw = one(atom("Read", "n")) * one(atom("Write", "n"));
  CHECK(checkTopLevel(rw, wSimple(rw), none).solved);
  auto twice = checkTopLevel(rw, wTensor(wSimple(rw), wSimple(rw)), none);
  REQUIRE_FALSE(twice.solved);
  CHECK(twice.kind == FailKind::Multiplicity);
  CHECK(checkTopLevel(eps(), wEps(), none).solved);
  auto residual = checkTopLevel(eps(), wSimple(one(p) * one(q)), none);
  REQUIRE_FALSE(residual.solved);
  CHECK(residual.kind == FailKind::Unsolved);
  CHECK(residual.atom == p);
}

TEST_CASE("blame picks the later of two distinct use sites") {
  auto none = dset({});
  SourceSpan a{"f.lq", 3, 5, 3, 12}, b{"f.lq", 4, 5, 4, 12}, impl{"f.lq", 2, 1, 2, 4};
  auto c = wImpl(Mult::One, one(q), wTensor(wSimple(one(q), b), wSimple(one(q), a)), impl);
  auto o = solve(c, none);
  REQUIRE_FALSE(o.solved);
  CHECK(o.blame == b);
}

TEST_CASE("state-style solver witnesses") {
  auto none = dset({});
  CHECK(solveStateStyle(parseWanted("1.(1.q =o 1.(1.q =o 1.q * 1.q))"), none).solved);
  auto f = solveStateStyle(parseWanted("1.(w.q =o 1.(1.q =o 1.q))"), none);
  CHECK_FALSE(f.solved);
  CHECK(f.kind == FailKind::Ambiguity);
  auto e = solveStateStyle(wEps(), none);
  CHECK(e.solved);
  CHECK(e.q.isEps());
}

TEST_CASE("explainFailure wording") {
  SolverOutcome o;
  o.atom = atom("RW", "n");
  o.kind = FailKind::Multiplicity;
  CHECK(explainFailure(o).find("used more than once") != std::string::npos);
  o.kind = FailKind::Ambiguity;
  CHECK(explainFailure(o).find("ambiguous") != std::string::npos);
  o.kind = FailKind::Unsolved;
  CHECK(explainFailure(o).find("could not be discharged") != std::string::npos);
}

TEST_CASE("solver soundness, symmetry and determinism on random constraints") {
  std::mt19937 rng(21);
  std::vector<std::string> names{"p", "q", "r"};
  int solved = 0;
  for (int i = 0; i < 600; ++i) {
    auto d = randomD(rng, names);
    auto c = randomWanted(rng, names, 3);
    auto o = solve(c, d);
    if (o.solved) {
      ++solved;
      INFO(showWanted(c), " ~> ", showSimple(o.q));
      CHECK(oracleEntails(o.q, c, d));
    }
    auto c2 = randomWanted(rng, names, 2);
    auto ab = solve(wTensor(c, c2), d), ba = solve(wTensor(c2, c), d);
    CHECK(ab.solved == ba.solved);
    if (ab.solved) CHECK(ab.q == ba.q);
    setAtomOrderSeed(100 + i);
    auto again = solve(c, d);
    setAtomOrderSeed(0);
    CHECK(again.solved == o.solved);
    if (o.solved) CHECK(again.q == o.q);
    else CHECK(again.kind == o.kind);

    auto st = solveStateStyle(c, d);
    if (st.solved) CHECK(oracleEntails(st.q, c, d));
  }
  CHECK(solved > 100);
}
