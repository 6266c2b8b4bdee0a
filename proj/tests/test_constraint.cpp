#include <random>

#include "doctest.h"
#include "helpers.hpp"

using namespace linck;
using namespace th;

namespace {
const Atom p = atom("p");
const Atom q = atom("q");
const Atom r = atom("r");
}  // namespace

TEST_CASE("multiplicity tables") {
  CHECK(multAdd(Mult::One, Mult::One) == Mult::Many);
  CHECK(multAdd(Mult::One, Mult::Many) == Mult::Many);
  CHECK(multAdd(Mult::Many, Mult::Many) == Mult::Many);
  CHECK(multMul(Mult::One, Mult::One) == Mult::One);
  CHECK(multMul(Mult::Many, Mult::One) == Mult::Many);
  CHECK(multMul(Mult::One, Mult::Many) == Mult::Many);
}

TEST_CASE("semiring laws over all pairs and triples") {
  const Mult all[] = {Mult::One, Mult::Many};
  for (Mult a : all)
    for (Mult b : all) {
      CHECK(multAdd(a, b) == multAdd(b, a));
      CHECK(multMul(a, b) == multMul(b, a));
      CHECK(multMul(Mult::One, a) == a);
      for (Mult c : all) {
        CHECK(multAdd(multAdd(a, b), c) == multAdd(a, multAdd(b, c)));
        CHECK(multMul(multMul(a, b), c) == multMul(a, multMul(b, c)));
        CHECK(multMul(a, multAdd(b, c)) == multAdd(multMul(a, b), multMul(a, c)));
      }
    }
}

TEST_CASE("scaleSimple examples") {
  SimpleConstraint pq;
  pq.U.insert(p);
  pq.addLinear(q);
  CHECK(scaleSimple(Mult::One, pq) == pq);
  CHECK(scaleSimple(Mult::Many, one(q)) == many(q));
  SimpleConstraint pqq = pq;
  pqq.addLinear(q);
  SimpleConstraint expect;
  expect.U = {p, q};
  CHECK(scaleSimple(Mult::Many, pqq) == expect);
}

TEST_CASE("tensor examples and laws") {
  SimpleConstraint qq;
  qq.addLinear(q, 2);
  CHECK(tensor(one(q), one(q)) == qq);
  CHECK(tensor(many(q), many(q)) == many(q));
  auto all = allSimple({"p", "q"}, 1);
  for (const auto& a : all) {
    CHECK(tensor(eps(), a) == a);
    CHECK(scaleSimple(Mult::Many, scaleSimple(Mult::Many, a)) == scaleSimple(Mult::Many, a));
    for (const auto& b : all) {
      CHECK(tensor(a, b) == tensor(b, a));
      CHECK(scaleSimple(Mult::Many, tensor(a, b)) ==
            tensor(scaleSimple(Mult::Many, a), scaleSimple(Mult::Many, b)));
    }
  }
}

TEST_CASE("substituteSimple") {
  SimpleConstraint rw = one(atom("RW", "n"));
  CHECK(substituteSimple(rw, {{"n", tVar("s7")}}) == one(atom("RW", "s7")));
  CHECK(substituteSimple(eps(), {{"n", tVar("p")}}) == eps());
  SimpleConstraint rdwr = many(atom("Read", "n")) * one(atom("Write", "n"));
  CHECK(substituteSimple(rdwr, {{"n", tVar("p")}}) ==
        many(atom("Read", "p")) * one(atom("Write", "p")));
  CHECK_THROWS_AS(substituteSimple(rw, {}), UnboundTypeVariable);
}

TEST_CASE("entailsSimple examples") {
  auto d = dset({"q"});
  auto none = dset({});
  CHECK(entailsSimple(one(q), one(q), none));
  CHECK(entailsSimple(one(q), one(q) * one(q), d));
  CHECK_FALSE(entailsSimple(one(q), eps(), none));
  CHECK(entailsSimple(many(q), one(q), none));
  CHECK(entailsSimple(many(q), eps(), none));
  CHECK_FALSE(entailsSimple(one(q), many(q), d));
  CHECK_FALSE(entailsSimple(one(q), one(q) * one(q), none));
}

TEST_CASE("entailsSimple agrees with literal rule search") {
  auto all = allSimple({"p", "q"}, 2);
  for (auto d : {dset({}), dset({"q"}), dset({"p", "q"})})
    for (const auto& a : all)
      for (const auto& b : all) {
        INFO(showSimple(a), " |- ", showSimple(b));
        CHECK(entailsSimple(a, b, d) == entailsByRules(a, b, d));
      }
}

TEST_CASE("meet examples") {
  auto d = dset({"q"});
  auto none = dset({});
  CHECK(meet(one(q), one(q), none) == one(q));
  SimpleConstraint pqU;
  pqU.U = {p, q};
  CHECK(meet(many(p), many(q), none) == pqU);
  CHECK(meet(one(q), eps(), none) == many(q));
  CHECK(meet(one(q), eps(), d) == one(q));
}

TEST_CASE("meet is sound and order independent") {
  std::mt19937 rng(7);
  std::vector<std::string> names{"p", "q", "r"};
  for (int i = 0; i < 500; ++i) {
    auto d = randomD(rng, names);
    auto a = randomSimple(rng, names, 2), b = randomSimple(rng, names, 2);
    auto m = meet(a, b, d);
    CHECK(entailsSimple(m, a, d));
    CHECK(entailsSimple(m, b, d));
    CHECK(meetByRules(a, b, d, rng) == m);
    CHECK(meet(b, a, d) == m);
  }
}

TEST_CASE("diff examples") {
  auto none = dset({});
  auto r1 = diff(one(q), one(q), none);
  REQUIRE(r1.ok());
  CHECK(*r1.out == eps());

  SimpleConstraint qq;
  qq.addLinear(q, 2);
  auto r2 = diff(qq, one(q), none);
  REQUIRE_FALSE(r2.ok());
  CHECK(r2.failure->kind == FailKind::Multiplicity);
  CHECK(r2.failure->atom == q);

  auto r3 = diff(one(q) * many(q), many(q), none);
  REQUIRE(r3.ok());
  CHECK(*r3.out == eps());

  auto r4 = diff(one(q), one(q) * one(q), none);
  REQUIRE_FALSE(r4.ok());
  CHECK(r4.failure->kind == FailKind::Ambiguity);

  auto r5 = diff(eps(), one(q), none);
  REQUIRE_FALSE(r5.ok());
  CHECK(r5.failure->kind == FailKind::Multiplicity);

  auto d = dset({"q"});
  auto r6 = diff(qq * one(p), one(q), d);
  REQUIRE(r6.ok());
  CHECK(*r6.out == one(p));
  CHECK_FALSE(diff(many(q), one(q), d).ok());
}

TEST_CASE("diff is sound and order independent") {
  std::mt19937 rng(11);
  std::vector<std::string> names{"p", "q", "r"};
  int successes = 0;
  for (int i = 0; i < 2000; ++i) {
    auto d = randomD(rng, names);
    auto qi = randomSimple(rng, names, 2), qb = randomSimple(rng, names, 1);
    auto res = diff(qi, qb, d);
    setAtomOrderSeed(1 + i);
    auto shuffled = diff(qi, qb, d);
    setAtomOrderSeed(0);
    CHECK(res.ok() == shuffled.ok());
    if (!res.ok()) continue;
    ++successes;
    CHECK(*shuffled.out == *res.out);
    CHECK(entailsSimple(tensor(*res.out, qb), qi, d));
  }
  CHECK(successes > 100);
}

TEST_CASE("showSimple text form") {
  CHECK(showSimple(eps()) == "eps");
  CHECK(showSimple(one(q)) == "1.q");
  CHECK(showSimple(many(q)) == "w.q");
  CHECK(showSimple(one(p) * many(q)) == "1.p * w.q");
  CHECK(showSimple(one(atom("Read", "n"))) == "1.Read n");
}
