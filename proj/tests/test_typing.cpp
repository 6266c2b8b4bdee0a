#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "linck/solver.hpp"
#include "linck/typing.hpp"

using namespace linck;
using th::operator*;

namespace {

std::string readFile(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const SurfaceProgram& prelude() {
  static SurfaceProgram p =
      parseProgram(readFile(std::string(LINCK_SOURCE_DIR) + "/prelude/prelude.lq"), "prelude.lq");
  return p;
}

struct Checked {
  SurfaceProgram prog;
  GlobalEnv env;
  std::vector<DeclResult> results;

  const DeclResult& get(const std::string& name) const {
    for (const auto& r : results)
      if (r.name == name) return r;
    throw std::runtime_error("no declaration " + name);
  }
};

Checked checkText(const std::string& text) {
  Checked c;
  c.prog = parseProgram(text, "test.lq");
  c.env = buildGlobalEnv({&prelude(), &c.prog});
  c.results = checkProgram(c.prog, c.env);
  return c;
}

bool accepted(const DeclResult& r) { return r.deriv.has_value(); }

TypeError::Kind errorKind(const DeclResult& r) {
  REQUIRE(r.error.has_value());
  return r.error->kind;
}

// Walks a derivation and checks every binder's recorded usage against its
// multiplicity by recounting variable occurrences.
void countUses(const DNodeP& n, std::map<std::string, int>& counts, int scale) {
  if (n->rule == Rule::Var && !n->key.empty()) counts[n->key] += scale;
  for (size_t i = 0; i < n->kids.size(); ++i) {
    int s = scale;
    if (n->rule == Rule::App && i == 1 && n->mult == Mult::Many) s = 2 * scale;
    if ((n->rule == Rule::Case || n->rule == Rule::Let || n->rule == Rule::LetSig) && i == 0 &&
        n->mult == Mult::Many)
      s = 2 * scale;
    countUses(n->kids[i], counts, s);
  }
}

void auditBinders(const DNodeP& n) {
  auto binderOk = [&](const std::string& key, Mult m, const DNodeP& scope) {
    if (m == Mult::Many) return;
    std::map<std::string, int> c;
    countUses(scope, c, 1);
    // Case branches are audited separately, so only assert linear binders
    // are never scaled.
    CHECK(c[key] <= 1);
  };
  switch (n->rule) {
    case Rule::Abs: binderOk(n->key, n->mult, n->kids[0]); break;
    case Rule::Unpack: binderOk(n->key, Mult::One, n->kids[1]); break;
    case Rule::Let:
    case Rule::LetSig: binderOk(n->key, n->mult, n->kids[1]); break;
    default: break;
  }
  if (n->rule != Rule::Var) CHECK(n->usage.count(n->key) == 0);
  for (const auto& k : n->kids) auditBinders(k);
}

}  // namespace

TEST_CASE("identity is accepted and uses its argument once") {
  auto c = checkText("id :: forall a. a -o a\nid = \\x -> x\n");
  const auto& r = c.get("id");
  REQUIRE(accepted(r));
  const auto& root = r.deriv->root;
  CHECK(root->rule == Rule::Abs);
  CHECK(root->mult == Mult::One);
  REQUIRE(root->kids.size() == 1);
  CHECK(root->kids[0]->usage.at(root->key) == Use::One);
  CHECK(wantedEq(generateConstraints(*r.deriv), wEps()));
}

TEST_CASE("duplicating a linear argument is a linearity error") {
  auto c = checkText("dupl :: forall a. a -o (a, a)\ndupl = \\x -> (x, x)\n");
  CHECK(errorKind(c.get("dupl")) == TypeError::Kind::Linearity);
}

TEST_CASE("unrestricted arguments may be dropped or duplicated") {
  auto c = checkText(
      "k :: forall a b. a -o b -> a\nk = \\x -> \\y -> x\n"
      "two :: forall a. a -> (a, a)\ntwo = \\x -> (x, x)\n");
  CHECK(accepted(c.get("k")));
  CHECK(accepted(c.get("two")));
  auto d = checkText("drop :: forall a b. a -o b -o a\ndrop = \\x -> \\y -> x\n");
  CHECK(errorKind(d.get("drop")) == TypeError::Kind::Linearity);
}

TEST_CASE("mismatch, unknown names and arity") {
  auto c = checkText(
      "bad :: Int\nbad = True\n"
      "unk :: Int\nunk = nope\n"
      "ar :: Int\nar = (+) 1 2 3\n");
  CHECK(errorKind(c.get("bad")) == TypeError::Kind::Mismatch);
  CHECK(errorKind(c.get("unk")) == TypeError::Kind::UnknownName);
  CHECK(errorKind(c.get("ar")) == TypeError::Kind::Arity);
  CHECK(std::string(c.get("bad").error->what()).find("Bool") != std::string::npos);
}

TEST_CASE("branches must agree on linear variables") {
  auto c = checkText(
      "f :: Bool -> Int -o Int\n"
      "f b x = if b then x else 0\n");
  CHECK(errorKind(c.get("f")) == TypeError::Kind::Linearity);
  // A linear variable passed to an unrestricted argument counts as many uses.
  auto e = checkText(
      "dbl :: Int -> Int\ndbl x = x + x\n"
      "h :: Bool -> Int -o Int\nh b x = if b then x else dbl x\n");
  CHECK(errorKind(e.get("h")) == TypeError::Kind::Linearity);
  auto d = checkText(
      "g :: Bool -> Int -o Int\n"
      "g b x = if b then x else x\n");
  CHECK(accepted(d.get("g")));
}

TEST_CASE("constraint of free applied to an array") {
  auto c = checkText(
      "useFree :: forall a s7. UArray a s7 -> ()\n"
      "useFree arr = free arr\n");
  const auto& r = c.get("useFree");
  REQUIRE(accepted(r));
  // Body is App(Var free, arr) under the lambda.
  const DNodeP& app = r.deriv->root->kids[0];
  REQUIRE(app->rule == Rule::App);
  WantedP w = generateConstraints(app);
  SimpleConstraint expected = th::one(th::atom("Read", "s7")) * th::one(th::atom("Write", "s7"));
  WantedP want = wTensor(wSimple(expected), scaleWanted(Mult::Many, wEps()));
  CHECK(wantedEq(w, want));
}

TEST_CASE("dithering generates a with of the two branches") {
  auto c = checkText(
      "dithering :: RW n =o Bool -> UArray Int n -> ()\n"
      "dithering x arr = if x then free arr else ()\n");
  const auto& r = c.get("dithering");
  REQUIRE(accepted(r));
  const DNodeP body = r.deriv->root->kids[0]->kids[0];
  REQUIRE(body->rule == Rule::Case);
  WantedP w = generateConstraints(body);
  REQUIRE(w->k == Wanted::K::Tensor);
  CHECK(wantedEq(w->left, scaleWanted(Mult::Many, wEps())));
  REQUIRE(w->right->k == Wanted::K::With);
  SimpleConstraint rw = th::one(th::atom("Read", "n")) * th::one(th::atom("Write", "n"));
  // The free branch is App(free, arr).
  WantedP freeBranch = generateConstraints(body->kids[1]);
  CHECK(freeBranch->k == Wanted::K::Tensor);
  CHECK(wantedEq(freeBranch->left, wSimple(rw)));
  CHECK(wantedEq(w->right->right, wEps()));
  // Downstream the solver rejects it.
  GlobalEnv& env = c.env;
  auto res = checkTopLevel(r.deriv->sig.q, generateConstraints(*r.deriv), env.dset, r.span);
  CHECK_FALSE(res.solved);
}

TEST_CASE("single-branch case generates the branch constraint") {
  auto c = checkText(
      "fst1 :: forall a. (a, Ur Int) -o a\n"
      "fst1 p = case @1 p of { (x, Ur y) -> x }\n");
  const auto& r = c.get("fst1");
  REQUIRE(accepted(r));
  const DNodeP body = r.deriv->root->kids[0];
  REQUIRE(body->rule == Rule::Case);
  CHECK(wantedEq(generateConstraints(body), wTensor(wEps(), wEps())));
}

TEST_CASE("the const examples pass the checker; solving tells them apart") {
  auto c = checkText(R"(
const :: forall a b. a -o b -> a
const x y = x
notNeglecting :: RW n =o UArray a n -> ()
notNeglecting arr = const (free arr) ()
neglecting :: RW n =o UArray a n -> ()
neglecting arr = const () (free arr)
indulging :: RW n =o UArray a n -> ((), ())
indulging arr = (free arr, free arr)
)");
  for (const auto& r : c.results) {
    INFO(r.name);
    REQUIRE(accepted(r));
  }
  auto solves = [&](const std::string& n) {
    const auto& r = c.get(n);
    return checkTopLevel(r.deriv->sig.q, generateConstraints(*r.deriv), c.env.dset, r.span).solved;
  };
  CHECK(solves("notNeglecting"));
  CHECK_FALSE(solves("neglecting"));
  CHECK_FALSE(solves("indulging"));
}

TEST_CASE("instantiateScheme") {
  int next = 0;
  Scheme id;
  id.vars = {"a"};
  id.body = tArrow(Mult::One, tVar("a"), tVar("a"));
  auto i = instantiateScheme(id, std::nullopt, next);
  CHECK(next == 1);
  CHECK(typeEq(i.type, tArrow(Mult::One, tMeta(0), tMeta(0))));
  CHECK(i.q.isEps());

  Scheme rd = parseScheme("Read n =o UArray a n -> Int -> Ur a * Read n");
  rd.vars = {"n", "a"};
  auto j = instantiateScheme(rd, std::vector<TypeP>{tVar("s7"), tVar("a")}, next);
  CHECK(j.q == th::one(th::atom("Read", "s7")));
  CHECK(typeEq(j.type, parseType("UArray a s7 -> Int -> Ur a * Read s7")));

  Scheme mono;
  mono.body = tInt();
  auto k = instantiateScheme(mono, std::nullopt, next);
  CHECK(k.subst.empty());
  CHECK(typeEq(k.type, tInt()));

  CHECK_THROWS_AS(instantiateScheme(id, std::vector<TypeP>{}, next), TypeError);
}

TEST_CASE("existentials, do-notation and local signatures") {
  auto c = checkText(R"(
make :: Linearly =o Ur Int
make = Linearly.do {
  Ur arr <- new 3;
  write arr 0 5;
  Ur x <- read arr 0;
  free arr;
  Linearly.return (Ur x)
  }

local :: RW n =o UArray Int n -> () * RW n
local arr = Linearly.do {
  let @w w :: RW n =o Int -> () * RW n = \i -> write arr i 1;
  w 0;
  w 1
  }

escape :: Linearly =o Int
escape = length (Linearly.do { Ur arr <- new 3; Linearly.return arr })
)");
  CHECK(accepted(c.get("make")));
  CHECK(accepted(c.get("local")));
  REQUIRE(c.get("escape").error.has_value());
  CHECK(std::string(c.get("escape").error->what()).find("escapes") != std::string::npos);
  for (const auto& n : {"make", "local"}) {
    const auto& r = c.get(n);
    REQUIRE(accepted(r));
    auto res = checkTopLevel(r.deriv->sig.q, generateConstraints(*r.deriv), c.env.dset, r.span);
    INFO(n);
    CHECK(res.solved);
  }
}

TEST_CASE("prelude helpers typecheck and solve") {
  SurfaceProgram empty;
  GlobalEnv env = buildGlobalEnv({&prelude(), &empty});
  auto results = checkProgram(prelude(), env, true);
  CHECK(results.size() == 3);
  for (const auto& r : results) {
    INFO(r.name << ": " << (r.error ? r.error->what() : "ok"));
    REQUIRE(accepted(r));
    auto res = checkTopLevel(r.deriv->sig.q, generateConstraints(*r.deriv), env.dset, r.span);
    CHECK(res.solved);
  }
}

TEST_CASE("checking is deterministic") {
  const char* text = R"(
make :: Linearly =o Ur Int
make = Linearly.do { Ur arr <- new 3; Ur x <- read arr 0; free arr; Linearly.return (Ur x) }
)";
  auto a = checkText(text);
  auto b = checkText(text);
  WantedP wa = generateConstraints(*a.get("make").deriv);
  WantedP wb = generateConstraints(*b.get("make").deriv);
  CHECK(showWanted(wa) == showWanted(wb));
  CHECK(wantedEq(wa, wb));
}

TEST_CASE("binder usage is consistent with multiplicities") {
  auto c = checkText(R"(
make :: Linearly =o Ur Int
make = Linearly.do { Ur arr <- new 3; Ur x <- read arr 0; free arr; Linearly.return (Ur x) }
k :: forall a b. a -o b -> a
k = \x -> \y -> x
)");
  for (const auto& r : c.results) {
    REQUIRE(accepted(r));
    auditBinders(r.deriv->root);
    CHECK(r.deriv->root->usage.empty());
  }
}
