#include "doctest.h"
#include "linck/corecalc.hpp"

using namespace linck;

namespace {

CoreEnv listEnv() {
  CoreEnv env = baseCoreEnv();
  env.ctors["Ur"] = {"Ur", {"a"}, {{Mult::Many, tVar("a")}}};
  env.typeCtors["Ur"] = {"Ur"};
  env.ctors["Nil"] = {"List", {"a"}, {}};
  env.ctors["Cons"] = {"List", {"a"},
                       {{Mult::One, tVar("a")}, {Mult::One, tCon("List", {tVar("a")})}}};
  env.typeCtors["List"] = {"Nil", "Cons"};
  env.ctors["False"] = {"Bool", {}, {}};
  env.ctors["True"] = {"Bool", {}, {}};
  env.typeCtors["Bool"] = {"False", "True"};
  return env;
}

Scheme mono(TypeP t) { return Scheme{{}, {}, std::move(t)}; }

std::string lintRule(const CoreEnv& env, const CoreP& e, const CoreContext& ctx = {}) {
  try {
    coreTypecheck(env, ctx, e);
  } catch (const CoreLintError& err) {
    return err.rule;
  }
  return "";
}

}  // namespace

TEST_CASE("context addition") {
  CoreContext a{{"x", {Mult::One, mono(tInt())}}};
  CoreContext b{{"x", {Mult::One, mono(tInt())}}, {"y", {Mult::One, mono(tBool())}}};
  CoreContext s = contextAdd(a, b);
  CHECK(s.at("x").mult == Mult::Many);
  CHECK(s.at("y").mult == Mult::One);
  CHECK(contextAdd(a, {}).at("x").mult == Mult::One);

  CoreContext c{{"x", {Mult::One, mono(tBool())}}};
  CHECK_THROWS_AS(contextAdd(a, c), ContextClashError);

  // Addition is commutative on the examples.
  CoreContext s2 = contextAdd(b, a);
  CHECK(s2.at("x").mult == s.at("x").mult);
  CHECK(s2.size() == s.size());
}

TEST_CASE("lint: linear and unrestricted binders") {
  CoreEnv env = listEnv();
  TypeP a = tVar("a");
  // \x. (x, x) at a linear binder reuses x.
  CoreP dupl = cLam("x", Mult::One, a, cPair(a, a, cVar("x"), cVar("x")));
  CHECK(lintRule(env, dupl) == "L-ABS");
  // The same at an unrestricted binder is fine.
  CoreP duplW = cLam("x", Mult::Many, a, cPair(a, a, cVar("x"), cVar("x")));
  CHECK(typeEq(coreTypecheck(env, {}, duplW), tArrow(Mult::Many, a, tPair(a, a))));
  // Ur needs an unrestricted argument.
  CoreP urLin = cLam("x", Mult::One, a, cApp(cCtor("Ur", {a}), cVar("x")));
  CHECK(lintRule(env, urLin) == "L-ABS");
  CoreP urW = cLam("x", Mult::Many, a, cApp(cCtor("Ur", {a}), cVar("x")));
  CHECK(typeEq(coreTypecheck(env, {}, urW), tArrow(Mult::Many, a, tUr(a))));
  // Dropping a linear variable.
  CHECK(lintRule(env, cLam("x", Mult::One, a, cUnit())) == "L-ABS");
  // Free variables from the context.
  CoreContext ctx{{"y", {Mult::One, mono(tInt())}}};
  CHECK(lintRule(env, cUnit(), ctx) == "L-VAR");
  CHECK(typeEq(coreTypecheck(env, ctx, cVar("y")), tInt()));
  CHECK(lintRule(env, cVar("nope")) == "L-VAR");
  CHECK(lintRule(env, cApp(cInt(1), cInt(2))) == "L-APP");
  CHECK(lintRule(env, cApp(cCtor("Ur", {tInt()}), cStr("s"))) == "L-APP");
  CHECK(lintRule(env, cCtor("Ur")) == "L-VAR");
}

TEST_CASE("lint: case and let") {
  CoreEnv env = listEnv();
  TypeP b = tBool();
  CoreP notB = cLam("x", Mult::One, b,
                    cCase(Mult::One, cVar("x"),
                          {{pCtor("True"), cCtor("False")}, {pCtor("False"), cCtor("True")}}));
  CHECK(typeEq(coreTypecheck(env, {}, notB), tArrow(Mult::One, b, b)));

  CoreP missing = cLam("x", Mult::One, b,
                       cCase(Mult::One, cVar("x"), {{pCtor("True"), cCtor("False")}}));
  CHECK(lintRule(env, missing) == "L-CASE");

  // Both branches consume y.
  CoreP balanced = cLam(
      "y", Mult::One, b,
      cLam("x", Mult::One, b,
           cCase(Mult::One, cVar("x"),
                 {{pCtor("True"), cVar("y")},
                  {pCtor("False"), cCase(Mult::One, cVar("y"), {{pCtor("True"), cCtor("True")},
                                                                {pCtor("False"), cCtor("True")}})},
                  })));
  CHECK(typeEq(coreTypecheck(env, {}, balanced), tArrow(Mult::One, b, tArrow(Mult::One, b, b))));
  CoreP dropped = cLam("y", Mult::One, b,
                       cLam("x", Mult::One, b,
                            cCase(Mult::One, cVar("x"),
                                  {{pCtor("True"), cVar("y")}, {pCtor("False"), cCtor("True")}})));
  CHECK(lintRule(env, dropped) != "");

  // Wildcard on a linear scrutinee, fine at ω.
  CHECK(lintRule(env, cLam("x", Mult::One, b, cCase(Mult::One, cVar("x"), {{pWild(), cUnit()}}))) ==
        "L-CASE");
  CHECK(lintRule(env, cLam("x", Mult::Many, b,
                           cCase(Mult::Many, cVar("x"), {{pWild(), cUnit()}}))) == "");

  // Ur fields are unrestricted even under a linear case.
  TypeP ui = tUr(tInt());
  CoreP urDup = cLam("u", Mult::One, ui,
                     cCase(Mult::One, cVar("u"),
                           {{pCtor("Ur", {pVar("n")}), cPair(tInt(), tInt(), cVar("n"), cVar("n"))}}));
  CHECK(typeEq(coreTypecheck(env, {}, urDup), tArrow(Mult::One, ui, tPair(tInt(), tInt()))));

  // Polymorphic let.
  Scheme idS{{"t"}, {}, tArrow(Mult::One, tVar("t"), tVar("t"))};
  CoreP letId = cLet(Mult::Many, "id", idS, cLam("z", Mult::One, tVar("t"), cVar("z")),
                     cPair(tInt(), b, cApp(cVar("id", {tInt()}), cInt(1)),
                           cApp(cVar("id", {b}), cCtor("True"))));
  CHECK(typeEq(coreTypecheck(env, {}, letId), tPair(tInt(), b)));
  CHECK(lintRule(env, cLet(Mult::One, "k", std::nullopt, cInt(1), cUnit())) == "L-LET");
}

TEST_CASE("lint: existentials") {
  CoreEnv env = listEnv();
  env.ctors["#Tok"] = {"#Tok", {"n"}, {}};
  env.typeCtors["#Tok"] = {"#Tok"};
  TypeP ex = tCoreExists({"n"}, tCon("#Tok", {tVar("n")}), tInt());
  env.prims["mint"] = mono(tArrow(Mult::One, tUnit(), ex));
  env.prims["burn"] = Scheme{{"n"}, {}, tArrow(Mult::One, tCon("#Tok", {tVar("n")}), tUnit())};

  CoreP packed = cPack(ex, {tBool()}, cCtor("#Tok", {tBool()}), cInt(3));
  CHECK(typeEq(coreTypecheck(env, {}, packed), ex));
  CHECK(lintRule(env, cPack(ex, {tBool()}, cCtor("#Tok", {tInt()}), cInt(3))) == "L-PACK");
  CHECK(lintRule(env, cPack(ex, {}, cCtor("#Tok", {tInt()}), cInt(3))) == "L-PACK");

  CoreP ok = cUnpack("z", "x", {"m"}, cApp(cPrim("mint"), cUnit()),
                     cCase(Mult::One, cApp(cPrim("burn", {tVar("m")}), cVar("z")),
                           {{pCtor("()"), cVar("x")}}));
  CHECK(typeEq(coreTypecheck(env, {}, ok), tInt()));

  CoreP leak = cUnpack("z", "x", {"m"}, cApp(cPrim("mint"), cUnit()),
                       cCase(Mult::One, cVar("x"), {{pWild(), cVar("z")}}));
  CHECK(lintRule(env, leak) != "");
  CoreP escape = cUnpack("z", "x", {"m"}, packed, cPair(tCon("#Tok", {tVar("m")}), tInt(),
                                                        cVar("z"), cVar("x")));
  CHECK(lintRule(env, escape) == "L-UNPACK");
  CoreP unused = cUnpack("z", "x", {"m"}, packed, cVar("x"));
  CHECK(lintRule(env, unused) == "L-UNPACK");
}

TEST_CASE("flattening nested patterns") {
  CoreEnv env = listEnv();
  // A pair of Ur patterns nested inside a pair pattern.
  TypeP pu = tPair(tUr(tInt()), tUr(tInt()));
  CoreP sum = cLam(
      "p", Mult::One, pu,
      cCase(Mult::One, cVar("p"),
            {{pCtor("(,)", {pCtor("Ur", {pVar("a")}), pCtor("Ur", {pVar("b")})}),
              cPair(tInt(), tInt(), cVar("b"), cVar("a"))}}));
  CHECK(lintRule(env, sum) == "L-CASE");
  CoreP flat = flattenPatterns(env, sum);
  CHECK(typeEq(coreTypecheck(env, {}, flat), tArrow(Mult::One, pu, tPair(tInt(), tInt()))));
  CHECK(printCore(flat).find("f#0") != std::string::npos);
  // Already-flat terms are unchanged.
  CHECK(coreEq(flattenPatterns(env, flat), flat));

  // Evaluating both forms gives the same result.
  Store st;
  PrimTable prims;
  Evaluator ev(env, {}, prims, st);
  ValueP arg = vCon("(,)", {vCon("Ur", {vInt(1)}), vCon("Ur", {vInt(2)})});
  ValueP r1 = ev.apply(ev.eval(sum, nullptr), arg);
  ValueP r2 = ev.apply(ev.eval(flat, nullptr), arg);
  CHECK(valueEq(r1, r2));
  CHECK(showValue(r1) == "(2, 1)");
}

TEST_CASE("printer") {
  TypeP a = tVar("a");
  CoreP e = cLam("x", Mult::One, a, cPair(a, a, cVar("x"), cVar("x")));
  CHECK(printCore(e) == "(lam (x 1 a) (app (app (@ , a a) x) x))");
  CHECK(printCoreType(tArrow(Mult::Many, tInt(), tUr(tInt()))) == "(-> Int (Ur Int))");
  CHECK(printCoreType(tCoreExists({"n"}, tCon("#Read", {tVar("n")}), tInt())) ==
        "(exists (n) (#Read n) Int)");
  // Long terms break across lines and stay deterministic.
  CoreP big = cUnit();
  for (int i = 0; i < 12; ++i) big = cPair(tUnit(), tUnit(), big, cVar("value" + std::to_string(i)));
  std::string s = printCore(big);
  CHECK(s.find('\n') != std::string::npos);
  CHECK(s == printCore(big));
}

TEST_CASE("store windows") {
  Store st;
  int a = st.allocate({1, 2, 3, 4});
  CHECK(st.read(a, 2) == 3);
  auto [l, r] = st.slice(a, 1);
  CHECK(st.length(l) == 1);
  CHECK(st.length(r) == 3);
  st.write(r, 0, 20);
  CHECK_THROWS_AS(st.read(a, 0), RuntimeFault);  // parent is borrowed
  st.release(l, r);
  CHECK(st.read(a, 1) == 20);
  CHECK_THROWS_AS(st.read(l, 0), RuntimeFault);
  CHECK_THROWS_AS(st.read(a, 4), RuntimeFault);
  st.free(a);
  CHECK_THROWS_AS(st.read(a, 0), RuntimeFault);
  CHECK_THROWS_AS(st.free(a), RuntimeFault);
  CHECK(st.leaked().empty());
  CHECK(st.faults().size() == 5);

  Store st2;
  int b = st2.allocate({5});
  CHECK(st2.leaked() == std::vector<int>{b});
  auto [l2, r2] = st2.slice(b, 0);
  CHECK_THROWS_AS(st2.free(l2), RuntimeFault);
  (void)r2;
}

TEST_CASE("evaluation") {
  CoreEnv env = listEnv();
  env.prims["add"] = mono(tArrow(Mult::One, tInt(), tArrow(Mult::One, tInt(), tInt())));
  PrimTable prims;
  prims["add"] = {2, [](PrimCall& c) { return vInt(c.args[0]->ival + c.args[1]->ival); }, nullptr};

  // length of a list via a global
  TypeP li = tCon("List", {tInt()});
  CoreDecl len{"len",
               mono(tArrow(Mult::Many, li, tInt())),
               cLam("xs", Mult::Many, li,
                    cCase(Mult::Many, cVar("xs"),
                          {{pCtor("Nil"), cInt(0)},
                           {pCtor("Cons", {pWild(), pVar("rest")}),
                            cApp(cApp(cPrim("add"), cInt(1)), cApp(cVar("len"), cVar("rest")))}})),
               {}};
  env.globals["len"] = len.scheme;
  CHECK_NOTHROW(coreLintDecl(env, len));

  CoreDecl mainD{"main", mono(tInt()),
                 cApp(cVar("len"), cApp(cApp(cCtor("Cons", {tInt()}), cInt(4)),
                                        cApp(cApp(cCtor("Cons", {tInt()}), cInt(5)),
                                             cCtor("Nil", {tInt()})))),
                 {}};
  CHECK_NOTHROW(coreLintDecl(env, mainD));
  std::vector<CoreDecl> decls{len, mainD};
  Store st;
  Evaluator ev(env, decls, prims, st);
  CHECK(ev.global("main")->ival == 2);

  CoreDecl loop{"loop", mono(tInt()), cVar("loop"), {}};
  std::vector<CoreDecl> d2{loop};
  Evaluator ev2(env, d2, prims, st);
  CHECK_THROWS_AS(ev2.global("loop"), RuntimeFault);
}

TEST_CASE("evidence values and printing") {
  TypeP evT = tPair(tUr(tCon("#Linearly")), tCon("#Read", {tVar("n")}));
  ValueP v = evidenceValue(evT);
  CHECK(v->name == "(,)");
  CHECK(v->fields[0]->name == "Ur");
  CHECK(v->fields[1]->k == Value::K::Token);
  CHECK(v->fields[1]->name == "Read");
  CHECK(evidenceValue(tUnit())->name == "()");

  ValueP lst = vCon("Cons", {vInt(1), vCon("Cons", {vInt(2), vCon("Nil")})});
  CHECK(showValue(lst) == "[1,2]");
  CHECK(showValue(vCon("Ur", {vCon("(,)", {vInt(3), lst})})) == "(3, [1,2])");
  CHECK(showValue(vCon("Nil")) == "[]");
  CHECK(showValue(vCon("Just", {vCon("Just", {vInt(1)})})) == "Just (Just 1)");
}
