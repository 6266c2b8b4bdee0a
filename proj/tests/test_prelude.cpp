#include <random>

#include "doctest.h"
#include "linck/driver.hpp"
#include "linck/prelude.hpp"

using namespace linck;

namespace {

Compilation compileWithPrelude(const std::string& text) {
  return compileSource(readTextFile(defaultPreludePath()), "prelude.lq", text, "test.lq");
}

std::string runMain(const std::string& text) {
  Compilation c = compileWithPrelude(text);
  REQUIRE_MESSAGE(c.ok(), (c.diags.empty() ? "" : formatDiagnostic(c.diags.front())));
  RunResult r = runEntry(c, "main");
  REQUIRE_MESSAGE(r.ok, (r.faults.empty() ? "" : r.faults.back()));
  return r.text;
}

const PrimSignature* findSig(const std::vector<PrimSignature>& sigs, const std::string& n) {
  for (const auto& s : sigs)
    if (s.name == n) return &s;
  return nullptr;
}

}  // namespace

TEST_CASE("primitive table agrees with the prelude declarations") {
  Compilation c = compileWithPrelude("");
  REQUIRE(c.ok());
  PrimTable prims = buildPrimTable(c.cenv);
  CHECK(checkPrimArities(c.cenv, prims).empty());

  auto sigs = preludeSignatures(c.env);
  const PrimSignature* fr = findSig(sigs, "free");
  REQUIRE(fr);
  CHECK(fr->arity == 2);
  CHECK(fr->effect == "frees");
  const PrimSignature* sl = findSig(sigs, "slice");
  REQUIRE(sl);
  CHECK(sl->arity == 3);
  CHECK(sl->effect == "borrows");
  const PrimSignature* dp = findSig(sigs, "dup");
  REQUIRE(dp);
  CHECK(dp->arity == 1);
  CHECK(findSig(sigs, "when") == nullptr);  // has a body
}

TEST_CASE("prelude schemes round-trip and translate to well-formed core types") {
  Compilation c = compileWithPrelude("");
  REQUIRE(c.ok());
  for (const auto& s : preludeSignatures(c.env)) {
    CAPTURE(s.name);
    std::string text = showScheme(s.scheme);
    Scheme back = resolveScheme(c.env, parseScheme(text), {});
    CHECK(showScheme(back) == text);
    Scheme core = translateScheme(s.scheme);
    CHECK(spineArity(core.body) == s.arity);
    CHECK(c.cenv.prims.count(s.name) == 1);
  }
}

TEST_CASE("arrays: allocation, writes and reads") {
  CHECK(runMain("main :: Ur (List Int)\n"
                "main = linearly $ Linearly.do {\n"
                "  Ur arr <- new 3;\n"
                "  Ur xs <- toList arr;\n"
                "  free arr;\n"
                "  Linearly.return (Ur xs)\n"
                "  }\n") == "[0,0,0]");
  CHECK(runMain("main :: Ur Int\n"
                "main = linearly $ Linearly.do {\n"
                "  Ur arr <- new 2;\n"
                "  write arr 1 41;\n"
                "  Ur x <- read arr 1;\n"
                "  free arr;\n"
                "  Linearly.return (Ur (x + 1))\n"
                "  }\n") == "42");
}

TEST_CASE("arrays: slices write through to the parent after release") {
  CHECK(runMain("main :: Ur (List Int)\n"
                "main = linearly $ Linearly.do {\n"
                "  Ur arr <- fromList (Cons 1 (Cons 2 (Cons 3 (Cons 4 Nil))));\n"
                "  (Ur (l, r), release) <- slice arr 1;\n"
                "  write l 0 10;\n"
                "  write r 0 20;\n"
                "  release;\n"
                "  Ur xs <- toList arr;\n"
                "  free arr;\n"
                "  Linearly.return (Ur xs)\n"
                "  }\n") == "[10,20,3,4]");
}

TEST_CASE("runtime faults are reported, not thrown") {
  Compilation c = compileWithPrelude(
      "main :: Ur Int\n"
      "main = linearly $ Linearly.do {\n"
      "  Ur arr <- new 2;\n"
      "  Ur x <- read arr 5;\n"
      "  free arr;\n"
      "  Linearly.return (Ur x)\n"
      "  }\n");
  REQUIRE(c.ok());
  RunResult r = runEntry(c, "main");
  CHECK_FALSE(r.ok);
  CHECK_FALSE(r.faults.empty());

  Compilation leak = compileWithPrelude(
      "main :: Ur Int\n"
      "main = linearly $ Linearly.do {\n"
      "  Ur arr <- new 2;\n"
      "  Linearly.return (Ur (length arr))\n"
      "  }\n");
  // Dropping RW n is a type error, so a leak needs an unchecked store.
  CHECK_FALSE(leak.ok());

  Compilation div = compileWithPrelude("main :: Ur Int\nmain = Ur (7 / 0)\n");
  REQUIRE(div.ok());
  CHECK_FALSE(runEntry(div, "main").ok);
  Compilation floorDiv = compileWithPrelude("main :: Ur Int\nmain = Ur ((0 - 7) / 2)\n");
  REQUIRE(floorDiv.ok());
  CHECK(runEntry(floorDiv, "main").text == "-4");
}

TEST_CASE("store: random slice trees never alias") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    Store s;
    int len = std::uniform_int_distribution<int>(0, 12)(rng);
    std::vector<long long> model(len, 0);
    int root = s.allocate(model);

    // Recursively split windows (depth <= 3), then write a distinct value to
    // every cell of every leaf, releasing bottom-up.
    long long next = 1;
    std::function<void(int, long long, int)> go = [&](int w, long long off, int depth) {
      long long n = s.length(w);
      if (depth < 3 && std::uniform_int_distribution<int>(0, 3)(rng) != 0) {
        long long k = std::uniform_int_distribution<long long>(0, n)(rng);
        auto [l, r] = s.slice(w, k);
        CHECK_THROWS_AS(s.read(w, 0), RuntimeFault);  // suspended
        go(l, off, depth + 1);
        go(r, off + k, depth + 1);
        s.release(l, r);
        return;
      }
      for (long long i = 0; i < n; ++i) {
        s.write(w, i, next);
        model[off + i] = next++;
      }
    };
    go(root, 0, 0);
    CHECK(s.readAll(root) == model);
    s.free(root);
    CHECK(s.leaked().empty());
  }
}

TEST_CASE("store: release requires siblings and free requires a root") {
  Store s;
  int a = s.allocate({1, 2, 3, 4});
  int b = s.allocate({5});
  auto [l, r] = s.slice(a, 2);
  CHECK_THROWS_AS(s.free(l), RuntimeFault);
  CHECK_THROWS_AS(s.release(l, b), RuntimeFault);
  s.release(l, r);
  CHECK_THROWS_AS(s.release(l, r), RuntimeFault);
  s.free(a);
  CHECK_THROWS_AS(s.free(a), RuntimeFault);
}
