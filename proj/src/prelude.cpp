#include "linck/prelude.hpp"

#include <map>

namespace linck {

int spineArity(const TypeP& t) {
  int n = 0;
  for (TypeP c = t; c->k == Type::K::Arrow; c = c->args[1]) ++n;
  return n;
}

namespace {

const std::map<std::string, std::pair<int, std::string>>& runtimeInfo() {
  static const std::map<std::string, std::pair<int, std::string>> info = {
      {"linearly", {2, "none"}}, {"dup", {1, "none"}},       {"dis", {1, "none"}},
      {"new", {2, "allocates"}}, {"fromList", {2, "allocates"}}, {"toList", {2, "reads"}},
      {"read", {3, "reads"}},    {"write", {4, "writes"}},    {"free", {2, "frees"}},
      {"length", {2, "none"}},   {"slice", {3, "borrows"}},   {"+", {3, "none"}},
      {"-", {3, "none"}},        {"*", {3, "none"}},          {"/", {3, "none"}},
      {"==", {3, "none"}},       {"/=", {3, "none"}},         {"<", {3, "none"}},
      {"<=", {3, "none"}},       {">", {3, "none"}},          {">=", {3, "none"}},
      {"&&", {3, "none"}},       {"||", {3, "none"}},
  };
  return info;
}

int arrayId(const ValueP& v) {
  if (v->k != Value::K::Array) throw RuntimeFault("expected an array, got " + showValue(v));
  return static_cast<int>(v->ival);
}

long long intOf(const ValueP& v) {
  if (v->k != Value::K::Int) throw RuntimeFault("expected an integer, got " + showValue(v));
  return v->ival;
}

bool boolOf(const ValueP& v) {
  if (v->k != Value::K::Con || (v->name != "True" && v->name != "False"))
    throw RuntimeFault("expected a boolean, got " + showValue(v));
  return v->name == "True";
}

ValueP vBool(bool b) { return vCon(b ? "True" : "False"); }
ValueP vUr(ValueP v) { return vCon("Ur", {std::move(v)}); }

long long floorDiv(long long a, long long b) {
  long long q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

ValueP listValue(const std::vector<long long>& xs) {
  ValueP out = vCon("Nil");
  for (size_t i = xs.size(); i-- > 0;) out = vCon("Cons", {vInt(xs[i]), out});
  return out;
}

std::vector<long long> listInts(const ValueP& v) {
  std::vector<long long> out;
  const Value* p = v.get();
  while (p->k == Value::K::Con && p->name == "Cons") {
    out.push_back(intOf(p->fields[0]));
    p = p->fields[1].get();
  }
  if (p->k != Value::K::Con || p->name != "Nil")
    throw RuntimeFault("expected a list of integers");
  return out;
}

TypeP resultEvidenceOf(const Scheme& s, int arity) {
  TypeP t = s.body;
  for (int i = 0; i < arity && t->k == Type::K::Arrow; ++i) t = t->args[1];
  if (t->k == Type::K::Exists && t->args.size() == 2) return t->args[1];
  return nullptr;
}

PrimImpl binop(std::function<ValueP(const ValueP&, const ValueP&, Store&)> f) {
  return {3, [f](PrimCall& c) { return f(c.args[1], c.args[2], c.store); }, nullptr};
}

PrimImpl arith(std::function<long long(long long, long long)> f) {
  return binop([f](const ValueP& a, const ValueP& b, Store&) { return vInt(f(intOf(a), intOf(b))); });
}

PrimImpl compare(std::function<bool(long long, long long)> f) {
  return binop([f](const ValueP& a, const ValueP& b, Store&) { return vBool(f(intOf(a), intOf(b))); });
}

}  // namespace

std::vector<PrimSignature> preludeSignatures(const GlobalEnv& env) {
  std::vector<PrimSignature> out;
  for (const auto& [name, g] : env.globals) {
    if (g.hasBody || !g.fromPrelude) continue;
    PrimSignature s{name, g.sig, 0, "none"};
    auto it = runtimeInfo().find(name);
    if (it != runtimeInfo().end()) {
      s.arity = it->second.first;
      s.effect = it->second.second;
    }
    out.push_back(s);
  }
  return out;
}

PrimTable buildPrimTable(const CoreEnv& cenv) {
  PrimTable t;
  t["linearly"] = {2, [](PrimCall& c) { return c.ev.apply(c.args[1], vToken("Linearly")); }, nullptr};
  t["dup"] = {1, [](PrimCall& c) {
                return vPack(vCon("(,)", {c.args[0], vToken(c.args[0]->name)}), vUnit());
              }, nullptr};
  t["dis"] = {1, [](PrimCall&) { return vUnit(); }, nullptr};
  t["new"] = {2, [](PrimCall& c) {
                long long n = intOf(c.args[1]);
                if (n < 0) c.store.fault("new: negative length " + std::to_string(n));
                int id = c.store.allocate(std::vector<long long>(static_cast<size_t>(n), 0));
                return vPack(evidenceValue(c.resultEvidence), vUr(vArray(id)));
              }, nullptr};
  t["fromList"] = {2, [](PrimCall& c) {
                     int id = c.store.allocate(listInts(c.args[1]));
                     return vPack(evidenceValue(c.resultEvidence), vUr(vArray(id)));
                   }, nullptr};
  t["toList"] = {2, [](PrimCall& c) {
                   std::vector<long long> xs = c.store.readAll(arrayId(c.args[1]));
                   return vPack(c.args[0], vUr(listValue(xs)));
                 }, nullptr};
  t["read"] = {3, [](PrimCall& c) {
                 long long v = c.store.read(arrayId(c.args[1]), intOf(c.args[2]));
                 return vPack(c.args[0], vUr(vInt(v)));
               }, nullptr};
  t["write"] = {4, [](PrimCall& c) {
                  c.store.write(arrayId(c.args[1]), intOf(c.args[2]), intOf(c.args[3]));
                  return vPack(c.args[0], vUnit());
                }, nullptr};
  t["free"] = {2, [](PrimCall& c) {
                 c.store.free(arrayId(c.args[1]));
                 return vUnit();
               }, nullptr};
  t["length"] = {2, [](PrimCall& c) { return vInt(c.store.length(arrayId(c.args[1]))); }, nullptr};

  TypeP releaseEvidence;
  if (auto it = cenv.prims.find("slice"); it != cenv.prims.end()) {
    // slice's payload is (Ur (..), release) with release : ev -o ∃. ev' ().
    TypeP res = it->second.body;
    for (int i = 0; i < 3 && res->k == Type::K::Arrow; ++i) res = res->args[1];
    if (res->k == Type::K::Exists && res->args[0]->k == Type::K::Con && res->args[0]->args.size() == 2) {
      TypeP rel = res->args[0]->args[1];
      if (rel->k == Type::K::Arrow && rel->args[1]->k == Type::K::Exists)
        releaseEvidence = rel->args[1]->args[1];
    }
  }
  t["slice"] = {3, [](PrimCall& c) {
                  auto [l, r] = c.store.slice(arrayId(c.args[1]), intOf(c.args[2]));
                  auto rel = std::make_shared<Value>();
                  rel->k = Value::K::Prim;
                  rel->name = "slice.release";
                  rel->arity = 3;
                  rel->fields = {vArray(l), vArray(r)};
                  ValueP halves = vUr(vCon("(,)", {vArray(l), vArray(r)}));
                  return vPack(evidenceValue(c.resultEvidence), vCon("(,)", {halves, rel}));
                }, nullptr};
  t["slice.release"] = {3, [](PrimCall& c) {
                          c.store.release(arrayId(c.args[0]), arrayId(c.args[1]));
                          return vPack(evidenceValue(c.resultEvidence), vUnit());
                        }, releaseEvidence};

  t["+"] = arith([](long long a, long long b) { return a + b; });
  t["-"] = arith([](long long a, long long b) { return a - b; });
  t["*"] = arith([](long long a, long long b) { return a * b; });
  t["/"] = binop([](const ValueP& a, const ValueP& b, Store& st) {
    if (intOf(b) == 0) st.fault("division by zero");
    return vInt(floorDiv(intOf(a), intOf(b)));
  });
  t["=="] = compare([](long long a, long long b) { return a == b; });
  t["/="] = compare([](long long a, long long b) { return a != b; });
  t["<"] = compare([](long long a, long long b) { return a < b; });
  t["<="] = compare([](long long a, long long b) { return a <= b; });
  t[">"] = compare([](long long a, long long b) { return a > b; });
  t[">="] = compare([](long long a, long long b) { return a >= b; });
  t["&&"] = binop([](const ValueP& a, const ValueP& b, Store&) { return vBool(boolOf(a) && boolOf(b)); });
  t["||"] = binop([](const ValueP& a, const ValueP& b, Store&) { return vBool(boolOf(a) || boolOf(b)); });

  // Duplicable classes other than Linearly get generic token primitives.
  for (const auto& [name, s] : cenv.prims) {
    if (name.rfind("dup.", 0) == 0) t[name] = t["dup"];
    if (name.rfind("dis.", 0) == 0) t[name] = t["dis"];
  }
  for (auto& [name, impl] : t) {
    auto it = cenv.prims.find(name);
    if (it != cenv.prims.end()) impl.resultEvidence = resultEvidenceOf(it->second, impl.arity);
  }
  return t;
}

std::vector<std::string> checkPrimArities(const CoreEnv& cenv, const PrimTable& prims) {
  std::vector<std::string> out;
  for (const auto& [name, s] : cenv.prims) {
    auto it = prims.find(name);
    if (it == prims.end()) {
      out.push_back("primitive " + name + " has no implementation");
      continue;
    }
    int declared = spineArity(s.body);
    if (declared != it->second.arity)
      out.push_back("primitive " + name + " takes " + std::to_string(declared) +
                    " argument(s) by its signature but " + std::to_string(it->second.arity) +
                    " at runtime");
  }
  return out;
}

}  // namespace linck
