#include "linck/driver.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "linck/prelude.hpp"
#include "linck/solver.hpp"

namespace linck {

std::string formatDiagnostic(const Diagnostic& d) {
  std::string out = d.span.str() + ": " + d.severity + " [" + d.code + "] " + d.message;
  for (const auto& n : d.notes) out += "\n  note: " + n;
  return out;
}

std::string diagnosticJson(const Diagnostic& d) {
  nlohmann::ordered_json j;
  j["severity"] = d.severity;
  j["code"] = d.code;
  j["message"] = d.message;
  j["span"] = {{"file", d.span.file},
               {"line", d.span.startLine},
               {"col", d.span.startCol},
               {"endLine", d.span.endLine},
               {"endCol", d.span.endCol}};
  j["notes"] = d.notes;
  j["decl"] = d.decl;
  return j.dump();
}

std::string readTextFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string defaultPreludePath() {
  if (const char* p = std::getenv("LINCK_PRELUDE"); p && *p) return p;
  return LINCK_DEFAULT_PRELUDE;
}

namespace {

std::string typeCode(TypeError::Kind k) {
  return k == TypeError::Kind::Linearity ? "LQ-LINEAR" : "LQ-TYPE";
}

std::string solverCode(FailKind k) {
  switch (k) {
    case FailKind::Multiplicity: return "LQ-MULT";
    case FailKind::Ambiguity: return "LQ-AMBIG";
    case FailKind::Unsolved: return "LQ-UNSOLVED";
  }
  return "LQ-UNSOLVED";
}

// Checks, solves and elaborates every declaration of one program. Returns
// the core of the declarations that made it through.
std::vector<CoreDecl> processProgram(Compilation& c, const SurfaceProgram& prog, bool fromPrelude,
                                     const CompileOptions& opts) {
  std::vector<CoreDecl> out;
  for (const auto& r : checkProgram(prog, c.env, fromPrelude)) {
    if (!fromPrelude) ++c.declCount;
    if (r.error) {
      c.diags.push_back({"error", typeCode(r.error->kind), r.error->what(),
                         r.error->span.valid() ? r.error->span : r.span, {}, r.name});
      continue;
    }
    const TypingDerivation& d = *r.deriv;
    WantedP w = generateConstraints(d);
    SolverTrace trace;
    SolverOutcome o = opts.stateSolver
                          ? checkTopLevelStateStyle(d.sig.q, w, c.env.dset, d.span)
                          : checkTopLevel(d.sig.q, w, c.env.dset, d.span,
                                          opts.traceSolver ? &trace : nullptr);
    if (opts.traceSolver && !fromPrelude) c.trace.push_back({d.name, showWanted(w), trace});
    if (!o.solved) {
      Diagnostic diag{"error", solverCode(o.kind), explainFailure(o),
                      o.blame.valid() ? o.blame : d.span, {}, d.name};
      diag.notes.push_back("in the declaration of " + d.name);
      c.diags.push_back(diag);
      continue;
    }
    try {
      CoreDecl cd = desugarDecl(c.env, c.cenv, d);
      coreLintDecl(c.cenv, cd);
      out.push_back(cd);
    } catch (const CoreLintError& e) {
      c.diags.push_back({"error", "LQ-CORELINT", "elaborated core fails " + e.rule + ": " + e.what(),
                         e.span.valid() ? e.span : d.span, {}, d.name});
    } catch (const std::exception& e) {
      c.diags.push_back(
          {"error", "LQ-CORELINT", std::string("elaboration failed: ") + e.what(), d.span, {}, d.name});
    }
  }
  return out;
}

}  // namespace

Compilation compileSource(const std::string& preludeText, const std::string& preludePath,
                          const std::string& text, const std::string& path,
                          const CompileOptions& opts) {
  Compilation c;
  unsigned oldSeed = atomOrderSeed();
  setAtomOrderSeed(opts.stressSeed);
  struct Restore {
    unsigned seed;
    ~Restore() { setAtomOrderSeed(seed); }
  } restore{oldSeed};

  auto parse = [&](const std::string& src, const std::string& file, SurfaceProgram& into) {
    try {
      into = parseProgram(src, file);
      return true;
    } catch (const ParseError& e) {
      c.diags.push_back({"error", "LQ-PARSE", e.what(), e.span, {}, ""});
      if (!e.expected.empty()) {
        std::string exp;
        for (const auto& x : e.expected) exp += (exp.empty() ? "" : ", ") + x;
        c.diags.back().notes.push_back("expected one of: " + exp);
      }
      return false;
    }
  };
  if (!parse(preludeText, preludePath, c.prelude) || !parse(text, path, c.program)) return c;

  try {
    c.env = buildGlobalEnv({&c.prelude, &c.program});
  } catch (const TypeError& e) {
    c.diags.push_back({"error", typeCode(e.kind), e.what(), e.span, {}, ""});
    return c;
  }
  c.cenv = coreEnvFrom(c.env);
  c.preludeCore = processProgram(c, c.prelude, true, opts);
  c.core = processProgram(c, c.program, false, opts);
  std::stable_sort(c.diags.begin(), c.diags.end(), [](const Diagnostic& a, const Diagnostic& b) {
    return spanBefore(a.span, b.span);
  });
  return c;
}

Compilation compileFile(const std::string& path, const std::string& preludePath,
                        const CompileOptions& opts) {
  std::string prelude = readTextFile(preludePath);
  std::string text = readTextFile(path);
  return compileSource(prelude, preludePath, text, path, opts);
}

std::string coreText(const Compilation& c) {
  std::string out;
  for (const auto& d : c.core) out += printCoreDecl(d) + "\n\n";
  return out;
}

ValueP parseArgValue(const std::string& s) {
  auto parseInt = [&](const std::string& t) -> long long {
    size_t used = 0;
    long long v = std::stoll(t, &used);
    if (used != t.size()) throw std::invalid_argument("not an integer: " + t);
    return v;
  };
  std::string t = s;
  t.erase(std::remove_if(t.begin(), t.end(), ::isspace), t.end());
  if (!t.empty() && t.front() == '[') {
    if (t.back() != ']') throw std::invalid_argument("unterminated list: " + s);
    std::vector<long long> xs;
    std::string body = t.substr(1, t.size() - 2);
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) xs.push_back(parseInt(item));
    ValueP v = vCon("Nil");
    for (size_t i = xs.size(); i-- > 0;) v = vCon("Cons", {vInt(xs[i]), v});
    return v;
  }
  return vInt(parseInt(t));
}

namespace {

bool argFits(const TypeP& t, const ValueP& v) {
  if (t->k != Type::K::Con) return false;
  if (t->name == "Int") return v->k == Value::K::Int;
  if (t->name == "List" && t->args.size() == 1 && t->args[0]->k == Type::K::Con &&
      t->args[0]->name == "Int")
    return v->k == Value::K::Con && (v->name == "Cons" || v->name == "Nil");
  return false;
}

}  // namespace

RunResult runEntry(const Compilation& c, const std::string& entry,
                   const std::vector<std::string>& args) {
  RunResult r;
  auto reject = [&](const std::string& msg, const SourceSpan& at) {
    r.diags.push_back({"error", "LQ-TYPE", msg, at, {}, entry});
    return r;
  };
  const CoreDecl* d = nullptr;
  for (const auto& cd : c.core)
    if (cd.name == entry) d = &cd;
  if (!d) return reject("no runnable declaration named " + entry, {c.program.file, 1, 1, 1, 1});
  const Scheme& sig = c.env.globals.at(entry).sig;
  if (!sig.vars.empty())
    return reject("entry " + entry + " is polymorphic; give it a ground type", d->span);
  if (!sig.q.isEps())
    return reject("entry " + entry + " needs constraints " + showSimple(sig.q) +
                      "; wrap its body with linearly",
                  d->span);
  TypeP t = sig.body;
  std::vector<ValueP> argv;
  for (const auto& a : args) {
    if (t->k != Type::K::Arrow)
      return reject("entry " + entry + " takes fewer arguments than given", d->span);
    ValueP v;
    try {
      v = parseArgValue(a);
    } catch (const std::exception& e) {
      return reject(std::string("bad argument: ") + e.what(), d->span);
    }
    if (!argFits(t->args[0], v))
      return reject("argument " + a + " does not fit parameter type " + showType(t->args[0]),
                    d->span);
    argv.push_back(v);
    t = t->args[1];
  }

  std::vector<CoreDecl> all = c.preludeCore;
  all.insert(all.end(), c.core.begin(), c.core.end());
  PrimTable prims = buildPrimTable(c.cenv);
  Store store;
  Evaluator ev(c.cenv, all, prims, store);
  try {
    ValueP v = ev.apply(ev.global(entry), vUnit());
    for (const auto& a : argv) v = ev.apply(v, a);
    r.value = v;
    r.text = showValue(v);
    r.ok = true;
  } catch (const RuntimeFault& e) {
    r.faults = store.faults();
    if (r.faults.empty() || r.faults.back() != e.what()) r.faults.push_back(e.what());
  }
  r.leaked = store.leaked();
  if (r.ok && !r.leaked.empty()) {
    r.ok = false;
    std::string ids;
    for (int id : r.leaked) ids += (ids.empty() ? "" : ", ") + std::to_string(id);
    r.faults.push_back("arrays never freed or released: " + ids);
  }
  for (int i = 0; i < store.windowCount(); ++i) r.arrays.push_back(store.contents(i));
  return r;
}

}  // namespace linck
