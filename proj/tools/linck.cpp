// linck: check, elaborate, run and corpus-test programs.
//
// Exit status: 0 success, 1 rejection or expectation mismatch, 2 I/O error,
// 3 runtime fault.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "linck/driver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace linck;

namespace {

struct Flags {
  bool json = false;
  bool traceSolver = false;
  bool stateSolver = false;
  unsigned stressSeed = 0;
  std::string prelude;
  std::string expect;
  std::string entry = "main";
  std::vector<std::string> args;
  bool updateGolden = false;
};

constexpr int kOk = 0, kRejected = 1, kIo = 2, kFault = 3;

CompileOptions optionsOf(const Flags& f) {
  return {f.stateSolver, f.traceSolver, f.stressSeed};
}

std::string preludeOf(const Flags& f) {
  return f.prelude.empty() ? defaultPreludePath() : f.prelude;
}

void emitDiagnostics(const std::vector<Diagnostic>& diags, const Flags& f) {
  for (const auto& d : diags) {
    if (f.json)
      std::cout << diagnosticJson(d) << "\n";
    else
      std::cerr << formatDiagnostic(d) << "\n";
  }
}

void emitTrace(const Compilation& c) {
  for (const auto& t : c.trace) {
    std::cout << "# " << t.decl << " wants " << t.wanted << "\n";
    for (const auto& l : t.lines) std::cout << l << "\n";
  }
}

// Expectation entries are keyed by file name. A reject entry has "code" and
// "line"; an accept entry may carry "runs": [{entry, args, output}].
std::optional<json> expectationFor(const std::string& expectFile, const std::string& path) {
  json all = json::parse(readTextFile(expectFile));
  std::string key = fs::path(path).filename().string();
  if (!all.contains(key)) return std::nullopt;
  return all[key];
}

// Returns an empty string when the diagnostics match the expectation.
std::string compareExpectation(const json& e, const Compilation& c) {
  if (!e.contains("code")) {
    if (c.ok()) return "";
    return "expected acceptance, got " + c.diags.front().code + " at line " +
           std::to_string(c.diags.front().span.startLine);
  }
  if (c.ok()) return "expected " + e["code"].get<std::string>() + ", but the file was accepted";
  std::string code = e["code"];
  int line = e.value("line", 0);
  for (const auto& d : c.diags)
    if (d.code == code && (line == 0 || d.span.startLine == line)) return "";
  const auto& d = c.diags.front();
  return "expected " + code + " at line " + std::to_string(line) + ", got " + d.code +
         " at line " + std::to_string(d.span.startLine);
}

int commandCheck(const std::vector<std::string>& paths, const Flags& f) {
  int status = kOk;
  for (const auto& p : paths) {
    Compilation c = compileFile(p, preludeOf(f), optionsOf(f));
    if (f.traceSolver) emitTrace(c);
    emitDiagnostics(c.diags, f);
    if (!f.expect.empty()) {
      auto e = expectationFor(f.expect, p);
      if (!e) {
        std::cerr << p << ": no expectation recorded\n";
        status = kRejected;
        continue;
      }
      std::string why = compareExpectation(*e, c);
      std::cout << (why.empty() ? "ok   " : "FAIL ") << p << (why.empty() ? "" : ": " + why)
                << "\n";
      if (!why.empty()) status = kRejected;
    } else if (!c.ok()) {
      status = kRejected;
    }
  }
  return status;
}

int commandCore(const std::vector<std::string>& paths, const Flags& f) {
  int status = kOk;
  for (const auto& p : paths) {
    Compilation c = compileFile(p, preludeOf(f), optionsOf(f));
    if (f.traceSolver) emitTrace(c);
    if (!c.ok()) {
      emitDiagnostics(c.diags, f);
      status = kRejected;
      continue;
    }
    std::cout << coreText(c);
  }
  return status;
}

int reportRun(const RunResult& r, const Flags& f) {
  if (!r.diags.empty()) {
    emitDiagnostics(r.diags, f);
    return kRejected;
  }
  if (!r.ok) {
    std::cerr << "runtime fault\n";
    for (const auto& x : r.faults) std::cerr << "  " << x << "\n";
    return kFault;
  }
  std::cout << r.text << "\n";
  return kOk;
}

int commandRun(const std::vector<std::string>& paths, const Flags& f) {
  int status = kOk;
  for (const auto& p : paths) {
    Compilation c = compileFile(p, preludeOf(f), optionsOf(f));
    if (f.traceSolver) emitTrace(c);
    if (!c.ok()) {
      emitDiagnostics(c.diags, f);
      status = std::max(status, kRejected);
      continue;
    }
    status = std::max(status, reportRun(runEntry(c, f.entry, f.args), f));
  }
  return status;
}

// Walks accept/ and reject/ under each corpus root, checks every file
// against expectations.json, runs recorded entries and compares the core
// output of accepted files with golden/<name>.core.
int commandCorpus(const std::vector<std::string>& roots, const Flags& f) {
  int failures = 0;
  for (const auto& rootName : roots) {
    fs::path root(rootName);
    fs::path expectFile = f.expect.empty() ? root / "expectations.json" : fs::path(f.expect);
    json all = json::parse(readTextFile(expectFile.string()));
    std::vector<fs::path> files;
    for (const char* sub : {"accept", "reject"})
      if (fs::exists(root / sub))
        for (const auto& e : fs::directory_iterator(root / sub))
          if (e.path().extension() == ".lq") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      std::string key = file.filename().string();
      std::vector<std::string> problems;
      Compilation c = compileFile(file.string(), preludeOf(f), optionsOf(f));
      if (!all.contains(key)) {
        problems.push_back("no expectation recorded");
      } else {
        const json& e = all[key];
        if (auto why = compareExpectation(e, c); !why.empty()) problems.push_back(why);
        if (c.ok()) {
          for (const auto& run : e.value("runs", json::array())) {
            RunResult r = runEntry(c, run.value("entry", "main"),
                                   run.value("args", std::vector<std::string>{}));
            std::string want = run["output"];
            if (!r.ok)
              problems.push_back("run of " + run.value("entry", "main") + " faulted");
            else if (r.text != want)
              problems.push_back("run printed " + r.text + ", expected " + want);
          }
          fs::path golden = root / "golden" / (file.stem().string() + ".core");
          std::string text = coreText(c);
          if (f.updateGolden) {
            fs::create_directories(golden.parent_path());
            std::ofstream(golden, std::ios::binary) << text;
          } else if (!fs::exists(golden)) {
            problems.push_back("missing golden " + golden.string());
          } else if (readTextFile(golden.string()) != text) {
            problems.push_back("core differs from " + golden.string());
          }
        }
      }
      if (!problems.empty()) ++failures;
      std::cout << (problems.empty() ? "ok   " : "FAIL ") << file.string() << "\n";
      for (const auto& p : problems) std::cout << "     " << p << "\n";
      if (!problems.empty()) emitDiagnostics(c.diags, f);
    }
  }
  std::cout << failures << " failure(s)\n";
  return failures == 0 ? kOk : kRejected;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"linck: a checker and interpreter for linearly constrained programs"};
  app.require_subcommand(1);
  Flags f;
  std::vector<std::string> paths;

  auto common = [&](CLI::App* sub) {
    sub->add_option("paths", paths, "input files")->required();
    sub->add_flag("--json", f.json, "diagnostics as newline-delimited JSON");
    sub->add_flag("--trace-solver", f.traceSolver, "print solver rule applications");
    sub->add_flag("--state-solver", f.stateSolver, "use the leftover-threading solver");
    sub->add_option("--prelude", f.prelude, "prelude file (default: $LINCK_PRELUDE or built-in)");
    sub->add_option("--stress-seed", f.stressSeed, "permute atom order while solving");
  };
  auto* check = app.add_subcommand("check", "type check files");
  common(check);
  check->add_option("--expect", f.expect, "expectations file to compare against");
  auto* core = app.add_subcommand("core", "print elaborated core");
  common(core);
  auto* run = app.add_subcommand("run", "evaluate an entry point");
  common(run);
  run->add_option("--entry", f.entry, "declaration to run");
  run->add_option("--arg", f.args, "argument: integer or [a,b,...] list")
      ->allow_extra_args(false)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  auto* corpus = app.add_subcommand("corpus", "check a corpus directory against expectations");
  common(corpus);
  corpus->add_option("--expect", f.expect, "expectations file (default: <dir>/expectations.json)");
  corpus->add_flag("--update-golden", f.updateGolden, "rewrite golden core files");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*check) return commandCheck(paths, f);
    if (*core) return commandCore(paths, f);
    if (*run) return commandRun(paths, f);
    if (*corpus) return commandCorpus(paths, f);
  } catch (const json::exception& e) {
    std::cerr << "linck: malformed expectations: " << e.what() << "\n";
    return kIo;
  } catch (const std::runtime_error& e) {
    std::cerr << "linck: " << e.what() << "\n";
    return kIo;
  }
  return kOk;
}
