#pragma once

// Whole-pipeline driver: parse, check, solve, elaborate, lint and run.

#include <string>
#include <vector>

#include "linck/corecalc.hpp"
#include "linck/desugar.hpp"
#include "linck/surface.hpp"
#include "linck/typing.hpp"

namespace linck {

struct Diagnostic {
  std::string severity = "error";
  std::string code;  // LQ-PARSE, LQ-TYPE, LQ-LINEAR, LQ-MULT, LQ-AMBIG, LQ-UNSOLVED, LQ-CORELINT
  std::string message;
  SourceSpan span;
  std::vector<std::string> notes;
  std::string decl;  // declaration the diagnostic belongs to, if any
};

std::string formatDiagnostic(const Diagnostic& d);
std::string diagnosticJson(const Diagnostic& d);  // one line

struct CompileOptions {
  bool stateSolver = false;
  bool traceSolver = false;
  unsigned stressSeed = 0;  // nonzero shuffles atom processing order while solving
};

struct SolverLog {
  std::string decl;
  std::string wanted;
  std::vector<std::string> lines;
};

struct Compilation {
  SurfaceProgram prelude;
  SurfaceProgram program;
  GlobalEnv env;
  CoreEnv cenv;
  std::vector<CoreDecl> preludeCore;
  std::vector<CoreDecl> core;  // user declarations in source order
  std::vector<Diagnostic> diags;
  std::vector<SolverLog> trace;
  int declCount = 0;

  bool ok() const { return diags.empty(); }
};

Compilation compileSource(const std::string& preludeText, const std::string& preludePath,
                          const std::string& text, const std::string& path,
                          const CompileOptions& opts = {});

// Reads both files; throws std::runtime_error on I/O failure.
Compilation compileFile(const std::string& path, const std::string& preludePath,
                        const CompileOptions& opts = {});

std::string readTextFile(const std::string& path);

// Prelude path: LINCK_PRELUDE if set, else the built-in default.
std::string defaultPreludePath();

// Core text of the user declarations, one definition per paragraph.
std::string coreText(const Compilation& c);

struct RunResult {
  bool ok = false;          // evaluated without fault
  ValueP value;
  std::string text;         // printed value
  std::vector<Diagnostic> diags;  // entry problems (LQ-TYPE)
  std::vector<std::string> faults;
  std::vector<int> leaked;
  std::vector<std::vector<long long>> arrays;  // final contents of every window
};

// Parses a command-line argument: an integer or a list like [1,2,3].
ValueP parseArgValue(const std::string& s);

RunResult runEntry(const Compilation& c, const std::string& entry,
                   const std::vector<std::string>& args = {});

}  // namespace linck
