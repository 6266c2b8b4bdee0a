#pragma once

#include <string>

namespace linck {

struct SourceSpan {
  std::string file;
  int startLine = 0;
  int startCol = 0;
  int endLine = 0;
  int endCol = 0;

  bool valid() const { return startLine > 0; }
  std::string str() const;
  bool operator==(const SourceSpan&) const = default;
};

// Orders spans by file, then start position.
bool spanBefore(const SourceSpan& a, const SourceSpan& b);

SourceSpan spanJoin(const SourceSpan& a, const SourceSpan& b);

}  // namespace linck
