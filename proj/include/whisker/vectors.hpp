#pragma once

// Known-answer vectors for cross-implementation checks. Output is fixed:
// every value is derived from constant inputs.

#include <string>
#include <vector>

namespace whisker {

struct VectorLine {
  std::string label;
  std::string hex;  // lowercase; decimal for counters
};

std::vector<VectorLine> known_answer_vectors();

/// "label = value" per line.
std::string render_vectors();

}  // namespace whisker
