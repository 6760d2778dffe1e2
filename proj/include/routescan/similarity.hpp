#pragma once

#include <string_view>

namespace routescan {

struct SimilarityParts {
  double sequence = 0.0;    // 2 LCS / (|a| + |b|) over whitespace tokens
  double word_ratio = 0.0;  // min/max word count
  double char_ratio = 0.0;  // min/max UTF-8 code point count
  double score = 0.0;       // 0.5 sequence + 0.3 word_ratio + 0.2 char_ratio
};

/// Composite structural similarity of a prompt pair. Two empty strings score
/// 1, a single empty string scores 0.
SimilarityParts structural_similarity_parts(std::string_view a, std::string_view b);
double structural_similarity(std::string_view a, std::string_view b);

}  // namespace routescan
