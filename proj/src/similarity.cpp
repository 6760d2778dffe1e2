#include "routescan/similarity.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace routescan {

namespace {

std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    const std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

std::size_t code_points(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::size_t lcs_length(const std::vector<std::string_view>& a, const std::vector<std::string_view>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double ratio(std::size_t x, std::size_t y) {
  if (x == 0 && y == 0) return 1.0;
  return static_cast<double>(std::min(x, y)) / static_cast<double>(std::max(x, y));
}

}  // namespace

SimilarityParts structural_similarity_parts(std::string_view a, std::string_view b) {
  SimilarityParts p;
  if (a.empty() && b.empty()) return {1.0, 1.0, 1.0, 1.0};
  if (a.empty() || b.empty()) return p;
  const auto ta = tokens(a);
  const auto tb = tokens(b);
  p.sequence = ta.empty() && tb.empty()
                   ? 1.0
                   : 2.0 * static_cast<double>(lcs_length(ta, tb)) / static_cast<double>(ta.size() + tb.size());
  p.word_ratio = ratio(ta.size(), tb.size());
  p.char_ratio = ratio(code_points(a), code_points(b));
  p.score = 0.5 * p.sequence + 0.3 * p.word_ratio + 0.2 * p.char_ratio;
  return p;
}

double structural_similarity(std::string_view a, std::string_view b) { return structural_similarity_parts(a, b).score; }

}  // namespace routescan
