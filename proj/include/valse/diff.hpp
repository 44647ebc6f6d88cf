#pragma once

// Token-level LCS diff used by the comparison endpoint.

#include <cstddef>
#include <vector>

namespace valse {

/// A maximal run of non-matching tokens: [a_begin, a_end) in the first
/// sequence was replaced by [b_begin, b_end) in the second. Either side may
/// be empty.
struct DiffSpan {
  std::size_t a_begin = 0;
  std::size_t a_end = 0;
  std::size_t b_begin = 0;
  std::size_t b_end = 0;
  bool operator==(const DiffSpan&) const = default;
};

inline std::vector<DiffSpan> token_diff(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  // lcs[i][j] = LCS length of a[i:] and b[j:].
  std::vector<std::vector<std::size_t>> lcs(n + 1, std::vector<std::size_t>(m + 1, 0));
  for (std::size_t i = n; i-- > 0;)
    for (std::size_t j = m; j-- > 0;)
      lcs[i][j] = a[i] == b[j] ? lcs[i + 1][j + 1] + 1 : std::max(lcs[i + 1][j], lcs[i][j + 1]);

  std::vector<DiffSpan> spans;
  std::size_t i = 0;
  std::size_t j = 0;
  bool open = false;
  DiffSpan cur;
  const auto close = [&] {
    if (open) {
      cur.a_end = i;
      cur.b_end = j;
      spans.push_back(cur);
      open = false;
    }
  };
  const auto start = [&] {
    if (!open) {
      cur = {i, i, j, j};
      open = true;
    }
  };
  while (i < n || j < m) {
    if (i < n && j < m && a[i] == b[j]) {
      close();
      ++i;
      ++j;
    } else if (j < m && (i == n || lcs[i][j + 1] >= lcs[i + 1][j])) {
      start();
      ++j;
    } else {
      start();
      ++i;
    }
  }
  close();
  return spans;
}

}  // namespace valse
