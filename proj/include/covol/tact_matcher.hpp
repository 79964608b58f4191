#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace covol {

/// Outcome of checking one transcript against the accepted answers of a
/// prompt. `matched_label` and `token_index` are set exactly when `matched`.
struct MatchResult {
  bool matched = false;
  std::optional<std::string> matched_label;
  std::optional<std::size_t> token_index;

  static MatchResult none() { return {}; }

  bool operator==(const MatchResult&) const = default;
};

/// Lowercases (full Unicode case mapping), splits on whitespace and strips
/// punctuation from both ends of every token. Never yields empty tokens.
std::vector<std::string> normalize(std::string_view text);

/// Word-level, synonym-aware check. An answer matches when its normalized
/// token sequence occurs contiguously in the normalized transcript. The
/// earliest occurrence wins; ties go to the answer listed first.
///
/// Matching is blind to negation: "this is not an apple" labels an apple.
MatchResult match(std::string_view transcript,
                  std::span<const std::string> accepted);

}  // namespace covol
