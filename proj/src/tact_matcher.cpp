#include "covol/tact_matcher.hpp"

#include <unicode/locid.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>

namespace covol {
namespace {

bool is_strippable(UChar32 c) {
  // Symbols such as quotes or currency glyphs hanging off a word are noise
  // for an ASR transcript too.
  return u_ispunct(c) || u_charType(c) == U_MATH_SYMBOL ||
         u_charType(c) == U_MODIFIER_SYMBOL || u_charType(c) == U_OTHER_SYMBOL;
}

void flush_token(const icu::UnicodeString& raw, std::vector<std::string>& out) {
  int32_t begin = 0;
  int32_t end = raw.length();
  while (begin < end) {
    const UChar32 c = raw.char32At(begin);
    if (!is_strippable(c)) break;
    begin += U16_LENGTH(c);
  }
  while (end > begin) {
    const int32_t last = raw.moveIndex32(end, -1);
    if (!is_strippable(raw.char32At(last))) break;
    end = last;
  }
  if (begin == end) return;
  std::string token;
  raw.tempSubStringBetween(begin, end).toUTF8String(token);
  out.push_back(std::move(token));
}

}  // namespace

std::vector<std::string> normalize(std::string_view text) {
  std::vector<std::string> tokens;
  if (text.empty()) return tokens;

  icu::UnicodeString lowered = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  lowered.toLower(icu::Locale::getRoot());

  icu::UnicodeString current;
  for (int32_t i = 0; i < lowered.length();) {
    const UChar32 c = lowered.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      flush_token(current, tokens);
      current.remove();
    } else {
      current.append(c);
    }
  }
  flush_token(current, tokens);
  return tokens;
}

MatchResult match(std::string_view transcript,
                  std::span<const std::string> accepted) {
  const std::vector<std::string> heard = normalize(transcript);
  MatchResult best;
  for (const std::string& answer : accepted) {
    const std::vector<std::string> wanted = normalize(answer);
    if (wanted.empty() || wanted.size() > heard.size()) continue;
    const auto hit = std::search(heard.begin(), heard.end(), wanted.begin(),
                                 wanted.end());
    if (hit == heard.end()) continue;
    const auto index = static_cast<std::size_t>(hit - heard.begin());
    if (!best.matched || index < *best.token_index) {
      best.matched = true;
      best.matched_label = answer;
      best.token_index = index;
    }
  }
  return best;
}

}  // namespace covol
