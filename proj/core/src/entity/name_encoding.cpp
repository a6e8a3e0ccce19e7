#include <array>
#include <cctype>

#include "mmsi/entity.hpp"

namespace mmsi::entity {
namespace {

// ASCII spellings for U+00C0 .. U+017F.
constexpr std::array<std::string_view, 0x180 - 0xC0> kLatinTable = {
    // U+00C0
    "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",
    // U+00D0
    "d", "n", "o", "o", "o", "o", "o", "", "o", "u", "u", "u", "u", "y", "th", "ss",
    // U+00E0
    "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",
    // U+00F0
    "d", "n", "o", "o", "o", "o", "o", "", "o", "u", "u", "u", "u", "y", "th", "y",
    // U+0100
    "a", "a", "a", "a", "a", "a", "c", "c", "c", "c", "c", "c", "c", "c", "d", "d",
    // U+0110
    "d", "d", "e", "e", "e", "e", "e", "e", "e", "e", "e", "e", "g", "g", "g", "g",
    // U+0120
    "g", "g", "g", "g", "h", "h", "h", "h", "i", "i", "i", "i", "i", "i", "i", "i",
    // U+0130
    "i", "i", "ij", "ij", "j", "j", "k", "k", "k", "l", "l", "l", "l", "l", "l", "l",
    // U+0140
    "l", "l", "l", "n", "n", "n", "n", "n", "n", "n", "n", "n", "o", "o", "o", "o",
    // U+0150
    "o", "o", "oe", "oe", "r", "r", "r", "r", "r", "r", "s", "s", "s", "s", "s", "s",
    // U+0160
    "s", "s", "t", "t", "t", "t", "t", "t", "u", "u", "u", "u", "u", "u", "u", "u",
    // U+0170
    "u", "u", "u", "u", "w", "w", "y", "y", "y", "z", "z", "z", "z", "z", "z", "s",
};

// Next code point of `s` starting at `i`; malformed bytes decode to U+FFFD
// and consume one byte.
char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) {
    return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  auto tail = [&](std::size_t k) { return static_cast<char32_t>(s[i + k] & 0x3F); };
  if (b0 < 0x80) {
    i += 1;
    return b0;
  }
  if (b0 >= 0xC2 && b0 <= 0xDF && cont(1)) {
    const char32_t cp = (char32_t(b0 & 0x1F) << 6) | tail(1);
    i += 2;
    return cp;
  }
  if (b0 >= 0xE0 && b0 <= 0xEF && cont(1) && cont(2)) {
    const char32_t cp = (char32_t(b0 & 0x0F) << 12) | (tail(1) << 6) | tail(2);
    i += 3;
    return cp;
  }
  if (b0 >= 0xF0 && b0 <= 0xF4 && cont(1) && cont(2) && cont(3)) {
    const char32_t cp = (char32_t(b0 & 0x07) << 18) | (tail(1) << 12) | (tail(2) << 6) | tail(3);
    i += 4;
    return cp;
  }
  i += 1;
  return 0xFFFD;
}

}  // namespace

std::string transliterate(char32_t cp) {
  if (cp >= 32 && cp <= 126) {
    return std::string(1, static_cast<char>(std::tolower(static_cast<int>(cp))));
  }
  if (cp >= 0xC0 && cp < 0x180) return std::string(kLatinTable[cp - 0xC0]);
  return {};
}

CharEncoding encode_name_chars(std::string_view name) {
  CharEncoding enc{};
  std::size_t out = 0;
  std::size_t i = 0;
  while (i < name.size() && out < enc.size()) {
    const std::string ascii = transliterate(next_code_point(name, i));
    if (ascii.empty()) {
      enc[out++] = 0;
      continue;
    }
    for (char c : ascii) {
      if (out == enc.size()) break;
      enc[out++] = static_cast<std::uint8_t>(c);
    }
  }
  return enc;
}

}  // namespace mmsi::entity
