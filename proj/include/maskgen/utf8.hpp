#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace maskgen::utf8 {

/// Decodes UTF-8; invalid bytes decode to U+FFFD one byte at a time.
std::u32string decode(std::string_view s);
std::string encode(std::u32string_view s);
void append(std::string& out, char32_t cp);

/// White_Space property.
bool is_space(char32_t cp);
/// General category P* (Pc Pd Ps Pe Pi Pf Po).
bool is_punctuation(char32_t cp);
/// Simple lowercase mapping for Latin, Greek, Cyrillic and Armenian.
char32_t to_lower(char32_t cp);

std::string lowercase(std::string_view s);
std::size_t code_points(std::string_view s);

}  // namespace maskgen::utf8
