#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace scentrank {

/// Byte range [begin, end) of one token inside the source text.
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Maximal runs of Unicode letters/digits, lowercased. No stopwords, no stemming.
/// Invalid UTF-8 bytes act as separators.
std::vector<std::string> tokenize(std::string_view text);

/// Same segmentation as tokenize(), reported as byte offsets into `text`.
std::vector<TokenSpan> token_spans(std::string_view text);

/// Prefix of `text` ending right after its `max_tokens`-th token. Text with at
/// most `max_tokens` tokens is returned unchanged.
std::string_view truncate_tokens(std::string_view text, std::size_t max_tokens);

/// Lowercases every code point (same rules as tokenize), leaving others intact.
std::string to_lower_utf8(std::string_view text);

}  // namespace scentrank
