#include "scentrank/tokenizer.hpp"

#include <clocale>
#include <cwctype>
#include <locale.h>

namespace scentrank {
namespace {

constexpr char32_t kInvalid = 0xFFFFFFFF;

/// Decodes one UTF-8 sequence at `pos`, advancing it. Malformed input yields
/// kInvalid and consumes one byte.
char32_t decode(std::string_view s, std::size_t& pos) {
    auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
    unsigned char lead = byte(pos);
    if (lead < 0x80) {
        ++pos;
        return lead;
    }
    std::size_t len = 0;
    char32_t cp = 0;
    if ((lead & 0xE0) == 0xC0) {
        len = 2;
        cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
        len = 3;
        cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
        len = 4;
        cp = lead & 0x07;
    } else {
        ++pos;
        return kInvalid;
    }
    if (pos + len > s.size()) {
        ++pos;
        return kInvalid;
    }
    for (std::size_t i = 1; i < len; ++i) {
        unsigned char c = byte(pos + i);
        if ((c & 0xC0) != 0x80) {
            ++pos;
            return kInvalid;
        }
        cp = (cp << 6) | (c & 0x3F);
    }
    static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
        ++pos;
        return kInvalid;
    }
    pos += len;
    return cp;
}

void encode(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

/// Unicode character classes come from glibc's C.UTF-8 locale. It is created
/// once and never freed.
locale_t unicode_locale() {
    static locale_t loc = [] {
        locale_t l = newlocale(LC_ALL_MASK, "C.UTF-8", static_cast<locale_t>(0));
        if (!l) l = newlocale(LC_ALL_MASK, "C.utf8", static_cast<locale_t>(0));
        if (!l) l = newlocale(LC_ALL_MASK, "en_US.UTF-8", static_cast<locale_t>(0));
        return l;
    }();
    return loc;
}

bool is_word_char(char32_t cp) {
    if (cp == kInvalid) return false;
    if (cp < 0x80) {
        return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    }
    if (locale_t loc = unicode_locale()) return iswalnum_l(static_cast<wint_t>(cp), loc) != 0;
    return true;
}

char32_t lower(char32_t cp) {
    if (cp < 0x80) return (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
    if (locale_t loc = unicode_locale()) return static_cast<char32_t>(towlower_l(static_cast<wint_t>(cp), loc));
    return cp;
}

}  // namespace

std::vector<TokenSpan> token_spans(std::string_view text) {
    std::vector<TokenSpan> spans;
    std::size_t pos = 0;
    bool in_token = false;
    std::size_t start = 0;
    while (pos < text.size()) {
        std::size_t at = pos;
        bool word = is_word_char(decode(text, pos));
        if (word && !in_token) {
            start = at;
            in_token = true;
        } else if (!word && in_token) {
            spans.push_back({start, at});
            in_token = false;
        }
    }
    if (in_token) spans.push_back({start, text.size()});
    return spans;
}

std::string to_lower_utf8(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t at = pos;
        char32_t cp = decode(text, pos);
        if (cp == kInvalid) {
            out.append(text.substr(at, pos - at));
        } else {
            encode(lower(cp), out);
        }
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    for (const auto& span : token_spans(text)) tokens.push_back(to_lower_utf8(text.substr(span.begin, span.end - span.begin)));
    return tokens;
}

std::string_view truncate_tokens(std::string_view text, std::size_t max_tokens) {
    auto spans = token_spans(text);
    if (spans.size() <= max_tokens) return text;
    if (max_tokens == 0) return text.substr(0, 0);
    return text.substr(0, spans[max_tokens - 1].end);
}

}  // namespace scentrank
