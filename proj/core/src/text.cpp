#include "ssn/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace ssn {

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }

bool is_terminal(char c) { return c == '.' || c == '?' || c == '!'; }

constexpr std::array<std::string_view, 11> kAbbreviations = {
    "e.g.", "i.e.", "etc.", "dr.", "mr.", "mrs.", "ms.", "vs.", "approx.", "no.", "st.",
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

// True when text[0..end) ends with an allowlisted abbreviation that starts at
// a word boundary.
bool ends_with_abbreviation(std::string_view text, std::size_t end) {
    for (auto abbr : kAbbreviations) {
        if (end < abbr.size()) continue;
        const std::size_t start = end - abbr.size();
        bool match = true;
        for (std::size_t i = 0; i < abbr.size(); ++i) {
            if (std::tolower(static_cast<unsigned char>(text[start + i])) != abbr[i]) {
                match = false;
                break;
            }
        }
        if (!match) continue;
        if (start == 0 || !is_word_byte(static_cast<unsigned char>(text[start - 1]))) return true;
    }
    return false;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_word_byte(c)) {
            cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::uint64_t mix64(std::uint64_t x) {
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = kDigits[value & 0xF];
        value >>= 4;
    }
    return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    std::size_t i = 0;
    // Pieces without any word character (a stray "..." or "?!") are glued to
    // a neighbouring sentence instead of standing alone.
    std::string pending;
    auto emit = [&](std::size_t end) {
        auto piece = trim(text.substr(start, end - start));
        start = end;
        if (piece.empty()) return;
        const bool wordless = std::none_of(piece.begin(), piece.end(),
                                           [](char ch) { return is_word_byte(static_cast<unsigned char>(ch)); });
        if (wordless) {
            if (!out.empty()) {
                out.back() += ' ';
                out.back() += piece;
            } else {
                if (!pending.empty()) pending += ' ';
                pending += piece;
            }
            return;
        }
        if (pending.empty()) {
            out.emplace_back(piece);
        } else {
            out.push_back(pending + ' ' + std::string(piece));
            pending.clear();
        }
    };
    while (i < text.size()) {
        const char c = text[i];
        if (c == '\n') {
            emit(i);
            ++i;
            start = i;
            continue;
        }
        if (!is_terminal(c)) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && is_terminal(text[j])) ++j;
        const bool at_boundary = j == text.size() || is_space(text[j]);
        const bool abbreviation = j == i + 1 && c == '.' && ends_with_abbreviation(text, j);
        if (at_boundary && !abbreviation) emit(j);
        i = j;
    }
    emit(text.size());
    if (out.empty() && !pending.empty()) out.push_back(pending);
    return out;
}

}  // namespace ssn
