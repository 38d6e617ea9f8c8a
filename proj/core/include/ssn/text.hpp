#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ssn {

// Lowercased word tokens. ASCII letters/digits and any non-ASCII byte count as
// word characters; everything else separates tokens.
std::vector<std::string> tokenize(std::string_view text);

// 64-bit FNV-1a. Stable across platforms, used wherever a hash feeds a value
// that must be reproducible (feature hashing, token buckets, provenance ids).
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t value);
// splitmix64 finalizer. FNV-1a low bits barely change between short tokens
// such as "20" and "73"; bucket indices are taken from the mixed value.
std::uint64_t mix64(std::uint64_t x);

// Splits on runs of terminal punctuation (. ? !) followed by whitespace or
// end of text. A period that closes a known abbreviation ("e.g.", "i.e.",
// "etc.", "dr.", "mr.", "mrs.", "ms.", "vs.", "approx.", "no.", "st.") does not
// end a sentence. Newlines also end a sentence. Pieces are whitespace-trimmed;
// text without a boundary comes back as a single sentence.
std::vector<std::string> split_sentences(std::string_view text);

}  // namespace ssn
