#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace graphdoc {

std::uint64_t fnv1a64(std::string_view s);

/// Lowercases, splits on non-alphanumeric runs, hashes each token (FNV-1a
/// 64-bit) into [0, vocab_buckets), truncating to max_tokens ids.
std::vector<std::uint64_t> tokenize(std::string_view text, std::size_t vocab_buckets,
                                    std::size_t max_tokens);

/// The raw lowercase token strings, same splitting rule as tokenize().
/// Used by the lexical index, which needs terms rather than bucket ids.
std::vector<std::string> tokenize_words(std::string_view text);

std::vector<std::string> split_sentences(std::string_view text);

std::size_t count_words(std::string_view text);

/// Greedy sentence packing into ~target_words passages. A passage closes
/// when the next sentence would push it past target_words; a single
/// sentence longer than 2*target_words is hard-split at word boundaries
/// into target_words-sized chunks. The concatenated output preserves the
/// input word sequence.
std::vector<std::string> split_into_passages(std::string_view text,
                                             std::size_t target_words = 100);

} // namespace graphdoc
