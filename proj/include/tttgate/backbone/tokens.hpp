#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tttgate::backbone {

using Token = std::uint8_t;
inline constexpr std::size_t kVocabSize = 256;

// Byte-level identity tokenizer.
std::vector<Token> tokenize(std::string_view bytes);
std::string detokenize(std::span<const Token> tokens);

struct TokenChunk {
  std::vector<Token> tokens;
  std::vector<Token> labels;  // labels[t] follows tokens[t] in the source stream
  std::size_t sequence_id = 0;
  std::size_t chunk_index = 0;
};

// One evaluation window: seq_len inputs followed by the final label.
struct Sequence {
  std::vector<Token> window;  // seq_len + 1 tokens
  std::size_t sequence_id = 0;

  std::span<const Token> inputs() const { return std::span(window).first(window.size() - 1); }
  std::span<const Token> labels() const { return std::span(window).subspan(1); }
};

// Non-overlapping windows of seq_len + 1 tokens; the trailing remainder is dropped.
std::vector<Sequence> split_sequences(std::span<const Token> tokens, std::size_t seq_len);

std::vector<TokenChunk> chunk_sequence(const Sequence& seq, std::size_t chunk_size);

std::vector<TokenChunk> chunk_stream(std::span<const Token> tokens, std::size_t seq_len,
                                     std::size_t chunk_size);

// Seeded uniform permutation of a whole window (labels follow the permuted stream).
std::vector<Token> shuffle_within_sequence(std::span<const Token> tokens, std::uint64_t seed);

// Per-sequence shuffle with the seed derived from (seed, sequence_id).
std::vector<Sequence> shuffle_sequences(std::span<const Sequence> sequences, std::uint64_t seed);

}  // namespace tttgate::backbone
