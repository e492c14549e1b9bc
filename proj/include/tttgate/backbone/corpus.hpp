#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "tttgate/backbone/tokens.hpp"

namespace tttgate::backbone {

// .bin token stream: "TTGC", u32 version, u64 token count, one byte per token.
inline constexpr std::string_view kCorpusMagic = "TTGC";
inline constexpr std::uint32_t kCorpusVersion = 1;

std::vector<std::uint8_t> encode_corpus(std::span<const Token> tokens);
std::vector<Token> decode_corpus(std::vector<std::uint8_t> bytes);

void save_corpus(const std::filesystem::path& path, std::span<const Token> tokens);

// A .bin stream, a single text file, or a directory whose regular files are
// concatenated in lexicographic path order.
std::vector<Token> load_corpus(const std::filesystem::path& path);

enum class SynthPattern { kMixed, kConstant, kRandom };

SynthPattern parse_pattern(std::string_view name);
std::string_view to_string(SynthPattern p) noexcept;

struct SynthOptions {
  std::uint64_t seed = 42;
  std::size_t sequences = 128;
  std::size_t seq_len = 256;
  SynthPattern pattern = SynthPattern::kMixed;
};

// Patterned byte corpus, sequences * (seq_len + 1) tokens.
//   mixed:    segments of 32..159 bytes; a quarter are printable noise, the rest
//             repeat a 4..23-letter template with 0, 5 or 15 % substitutions
//   constant: one seeded byte value repeated
//   random:   printable noise only
std::vector<Token> synth_corpus(const SynthOptions& options);

}  // namespace tttgate::backbone
