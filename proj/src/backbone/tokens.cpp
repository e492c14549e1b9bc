#include "tttgate/backbone/tokens.hpp"

#include "tttgate/error.hpp"
#include "tttgate/numerics/random.hpp"

namespace tttgate::backbone {

std::vector<Token> tokenize(std::string_view bytes) {
  return {reinterpret_cast<const Token*>(bytes.data()),
          reinterpret_cast<const Token*>(bytes.data()) + bytes.size()};
}

std::string detokenize(std::span<const Token> tokens) {
  return {reinterpret_cast<const char*>(tokens.data()), tokens.size()};
}

std::vector<Sequence> split_sequences(std::span<const Token> tokens, std::size_t seq_len) {
  if (seq_len == 0) throw ConfigError("seq_len must be >= 1");
  const std::size_t stride = seq_len + 1;
  std::vector<Sequence> out;
  out.reserve(tokens.size() / stride);
  for (std::size_t start = 0; start + stride <= tokens.size(); start += stride) {
    Sequence s;
    s.window.assign(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                    tokens.begin() + static_cast<std::ptrdiff_t>(start + stride));
    s.sequence_id = out.size();
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<TokenChunk> chunk_sequence(const Sequence& seq, std::size_t chunk_size) {
  const std::size_t seq_len = seq.window.size() - 1;
  if (chunk_size == 0 || seq_len % chunk_size != 0)
    throw ConfigError("chunk_size must be >= 1 and divide seq_len");
  const auto in = seq.inputs();
  const auto lab = seq.labels();
  std::vector<TokenChunk> out;
  for (std::size_t c = 0; c < seq_len / chunk_size; ++c) {
    TokenChunk ch;
    ch.tokens.assign(in.begin() + c * chunk_size, in.begin() + (c + 1) * chunk_size);
    ch.labels.assign(lab.begin() + c * chunk_size, lab.begin() + (c + 1) * chunk_size);
    ch.sequence_id = seq.sequence_id;
    ch.chunk_index = c;
    out.push_back(std::move(ch));
  }
  return out;
}

std::vector<TokenChunk> chunk_stream(std::span<const Token> tokens, std::size_t seq_len,
                                     std::size_t chunk_size) {
  if (chunk_size == 0 || seq_len == 0 || seq_len % chunk_size != 0)
    throw ConfigError("chunk_size must be >= 1 and divide seq_len");
  std::vector<TokenChunk> out;
  for (const auto& seq : split_sequences(tokens, seq_len)) {
    auto chunks = chunk_sequence(seq, chunk_size);
    for (auto& c : chunks) out.push_back(std::move(c));
  }
  return out;
}

std::vector<Token> shuffle_within_sequence(std::span<const Token> tokens, std::uint64_t seed) {
  std::vector<Token> out(tokens.begin(), tokens.end());
  Rng rng(seed);
  rng.shuffle(std::span<Token>(out));
  return out;
}

std::vector<Sequence> shuffle_sequences(std::span<const Sequence> sequences, std::uint64_t seed) {
  std::vector<Sequence> out;
  out.reserve(sequences.size());
  for (const auto& s : sequences) {
    Sequence t;
    t.sequence_id = s.sequence_id;
    t.window = shuffle_within_sequence(s.window, Rng::derive(seed, 0x5348554600000000ULL + s.sequence_id));
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace tttgate::backbone
