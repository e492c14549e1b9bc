#include "tttgate/backbone/corpus.hpp"

#include <algorithm>
#include <array>

#include "tttgate/error.hpp"
#include "tttgate/io/binary.hpp"
#include "tttgate/numerics/random.hpp"

namespace tttgate::backbone {

namespace fs = std::filesystem;

std::vector<std::uint8_t> encode_corpus(std::span<const Token> tokens) {
  io::BinaryWriter w;
  w.magic(kCorpusMagic);
  w.u32(kCorpusVersion);
  w.u64(tokens.size());
  w.bytes(tokens);
  return w.buffer();
}

std::vector<Token> decode_corpus(std::vector<std::uint8_t> bytes) {
  io::BinaryReader r(std::move(bytes));
  r.expect_magic(kCorpusMagic);
  if (const auto v = r.u32(); v != kCorpusVersion)
    throw IoError("corpus: unsupported version " + std::to_string(v));
  const auto n = r.u64();
  if (n != r.remaining()) throw IoError("corpus: token count does not match payload size");
  return r.bytes(static_cast<std::size_t>(n));
}

void save_corpus(const fs::path& path, std::span<const Token> tokens) {
  const auto buf = encode_corpus(tokens);
  io::write_file_atomic(path, {reinterpret_cast<const char*>(buf.data()), buf.size()});
}

namespace {

bool has_corpus_magic(const std::vector<std::uint8_t>& bytes) {
  return bytes.size() >= kCorpusMagic.size() &&
         std::equal(kCorpusMagic.begin(), kCorpusMagic.end(), bytes.begin());
}

}  // namespace

std::vector<Token> load_corpus(const fs::path& path) {
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(path))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<Token> out;
    for (const auto& f : files) {
      const auto b = io::read_file_bytes(f);
      out.insert(out.end(), b.begin(), b.end());
    }
    if (out.empty()) throw IoError("corpus directory is empty: " + path.string());
    return out;
  }
  auto bytes = io::read_file_bytes(path);
  if (path.extension() == ".bin" || has_corpus_magic(bytes)) return decode_corpus(std::move(bytes));
  return bytes;
}

SynthPattern parse_pattern(std::string_view name) {
  if (name == "mixed") return SynthPattern::kMixed;
  if (name == "constant") return SynthPattern::kConstant;
  if (name == "random") return SynthPattern::kRandom;
  throw ConfigError("unknown synth pattern '" + std::string(name) + "' (mixed|constant|random)");
}

std::string_view to_string(SynthPattern p) noexcept {
  switch (p) {
    case SynthPattern::kMixed: return "mixed";
    case SynthPattern::kConstant: return "constant";
    case SynthPattern::kRandom: return "random";
  }
  return "?";
}

namespace {

Token printable(Rng& rng) { return static_cast<Token>(32 + rng.below(95)); }

void fill_mixed(Rng& rng, std::vector<Token>& out, std::size_t target) {
  constexpr std::array<Real, 3> kNoise{0.0, 0.05, 0.15};
  while (out.size() < target) {
    const bool noise_segment = rng.uniform() < 0.25;
    const auto seg = static_cast<std::size_t>(32 + rng.below(128));
    if (noise_segment) {
      for (std::size_t i = 0; i < seg; ++i) out.push_back(printable(rng));
      continue;
    }
    std::vector<Token> tmpl(4 + rng.below(20));
    for (auto& c : tmpl) c = static_cast<Token>('a' + rng.below(26));
    const Real p = kNoise[rng.below(kNoise.size())];
    for (std::size_t i = 0; i < seg; ++i) {
      const Token c = tmpl[i % tmpl.size()];
      out.push_back(rng.uniform() < p ? printable(rng) : c);
    }
  }
  out.resize(target);
}

}  // namespace

std::vector<Token> synth_corpus(const SynthOptions& o) {
  if (o.sequences == 0) throw ConfigError("synth: need at least one sequence");
  if (o.seq_len == 0) throw ConfigError("synth: seq_len must be >= 1");
  Rng rng(o.seed);
  const std::size_t stride = o.seq_len + 1;
  std::vector<Token> out;
  out.reserve(o.sequences * stride);
  const Token constant = static_cast<Token>('a' + rng.below(26));
  for (std::size_t s = 0; s < o.sequences; ++s) {
    const std::size_t target = (s + 1) * stride;
    switch (o.pattern) {
      case SynthPattern::kMixed: fill_mixed(rng, out, target); break;
      case SynthPattern::kConstant: out.resize(target, constant); break;
      case SynthPattern::kRandom:
        while (out.size() < target) out.push_back(printable(rng));
        break;
    }
  }
  return out;
}

}  // namespace tttgate::backbone
