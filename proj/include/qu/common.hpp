#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qu {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& what) : Error("dimension mismatch: " + what) {}
};

struct EmptyTrainingSet : Error {
  EmptyTrainingSet() : Error("empty training set") {}
};

// --- deterministic hashing (never std::hash: results must be stable across builds) ---

constexpr uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr uint64_t kFnvPrime = 1099511628211ULL;

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = kFnvOffset;
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

inline uint64_t mix64(uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Seeded string hash; distinct `key` values give independent hash functions.
inline uint64_t hash64(std::string_view s, uint64_t key) {
  return mix64(fnv1a64(s) ^ mix64(key));
}

// --- deterministic RNG ---
// splitmix64 stream. Self-contained so generated datasets are bit-identical
// regardless of standard library version.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), state_(mix64(seed)) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  int uniform_int(int n) {
    if (n <= 0) throw Error("Rng::uniform_int: n must be positive");
    return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; consumes two draws per call.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <typename T>
  const T& pick(const std::vector<T>& items) {
    if (items.empty()) throw Error("Rng::pick: empty list");
    return items[static_cast<size_t>(uniform_int(static_cast<int>(items.size())))];
  }

  // Independent child stream; parent state untouched.
  Rng fork(uint64_t salt) const { return Rng(mix64(seed_ ^ mix64(salt))); }

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  uint64_t state_;
};

// --- text normalization ---
// All ingested text is case-folded (ASCII) and tokenized on whitespace and
// punctuation. Non-ASCII bytes pass through untouched.

std::string fold_text(std::string_view text);
std::vector<std::string> tokenize(std::string_view text);
bool is_stopword(const std::string& token);
std::vector<std::string> content_tokens(const std::vector<std::string>& tokens);
std::string join_tokens(std::span<const std::string> tokens, std::string_view sep = " ");

// Jaccard over two token sets; both empty -> 1.0.
double token_jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);

}  // namespace qu
