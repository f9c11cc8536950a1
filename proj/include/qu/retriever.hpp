#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "qu/common.hpp"
#include "qu/corpus.hpp"

namespace qu {

struct MismatchedWidth : Error {
  MismatchedWidth() : Error("shingle widths differ") {}
};
struct EmptySet : Error {
  EmptySet() : Error("empty shingle set") {}
};
struct BadBanding : Error {
  BadBanding(int bands, int num_hashes)
      : Error("bands (" + std::to_string(bands) + ") must divide num_hashes (" +
              std::to_string(num_hashes) + ")") {}
};

struct ShingleSet {
  int n = 3;
  std::set<std::string> shingles;
};

// Character n-grams of `text`; shorter inputs yield the text padded to width n.
ShingleSet shingle(std::string_view text, int n);

double exact_jaccard(const ShingleSet& a, const ShingleSet& b);

struct MinHashSignature {
  std::vector<uint64_t> values;
  int num_hashes() const { return static_cast<int>(values.size()); }
};

MinHashSignature minhash_signature(const ShingleSet& s, int num_hashes, uint64_t seed);

struct KnowledgeEntry {
  int id = 0;
  std::string surface;
  EntityType entity_type = EntityType::Brand;
};

struct LshParams {
  int num_hashes = 128;
  int bands = 32;
  int shingle_n = 3;
  uint64_t seed = 0x9a3c5e17;
};

// Immutable after construction; safe for concurrent retrieval.
class LshIndex {
 public:
  LshIndex(std::vector<KnowledgeEntry> entries, const LshParams& params);

  struct Hit {
    KnowledgeEntry entry;
    double score;  // exact Jaccard, reproducible by a brute-force scan
  };

  // Candidates from the probe's band buckets, re-scored by exact Jaccard,
  // top-k descending with ties broken by entry id ascending.
  std::vector<Hit> retrieve(std::string_view probe, int k) const;

  const LshParams& params() const { return params_; }
  const std::vector<KnowledgeEntry>& entries() const { return entries_; }

  // Exposed for index-shape tests.
  int bucket_count_for(int entry_index) const;

 private:
  LshParams params_;
  int rows_per_band_;
  std::vector<KnowledgeEntry> entries_;
  std::vector<ShingleSet> entry_shingles_;
  std::vector<std::unordered_map<uint64_t, std::vector<int>>> band_buckets_;

  uint64_t band_key(const MinHashSignature& sig, int band) const;
};

LshIndex build_index(std::vector<KnowledgeEntry> entries, int num_hashes, int bands,
                     int shingle_n = 3, uint64_t seed = 0x9a3c5e17);

}  // namespace qu
