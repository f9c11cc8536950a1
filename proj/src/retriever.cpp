#include "qu/retriever.hpp"

#include <algorithm>

namespace qu {

ShingleSet shingle(std::string_view text, int n) {
  if (n < 1) throw Error("shingle width must be >= 1");
  ShingleSet out;
  out.n = n;
  if (static_cast<int>(text.size()) < n) {
    std::string padded(text);
    padded.resize(static_cast<size_t>(n), ' ');
    out.shingles.insert(std::move(padded));
    return out;
  }
  for (size_t i = 0; i + static_cast<size_t>(n) <= text.size(); ++i) {
    out.shingles.insert(std::string(text.substr(i, static_cast<size_t>(n))));
  }
  return out;
}

double exact_jaccard(const ShingleSet& a, const ShingleSet& b) {
  if (a.n != b.n) throw MismatchedWidth();
  if (a.shingles.empty() && b.shingles.empty()) return 1.0;
  size_t inter = 0;
  for (const auto& s : a.shingles) {
    inter += b.shingles.count(s);
  }
  size_t uni = a.shingles.size() + b.shingles.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

MinHashSignature minhash_signature(const ShingleSet& s, int num_hashes, uint64_t seed) {
  if (num_hashes < 1) throw Error("num_hashes must be >= 1");
  if (s.shingles.empty()) throw EmptySet();
  MinHashSignature sig;
  sig.values.assign(static_cast<size_t>(num_hashes), ~0ULL);
  // one independent keyed hash per slot; keys must not slide across seeds
  std::vector<uint64_t> keys(static_cast<size_t>(num_hashes));
  for (int i = 0; i < num_hashes; ++i) {
    keys[static_cast<size_t>(i)] = mix64(mix64(seed) ^ mix64(static_cast<uint64_t>(i) + 1));
  }
  for (const auto& sh : s.shingles) {
    uint64_t base = fnv1a64(sh);
    for (int i = 0; i < num_hashes; ++i) {
      uint64_t h = mix64(base ^ keys[static_cast<size_t>(i)]);
      if (h < sig.values[static_cast<size_t>(i)]) sig.values[static_cast<size_t>(i)] = h;
    }
  }
  return sig;
}

LshIndex::LshIndex(std::vector<KnowledgeEntry> entries, const LshParams& params)
    : params_(params), entries_(std::move(entries)) {
  if (params_.bands < 1 || params_.num_hashes % params_.bands != 0)
    throw BadBanding(params_.bands, params_.num_hashes);
  if (entries_.empty()) throw Error("cannot index zero entries");
  rows_per_band_ = params_.num_hashes / params_.bands;
  band_buckets_.resize(static_cast<size_t>(params_.bands));
  entry_shingles_.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (e.surface.empty()) throw Error("knowledge entry with empty surface");
    entry_shingles_.push_back(shingle(fold_text(e.surface), params_.shingle_n));
  }
  for (size_t i = 0; i < entries_.size(); ++i) {
    MinHashSignature sig =
        minhash_signature(entry_shingles_[i], params_.num_hashes, params_.seed);
    for (int b = 0; b < params_.bands; ++b) {
      band_buckets_[static_cast<size_t>(b)][band_key(sig, b)].push_back(static_cast<int>(i));
    }
  }
}

uint64_t LshIndex::band_key(const MinHashSignature& sig, int band) const {
  uint64_t h = kFnvOffset;
  for (int r = 0; r < rows_per_band_; ++r) {
    uint64_t v = sig.values[static_cast<size_t>(band * rows_per_band_ + r)];
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (v >> (8 * byte)) & 0xFF;
      h *= kFnvPrime;
    }
  }
  return h;
}

std::vector<LshIndex::Hit> LshIndex::retrieve(std::string_view probe, int k) const {
  if (k < 1) throw Error("retrieve: k must be >= 1");
  ShingleSet probe_set = shingle(fold_text(probe), params_.shingle_n);
  MinHashSignature sig = minhash_signature(probe_set, params_.num_hashes, params_.seed);

  std::vector<int> candidates;
  for (int b = 0; b < params_.bands; ++b) {
    auto it = band_buckets_[static_cast<size_t>(b)].find(band_key(sig, b));
    if (it != band_buckets_[static_cast<size_t>(b)].end()) {
      candidates.insert(candidates.end(), it->second.begin(), it->second.end());
    }
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  std::vector<Hit> hits;
  hits.reserve(candidates.size());
  for (int idx : candidates) {
    double score = exact_jaccard(probe_set, entry_shingles_[static_cast<size_t>(idx)]);
    if (score > 0.0) hits.push_back({entries_[static_cast<size_t>(idx)], score});
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entry.id < b.entry.id;
  });
  if (static_cast<int>(hits.size()) > k) hits.resize(static_cast<size_t>(k));
  return hits;
}

int LshIndex::bucket_count_for(int entry_index) const {
  int count = 0;
  for (const auto& buckets : band_buckets_) {
    for (const auto& [key, members] : buckets) {
      if (std::find(members.begin(), members.end(), entry_index) != members.end()) ++count;
    }
  }
  return count;
}

LshIndex build_index(std::vector<KnowledgeEntry> entries, int num_hashes, int bands,
                     int shingle_n, uint64_t seed) {
  LshParams params;
  params.num_hashes = num_hashes;
  params.bands = bands;
  params.shingle_n = shingle_n;
  params.seed = seed;
  return LshIndex(std::move(entries), params);
}

}  // namespace qu
