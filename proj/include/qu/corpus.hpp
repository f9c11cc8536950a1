#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qu/common.hpp"

namespace qu {

// --- domain types ---

enum class ProductLine : int { MediaLine = 0, SoftLine = 1, HardLine = 2, Consumable = 3 };
std::string_view line_name(ProductLine line);
ProductLine line_from_name(std::string_view name);

enum class Esci : int { Exact = 0, Substitute = 1, Complement = 2, Irrelevant = 3 };
std::string_view esci_name(Esci e);
Esci esci_from_name(std::string_view name);

enum class EntityType : int { Brand = 0, Color = 1, ProductType = 2, Title = 3 };
constexpr int kNumEntityTypes = 4;
std::string_view entity_type_name(EntityType t);
EntityType entity_type_from_name(std::string_view name);

// Token-indexed entity span, end exclusive.
struct EntitySpan {
  int start = 0;
  int end = 0;
  EntityType type = EntityType::Brand;
  std::string surface;

  bool operator==(const EntitySpan&) const = default;
};

struct Query {
  std::string id;
  std::string text;         // folded token stream
  std::string marketplace;  // e.g. "US"
  int64_t frequency = 0;    // impressions

  // training annotations carried alongside the raw query
  std::vector<EntitySpan> gold_spans;
  std::vector<std::string> intent_labels;  // positive multi-label names

  bool operator==(const Query&) const = default;
};

struct Product {
  std::string id;
  std::string title;
  std::optional<std::string> brand;
  std::optional<std::string> color;
  std::string product_type;
  double price = 0.0;
  ProductLine line = ProductLine::HardLine;

  bool operator==(const Product&) const = default;
};

struct JudgedPair {
  std::string query_id;
  std::string product_id;
  Esci esci = Esci::Irrelevant;
  int64_t clicks = 0;
  int64_t purchases = 0;

  bool operator==(const JudgedPair&) const = default;
};

enum class TurnKind : int { Keyword = 0, Question = 1 };

struct SessionTurn {
  std::string utterance;
  TurnKind kind = TurnKind::Keyword;
  std::optional<std::string> intent;  // planted question-intent label: P/H/G/S
  std::vector<EntitySpan> gold_spans;

  bool operator==(const SessionTurn&) const = default;
};

struct Session {
  std::string id;
  std::vector<SessionTurn> turns;

  bool operator==(const Session&) const = default;
};

struct SyntheticConfig {
  uint64_t seed = 42;
  int n_queries = 400;
  int n_products = 300;
  int n_sessions = 60;
  int n_brands = 40;
  int n_colors = 12;
  int n_product_types = 30;
  int n_titles = 50;
  double brand_in_query_rate = 0.45;
  double color_in_query_rate = 0.35;
  double title_query_rate = 0.15;
  double noise_rate = 0.05;
  std::vector<std::string> marketplaces = {"US", "UK", "DE"};
};

// Gazetteer: entity type -> list of surfaces (folded, id = position).
using Gazetteer = std::map<EntityType, std::vector<std::string>>;

struct Dataset {
  std::vector<Query> queries;
  std::vector<Product> products;
  std::vector<JudgedPair> judgments;
  std::vector<Session> sessions;
  Gazetteer gazetteer;
};

// --- errors ---

struct MalformedLine : Error {
  int line_no;
  explicit MalformedLine(int line)
      : Error("malformed line " + std::to_string(line)), line_no(line) {}
};

struct DuplicateId : Error {
  std::string id;
  int line_no;
  DuplicateId(std::string dup, int line)
      : Error("duplicate id \"" + dup + "\" on line " + std::to_string(line)),
        id(std::move(dup)),
        line_no(line) {}
};

struct InvalidPrice : Error {
  std::string id;
  explicit InvalidPrice(std::string pid)
      : Error("invalid price for product \"" + pid + "\""), id(std::move(pid)) {}
};

struct InvalidConfig : Error {
  explicit InvalidConfig(const std::string& why) : Error("invalid config: " + why) {}
};

struct EmptySplit : Error {
  explicit EmptySplit(const std::string& side) : Error("empty split: " + side) {}
};

// --- file IO (line-delimited JSON; gazetteers as TSV) ---

std::vector<Product> load_catalog(const std::string& path);
std::vector<Query> load_queries(const std::string& path);
std::vector<JudgedPair> load_judgments(const std::string& path);
std::vector<Session> load_sessions(const std::string& path);
std::vector<std::string> load_gazetteer_tsv(const std::string& path);

std::string serialize_catalog(const std::vector<Product>& products);
std::string serialize_queries(const std::vector<Query>& queries);
std::string serialize_judgments(const std::vector<JudgedPair>& judgments);
std::string serialize_sessions(const std::vector<Session>& sessions);
std::string serialize_gazetteer_tsv(const std::vector<std::string>& entries);

// Writes catalog.jsonl, queries.jsonl, judgments.jsonl, sessions.jsonl and
// gazetteer.<type>.tsv into `dir` (created if missing).
void write_dataset(const Dataset& dataset, const std::string& dir);
Dataset load_dataset(const std::string& dir);

// --- synthetic generation ---

Dataset generate_synthetic(const SyntheticConfig& cfg);

// The planted engagement model, exposed so tests can re-sample labels.
// match_count is the number of query attributes the product satisfies.
double planted_click_probability(int match_count);
double planted_purchase_probability(int match_count);
// Impressions used when sampling engagement for a query of this frequency.
int64_t planted_impressions(int64_t frequency);
std::pair<int64_t, int64_t> sample_engagement(Rng& rng, int match_count, int64_t impressions);

// Number of attributes of `truth` (gold spans of a query) matched by `product`.
int attribute_match_count(const Query& query, const Product& product);

// --- splitting ---

struct SplitResult {
  std::vector<Query> train;
  std::vector<Query> support;
};

// Disjoint by query id, union = input, deterministic; stratified so every
// populated stratum lands members in the support split when possible.
SplitResult split_support(const std::vector<Query>& queries, double support_fraction,
                          uint64_t seed);

// Count of products whose searchable text contains every given token.
// Used by the sparse-result-rate experiments.
int count_products_matching_all_tokens(const std::vector<Product>& products,
                                       const std::vector<std::string>& tokens);

}  // namespace qu
