#include "qu/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace qu {

using nlohmann::json;

std::string_view line_name(ProductLine line) {
  switch (line) {
    case ProductLine::MediaLine: return "MediaLine";
    case ProductLine::SoftLine: return "SoftLine";
    case ProductLine::HardLine: return "HardLine";
    case ProductLine::Consumable: return "Consumable";
  }
  throw Error("line_name: bad line");
}

ProductLine line_from_name(std::string_view name) {
  if (name == "MediaLine") return ProductLine::MediaLine;
  if (name == "SoftLine") return ProductLine::SoftLine;
  if (name == "HardLine") return ProductLine::HardLine;
  if (name == "Consumable") return ProductLine::Consumable;
  throw Error("unknown product line: " + std::string(name));
}

std::string_view esci_name(Esci e) {
  switch (e) {
    case Esci::Exact: return "E";
    case Esci::Substitute: return "S";
    case Esci::Complement: return "C";
    case Esci::Irrelevant: return "I";
  }
  throw Error("esci_name: bad label");
}

Esci esci_from_name(std::string_view name) {
  if (name == "E") return Esci::Exact;
  if (name == "S") return Esci::Substitute;
  if (name == "C") return Esci::Complement;
  if (name == "I") return Esci::Irrelevant;
  throw Error("unknown esci label: " + std::string(name));
}

std::string_view entity_type_name(EntityType t) {
  switch (t) {
    case EntityType::Brand: return "brand";
    case EntityType::Color: return "color";
    case EntityType::ProductType: return "product_type";
    case EntityType::Title: return "title";
  }
  throw Error("entity_type_name: bad type");
}

EntityType entity_type_from_name(std::string_view name) {
  if (name == "brand") return EntityType::Brand;
  if (name == "color") return EntityType::Color;
  if (name == "product_type") return EntityType::ProductType;
  if (name == "title") return EntityType::Title;
  throw Error("unknown entity type: " + std::string(name));
}

// --- JSON record mapping, canonical form (alphabetical keys, one object per line) ---

namespace {

json span_to_json(const EntitySpan& s) {
  return json{{"end", s.end},
              {"start", s.start},
              {"surface", s.surface},
              {"type", std::string(entity_type_name(s.type))}};
}

EntitySpan span_from_json(const json& j) {
  EntitySpan s;
  s.start = j.at("start").get<int>();
  s.end = j.at("end").get<int>();
  s.surface = j.at("surface").get<std::string>();
  s.type = entity_type_from_name(j.at("type").get<std::string>());
  return s;
}

json query_to_json(const Query& q) {
  json j{{"frequency", q.frequency},
         {"id", q.id},
         {"marketplace", q.marketplace},
         {"text", q.text}};
  if (!q.intent_labels.empty()) j["intent_labels"] = q.intent_labels;
  if (!q.gold_spans.empty()) {
    json spans = json::array();
    for (const auto& s : q.gold_spans) spans.push_back(span_to_json(s));
    j["spans"] = spans;
  }
  return j;
}

Query query_from_json(const json& j) {
  Query q;
  q.id = j.at("id").get<std::string>();
  q.text = j.at("text").get<std::string>();
  q.marketplace = j.at("marketplace").get<std::string>();
  q.frequency = j.at("frequency").get<int64_t>();
  if (j.contains("intent_labels")) q.intent_labels = j.at("intent_labels").get<std::vector<std::string>>();
  if (j.contains("spans")) {
    for (const auto& js : j.at("spans")) q.gold_spans.push_back(span_from_json(js));
  }
  return q;
}

json product_to_json(const Product& p) {
  json j{{"id", p.id},
         {"line", std::string(line_name(p.line))},
         {"price", p.price},
         {"product_type", p.product_type},
         {"title", p.title}};
  if (p.brand) j["brand"] = *p.brand;
  if (p.color) j["color"] = *p.color;
  return j;
}

Product product_from_json(const json& j) {
  Product p;
  p.id = j.at("id").get<std::string>();
  p.title = j.at("title").get<std::string>();
  p.product_type = j.at("product_type").get<std::string>();
  p.price = j.at("price").get<double>();
  p.line = line_from_name(j.at("line").get<std::string>());
  if (j.contains("brand")) p.brand = j.at("brand").get<std::string>();
  if (j.contains("color")) p.color = j.at("color").get<std::string>();
  return p;
}

json judgment_to_json(const JudgedPair& jp) {
  return json{{"clicks", jp.clicks},
              {"esci", std::string(esci_name(jp.esci))},
              {"product_id", jp.product_id},
              {"purchases", jp.purchases},
              {"query_id", jp.query_id}};
}

JudgedPair judgment_from_json(const json& j) {
  JudgedPair jp;
  jp.query_id = j.at("query_id").get<std::string>();
  jp.product_id = j.at("product_id").get<std::string>();
  jp.esci = esci_from_name(j.at("esci").get<std::string>());
  jp.clicks = j.at("clicks").get<int64_t>();
  jp.purchases = j.at("purchases").get<int64_t>();
  return jp;
}

json session_to_json(const Session& s) {
  json turns = json::array();
  for (const auto& t : s.turns) {
    json jt{{"kind", t.kind == TurnKind::Keyword ? "keyword" : "question"},
            {"utterance", t.utterance}};
    if (t.intent) jt["intent"] = *t.intent;
    if (!t.gold_spans.empty()) {
      json spans = json::array();
      for (const auto& sp : t.gold_spans) spans.push_back(span_to_json(sp));
      jt["spans"] = spans;
    }
    turns.push_back(jt);
  }
  return json{{"id", s.id}, {"turns", turns}};
}

Session session_from_json(const json& j) {
  Session s;
  s.id = j.at("id").get<std::string>();
  for (const auto& jt : j.at("turns")) {
    SessionTurn t;
    t.utterance = jt.at("utterance").get<std::string>();
    std::string kind = jt.at("kind").get<std::string>();
    if (kind == "keyword") {
      t.kind = TurnKind::Keyword;
    } else if (kind == "question") {
      t.kind = TurnKind::Question;
    } else {
      throw Error("unknown turn kind: " + kind);
    }
    if (jt.contains("intent")) t.intent = jt.at("intent").get<std::string>();
    if (jt.contains("spans")) {
      for (const auto& js : jt.at("spans")) t.gold_spans.push_back(span_from_json(js));
    }
    s.turns.push_back(std::move(t));
  }
  return s;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

template <typename T, typename ParseFn, typename IdFn, typename ValidateFn>
std::vector<T> load_jsonl(const std::string& path, ParseFn parse, IdFn get_id,
                          ValidateFn validate) {
  std::vector<T> out;
  std::unordered_set<std::string> seen;
  int line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw MalformedLine(line_no);
    }
    T rec;
    try {
      rec = parse(j);
    } catch (const json::exception&) {
      throw MalformedLine(line_no);
    }
    std::string id = get_id(rec);
    if (!id.empty()) {
      if (!seen.insert(id).second) throw DuplicateId(id, line_no);
    }
    validate(rec, line_no);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

std::vector<Product> load_catalog(const std::string& path) {
  return load_jsonl<Product>(
      path, product_from_json, [](const Product& p) { return p.id; },
      [](const Product& p, int line_no) {
        if (!(p.price > 0.0)) throw InvalidPrice(p.id);
        if (p.product_type.empty()) throw MalformedLine(line_no);
      });
}

std::vector<Query> load_queries(const std::string& path) {
  return load_jsonl<Query>(
      path, query_from_json, [](const Query& q) { return q.id; },
      [](const Query& q, int line_no) {
        if (fold_text(q.text).empty()) throw MalformedLine(line_no);
        if (q.marketplace.empty()) throw MalformedLine(line_no);
        if (q.frequency < 0) throw MalformedLine(line_no);
      });
}

std::vector<JudgedPair> load_judgments(const std::string& path) {
  return load_jsonl<JudgedPair>(
      path, judgment_from_json, [](const JudgedPair&) { return std::string(); },
      [](const JudgedPair& jp, int line_no) {
        if (jp.purchases > jp.clicks || jp.clicks < 0 || jp.purchases < 0)
          throw MalformedLine(line_no);
      });
}

std::vector<Session> load_sessions(const std::string& path) {
  return load_jsonl<Session>(
      path, session_from_json, [](const Session& s) { return s.id; },
      [](const Session& s, int line_no) {
        if (s.turns.empty()) throw MalformedLine(line_no);
      });
}

std::vector<std::string> load_gazetteer_tsv(const std::string& path) {
  std::vector<std::string> out;
  int line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos) throw MalformedLine(line_no);
    out.push_back(line.substr(0, tab));
  }
  return out;
}

namespace {

template <typename T, typename ToJson>
std::string serialize_jsonl(const std::vector<T>& records, ToJson to_json_fn) {
  std::string out;
  for (const auto& r : records) {
    out += to_json_fn(r).dump();
    out += '\n';
  }
  return out;
}

}  // namespace

std::string serialize_catalog(const std::vector<Product>& products) {
  return serialize_jsonl(products, product_to_json);
}
std::string serialize_queries(const std::vector<Query>& queries) {
  return serialize_jsonl(queries, query_to_json);
}
std::string serialize_judgments(const std::vector<JudgedPair>& judgments) {
  return serialize_jsonl(judgments, judgment_to_json);
}
std::string serialize_sessions(const std::vector<Session>& sessions) {
  return serialize_jsonl(sessions, session_to_json);
}

std::string serialize_gazetteer_tsv(const std::vector<std::string>& entries) {
  std::string out;
  for (size_t i = 0; i < entries.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "%05zu", i);
    out += entries[i];
    out += '\t';
    out += id;
    out += '\n';
  }
  return out;
}

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path);
  out << content;
}

}  // namespace

void write_dataset(const Dataset& dataset, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir + "/catalog.jsonl", serialize_catalog(dataset.products));
  write_file(dir + "/queries.jsonl", serialize_queries(dataset.queries));
  write_file(dir + "/judgments.jsonl", serialize_judgments(dataset.judgments));
  write_file(dir + "/sessions.jsonl", serialize_sessions(dataset.sessions));
  for (const auto& [type, entries] : dataset.gazetteer) {
    write_file(dir + "/gazetteer." + std::string(entity_type_name(type)) + ".tsv",
               serialize_gazetteer_tsv(entries));
  }
}

Dataset load_dataset(const std::string& dir) {
  Dataset d;
  d.products = load_catalog(dir + "/catalog.jsonl");
  d.queries = load_queries(dir + "/queries.jsonl");
  d.judgments = load_judgments(dir + "/judgments.jsonl");
  d.sessions = load_sessions(dir + "/sessions.jsonl");
  for (int i = 0; i < kNumEntityTypes; ++i) {
    EntityType t = static_cast<EntityType>(i);
    d.gazetteer[t] =
        load_gazetteer_tsv(dir + "/gazetteer." + std::string(entity_type_name(t)) + ".tsv");
  }
  return d;
}

// --- synthetic generation ---

namespace {

struct TypeEntry {
  const char* name;
  ProductLine line;
};

// Interleaved so any prefix covers all four lines.
const std::vector<TypeEntry>& core_types() {
  static const std::vector<TypeEntry> kTypes = {
      {"dvd", ProductLine::MediaLine},      {"shoes", ProductLine::SoftLine},
      {"chair", ProductLine::HardLine},     {"shampoo", ProductLine::Consumable},
      {"vinyl", ProductLine::MediaLine},    {"jacket", ProductLine::SoftLine},
      {"lamp", ProductLine::HardLine},      {"vitamins", ProductLine::Consumable},
      {"novel", ProductLine::MediaLine},    {"boots", ProductLine::SoftLine},
      {"headphones", ProductLine::HardLine}, {"coffee", ProductLine::Consumable},
      {"poster", ProductLine::MediaLine},   {"backpack", ProductLine::SoftLine},
      {"blender", ProductLine::HardLine},   {"tea", ProductLine::Consumable},
      {"puzzle", ProductLine::MediaLine},   {"scarf", ProductLine::SoftLine},
      {"desk", ProductLine::HardLine},      {"cereal", ProductLine::Consumable},
      {"magazine", ProductLine::MediaLine}, {"sweater", ProductLine::SoftLine},
      {"monitor", ProductLine::HardLine},   {"detergent", ProductLine::Consumable},
      {"keyboard", ProductLine::HardLine},  {"kettle", ProductLine::HardLine},
      {"vacuum", ProductLine::HardLine},    {"drill", ProductLine::HardLine},
      {"camera", ProductLine::HardLine},    {"mattress", ProductLine::HardLine},
  };
  return kTypes;
}

const std::vector<std::string>& core_colors() {
  static const std::vector<std::string> kColors = {
      "red",  "blue", "green",  "black",  "white", "silver",
      "pink", "navy", "teal",   "orange", "purple", "gray"};
  return kColors;
}

const std::vector<std::string>& core_brands() {
  static const std::vector<std::string> kBrands = {"nike", "acme", "sony", "zenbrook", "apexon"};
  return kBrands;
}

// Title words double as ordinary modifiers elsewhere, so titles are only
// resolvable through the gazetteer.
const std::vector<std::string>& title_word_pool() {
  static const std::vector<std::string> kWords = {
      "midnight", "garden", "river",  "storm",  "winter", "summer", "golden",
      "silent",   "shadow", "stone",  "fire",   "crimson", "hidden", "lost",
      "broken",   "secret", "island", "valley", "echo",   "frost"};
  return kWords;
}

std::string pseudo_word(Rng& rng) {
  static const std::vector<std::string> kSyllables = {
      "ba", "ce", "do", "fu", "gi", "ha", "ke", "li", "mo", "nu",  "pa", "re",
      "so", "ta", "ve", "wi", "xo", "yu", "za", "chi", "bro", "dan", "el", "lor"};
  int n = 2 + rng.uniform_int(2);
  std::string w;
  for (int i = 0; i < n; ++i) w += rng.pick(kSyllables);
  return w;
}

std::vector<std::string> build_lexicon(Rng rng, const std::vector<std::string>& core, int n) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& w : core) {
    if (static_cast<int>(out.size()) >= n) break;
    if (seen.insert(w).second) out.push_back(w);
  }
  while (static_cast<int>(out.size()) < n) {
    std::string w = pseudo_word(rng);
    if (seen.insert(w).second) out.push_back(w);
  }
  return out;
}

struct TypeLexicon {
  std::vector<std::string> names;
  std::vector<ProductLine> lines;
};

TypeLexicon build_type_lexicon(Rng rng, int n) {
  TypeLexicon lex;
  std::unordered_set<std::string> seen;
  for (const auto& [name, line] : core_types()) {
    if (static_cast<int>(lex.names.size()) >= n) break;
    if (seen.insert(name).second) {
      lex.names.emplace_back(name);
      lex.lines.push_back(line);
    }
  }
  while (static_cast<int>(lex.names.size()) < n) {
    std::string w = pseudo_word(rng);
    if (seen.insert(w).second) {
      lex.names.push_back(w);
      lex.lines.push_back(static_cast<ProductLine>(rng.uniform_int(4)));
    }
  }
  return lex;
}

std::vector<std::string> build_titles(Rng rng, int n) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  const auto& pool = title_word_pool();
  int attempts = 0;
  while (static_cast<int>(out.size()) < n) {
    if (++attempts > 100 * n + 1000) throw InvalidConfig("title lexicon too large to fill");
    std::string t;
    double r = rng.uniform();
    if (r < 0.6) {
      std::string a = rng.pick(pool);
      std::string b = rng.pick(pool);
      if (a == b) continue;
      t = a + " " + b;
    } else if (r < 0.85) {
      t = rng.pick(pool) + " " + std::to_string(1990 + rng.uniform_int(34));
    } else {
      t = rng.pick(pool) + " " + rng.pick(pool) + " " + std::to_string(1990 + rng.uniform_int(34));
    }
    if (seen.insert(t).second) out.push_back(t);
  }
  return out;
}

void validate_config(const SyntheticConfig& cfg) {
  if (cfg.n_queries <= 0) throw InvalidConfig("n_queries must be positive");
  if (cfg.n_products <= 0) throw InvalidConfig("n_products must be positive");
  if (cfg.n_sessions <= 0) throw InvalidConfig("n_sessions must be positive");
  if (cfg.n_brands <= 0 || cfg.n_colors <= 0 || cfg.n_product_types <= 0 || cfg.n_titles <= 0)
    throw InvalidConfig("gazetteer sizes must be positive");
  for (double r : {cfg.brand_in_query_rate, cfg.color_in_query_rate, cfg.title_query_rate,
                   cfg.noise_rate}) {
    if (r < 0.0 || r > 1.0) throw InvalidConfig("rates must lie in [0,1]");
  }
  if (cfg.marketplaces.empty()) throw InvalidConfig("need at least one marketplace");
}

// Share of the type lexicon available per marketplace (exercises label masking).
double marketplace_type_share(size_t market_index) {
  static const double kShares[] = {1.0, 0.8, 0.6};
  return kShares[market_index % 3];
}

int types_available(const SyntheticConfig& cfg, size_t market_index) {
  int n = static_cast<int>(
      std::ceil(marketplace_type_share(market_index) * cfg.n_product_types));
  return std::max(1, std::min(n, cfg.n_product_types));
}

}  // namespace

double planted_click_probability(int match_count) {
  return std::min(0.95, 0.05 + 0.10 * match_count);
}

double planted_purchase_probability(int match_count) {
  double p_buy_given_click = std::min(0.95, 0.10 + 0.18 * match_count);
  return planted_click_probability(match_count) * p_buy_given_click;
}

int64_t planted_impressions(int64_t frequency) {
  return std::min<int64_t>(std::max<int64_t>(frequency, 40), 300);
}

std::pair<int64_t, int64_t> sample_engagement(Rng& rng, int match_count, int64_t impressions) {
  double p_click = planted_click_probability(match_count);
  double p_buy = std::min(0.95, 0.10 + 0.18 * match_count);
  int64_t clicks = 0;
  for (int64_t i = 0; i < impressions; ++i) {
    if (rng.bernoulli(p_click)) ++clicks;
  }
  int64_t purchases = 0;
  for (int64_t i = 0; i < clicks; ++i) {
    if (rng.bernoulli(p_buy)) ++purchases;
  }
  return {clicks, purchases};
}

int attribute_match_count(const Query& query, const Product& product) {
  int matches = 0;
  for (const auto& span : query.gold_spans) {
    switch (span.type) {
      case EntityType::Brand:
        if (product.brand && fold_text(*product.brand) == fold_text(span.surface)) ++matches;
        break;
      case EntityType::Color:
        if (product.color && fold_text(*product.color) == fold_text(span.surface)) ++matches;
        break;
      case EntityType::ProductType:
        if (fold_text(product.product_type) == fold_text(span.surface)) ++matches;
        break;
      case EntityType::Title:
        if (fold_text(product.title).find(fold_text(span.surface)) != std::string::npos)
          ++matches;
        break;
    }
  }
  return matches;
}

Dataset generate_synthetic(const SyntheticConfig& cfg) {
  validate_config(cfg);
  Rng root(cfg.seed);

  Dataset d;
  d.gazetteer[EntityType::Brand] = build_lexicon(root.fork(1), core_brands(), cfg.n_brands);
  d.gazetteer[EntityType::Color] = build_lexicon(root.fork(2), core_colors(), cfg.n_colors);
  TypeLexicon types = build_type_lexicon(root.fork(3), cfg.n_product_types);
  d.gazetteer[EntityType::ProductType] = types.names;
  d.gazetteer[EntityType::Title] = build_titles(root.fork(4), cfg.n_titles);

  const auto& brands = d.gazetteer[EntityType::Brand];
  const auto& colors = d.gazetteer[EntityType::Color];
  const auto& titles = d.gazetteer[EntityType::Title];

  std::vector<int> media_type_indices;
  for (size_t i = 0; i < types.lines.size(); ++i) {
    if (types.lines[i] == ProductLine::MediaLine) media_type_indices.push_back(static_cast<int>(i));
  }

  // products
  Rng prng = root.fork(5);
  static const double kBasePrice[] = {15.0, 40.0, 80.0, 10.0};  // per line
  for (int i = 0; i < cfg.n_products; ++i) {
    Product p;
    char id[16];
    std::snprintf(id, sizeof(id), "p%05d", i);
    p.id = id;
    int ti = prng.uniform_int(static_cast<int>(types.names.size()));
    p.product_type = types.names[static_cast<size_t>(ti)];
    p.line = types.lines[static_cast<size_t>(ti)];
    if (prng.bernoulli(0.8)) p.brand = prng.pick(brands);
    if (prng.bernoulli(0.6)) p.color = prng.pick(colors);
    double base = kBasePrice[static_cast<int>(p.line)];
    p.price = std::round(base * std::exp(0.5 * prng.normal()) * 100.0) / 100.0;
    if (p.price < 0.01) p.price = 0.01;
    std::string title;
    if (p.line == ProductLine::MediaLine && prng.bernoulli(0.6)) {
      title = prng.pick(titles) + " " + p.product_type;
    } else {
      if (p.brand) title += *p.brand + " ";
      if (p.color) title += *p.color + " ";
      if (prng.bernoulli(0.3)) title += prng.pick(title_word_pool()) + " ";
      title += p.product_type;
    }
    p.title = fold_text(title);
    d.products.push_back(std::move(p));
  }

  // products grouped by type for candidate sampling
  std::map<std::string, std::vector<int>> by_type;
  for (size_t i = 0; i < d.products.size(); ++i) {
    by_type[d.products[i].product_type].push_back(static_cast<int>(i));
  }

  // queries
  Rng qrng = root.fork(6);
  static const std::vector<std::string> kFillers = {"for",  "men",   "women", "kids",
                                                    "cheap", "sale", "small", "large"};
  static const std::vector<std::string> kLongTail = {"free", "shipping", "under", "50",
                                                     "best", "quality"};
  for (int i = 0; i < cfg.n_queries; ++i) {
    Query q;
    char id[16];
    std::snprintf(id, sizeof(id), "q%05d", i);
    q.id = id;
    size_t mi = static_cast<size_t>(qrng.uniform_int(static_cast<int>(cfg.marketplaces.size())));
    q.marketplace = cfg.marketplaces[mi];
    q.frequency = static_cast<int64_t>(std::floor(std::exp(qrng.uniform() * std::log(1000.0))));
    if (q.frequency < 1) q.frequency = 1;

    std::vector<std::string> tokens;
    auto add_span = [&](const std::string& surface, EntityType type) {
      std::vector<std::string> parts = tokenize(surface);
      EntitySpan span;
      span.start = static_cast<int>(tokens.size());
      span.end = span.start + static_cast<int>(parts.size());
      span.type = type;
      span.surface = surface;
      q.gold_spans.push_back(span);
      for (auto& t : parts) tokens.push_back(std::move(t));
    };

    bool is_title_query =
        qrng.bernoulli(cfg.title_query_rate) && !media_type_indices.empty();
    int type_index;
    if (is_title_query) {
      add_span(qrng.pick(titles), EntityType::Title);
      type_index = media_type_indices[static_cast<size_t>(
          qrng.uniform_int(static_cast<int>(media_type_indices.size())))];
      if (qrng.bernoulli(0.5)) add_span(types.names[static_cast<size_t>(type_index)],
                                        EntityType::ProductType);
    } else {
      // attribute combination query, most under six tokens
      if (qrng.bernoulli(0.25)) tokens.push_back(qrng.pick(title_word_pool()));  // decoy modifier
      if (qrng.bernoulli(cfg.color_in_query_rate)) add_span(qrng.pick(colors), EntityType::Color);
      if (qrng.bernoulli(cfg.brand_in_query_rate)) add_span(qrng.pick(brands), EntityType::Brand);
      int avail = types_available(cfg, mi);
      type_index = qrng.uniform_int(avail);
      add_span(types.names[static_cast<size_t>(type_index)], EntityType::ProductType);
      if (qrng.bernoulli(0.2)) tokens.push_back(qrng.pick(kFillers));
      if (qrng.bernoulli(0.06)) {
        tokens.push_back(qrng.pick(kLongTail));
        tokens.push_back(qrng.pick(kLongTail));
      }
    }
    q.text = join_tokens(tokens);
    q.intent_labels.push_back(types.names[static_cast<size_t>(type_index)]);
    q.intent_labels.push_back("line:" + std::string(line_name(
                                  types.lines[static_cast<size_t>(type_index)])));
    d.queries.push_back(std::move(q));
  }

  // judgments with planted utility
  Rng jrng = root.fork(7);
  for (const auto& q : d.queries) {
    std::string qtype;
    for (const auto& s : q.gold_spans) {
      if (s.type == EntityType::ProductType) qtype = s.surface;
    }
    std::set<int> cand;
    if (!qtype.empty()) {
      auto it = by_type.find(qtype);
      if (it != by_type.end()) {
        const auto& same = it->second;
        int take = std::min<int>(12, static_cast<int>(same.size()));
        for (int t = 0; t < take; ++t) {
          cand.insert(same[static_cast<size_t>(jrng.uniform_int(
              static_cast<int>(same.size())))]);
        }
      }
    }
    int target = std::min(20, cfg.n_products);
    int guard = 0;
    while (static_cast<int>(cand.size()) < target && guard++ < 500) {
      cand.insert(jrng.uniform_int(cfg.n_products));
    }
    int64_t impressions = planted_impressions(q.frequency);
    int attrs_in_query = static_cast<int>(q.gold_spans.size());
    for (int pi : cand) {
      const Product& p = d.products[static_cast<size_t>(pi)];
      int match = attribute_match_count(q, p);
      auto [clicks, purchases] = sample_engagement(jrng, match, impressions);
      double ratio = attrs_in_query > 0 ? static_cast<double>(match) / attrs_in_query : 0.0;
      Esci esci;
      if (ratio >= 1.0) {
        esci = jrng.bernoulli(0.85) ? Esci::Exact : Esci::Substitute;
      } else if (ratio >= 0.5) {
        esci = jrng.bernoulli(0.7) ? Esci::Substitute : Esci::Complement;
      } else if (ratio > 0.0) {
        esci = jrng.bernoulli(0.6) ? Esci::Complement : Esci::Substitute;
      } else {
        esci = jrng.bernoulli(0.85) ? Esci::Irrelevant : Esci::Complement;
      }
      if (jrng.bernoulli(cfg.noise_rate)) {
        esci = static_cast<Esci>(jrng.uniform_int(4));
      }
      d.judgments.push_back({q.id, p.id, esci, clicks, purchases});
    }
  }

  // sessions
  Rng srng = root.fork(8);
  static const std::vector<std::string> kPlaces = {"moon", "sun", "mars"};
  static const std::vector<std::string> kCountries = {"france", "spain", "japan", "italy"};
  static const std::vector<std::string> kUnits = {"grams", "ounces"};
  static const std::vector<std::string> kBigUnits = {"pound", "kilogram"};
  static const std::vector<std::string> kTests = {"covid", "blood", "vision"};
  static const std::vector<std::string> kBlocklist = {"counterfeit", "banned", "restricted",
                                                      "illegal"};
  struct UtteranceBuilder {
    std::vector<std::string> tokens;
    std::vector<EntitySpan> spans;
    UtteranceBuilder& words(std::string_view text) {
      for (auto& t : tokenize(text)) tokens.push_back(std::move(t));
      return *this;
    }
    UtteranceBuilder& entity(const std::string& surface, EntityType type) {
      std::vector<std::string> parts = tokenize(surface);
      spans.push_back({static_cast<int>(tokens.size()),
                       static_cast<int>(tokens.size() + parts.size()), type, surface});
      for (auto& t : parts) tokens.push_back(std::move(t));
      return *this;
    }
    void into(SessionTurn& turn) {
      turn.utterance = join_tokens(tokens);
      turn.gold_spans = std::move(spans);
    }
  };

  for (int i = 0; i < cfg.n_sessions; ++i) {
    Session s;
    char id[16];
    std::snprintf(id, sizeof(id), "s%04d", i);
    s.id = id;
    int n_turns = 1 + srng.uniform_int(4);
    std::string last_type;
    for (int t = 0; t < n_turns; ++t) {
      SessionTurn turn;
      bool question = t == 0 ? srng.bernoulli(0.5) : srng.bernoulli(0.6);
      const std::string& type = types.names[static_cast<size_t>(
          srng.uniform_int(static_cast<int>(types.names.size())))];
      const std::string& color = srng.pick(colors);
      const std::string& brand = srng.pick(brands);
      UtteranceBuilder b;
      if (!question) {
        turn.kind = TurnKind::Keyword;
        if (srng.bernoulli(0.4)) b.entity(color, EntityType::Color);
        if (srng.bernoulli(0.5)) b.entity(brand, EntityType::Brand);
        b.entity(type, EntityType::ProductType);
        last_type = type;
      } else {
        turn.kind = TurnKind::Question;
        double r = srng.uniform();
        if (r < 0.5) {
          turn.intent = "P";
          int tmpl = srng.uniform_int(t > 0 && !last_type.empty() ? 6 : 5);
          switch (tmpl) {
            case 0:
              b.words("do you have").entity(type, EntityType::ProductType);
              break;
            case 1:
              b.words("i am looking for")
                  .entity(color, EntityType::Color)
                  .entity(type, EntityType::ProductType);
              break;
            case 2:
              b.words("what should i prepare for bringing a new")
                  .entity(type, EntityType::ProductType)
                  .words("home");
              break;
            case 3:
              b.words("can you show me some").entity(type, EntityType::ProductType);
              break;
            case 4:
              b.words("can you show me")
                  .entity(brand, EntityType::Brand)
                  .entity(type, EntityType::ProductType);
              break;
            case 5:
              b.words("do you have them in").entity(color, EntityType::Color);
              break;
          }
          if (tmpl != 5) last_type = type;
        } else if (r < 0.7) {
          turn.intent = "H";
          switch (srng.uniform_int(5)) {
            case 0:
              b.words("what is the").entity(type, EntityType::ProductType).words("return policy");
              break;
            case 1: b.words("where is my order"); break;
            case 2: b.words("how do i return my").entity(type, EntityType::ProductType); break;
            case 3:
              b.words("what is your refund policy for").entity(type, EntityType::ProductType);
              break;
            case 4: b.words("how do i track my package"); break;
          }
        } else if (r < 0.9) {
          turn.intent = "G";
          switch (srng.uniform_int(4)) {
            case 0:
              b.words("how far away is the " + srng.pick(kPlaces) + " from the earth");
              break;
            case 1: b.words("what is the capital of " + srng.pick(kCountries)); break;
            case 2:
              b.words("how many " + srng.pick(kUnits) + " in a " + srng.pick(kBigUnits));
              break;
            case 3: b.words("how to interpret " + srng.pick(kTests) + " test results"); break;
          }
        } else {
          turn.intent = "S";
          b.words("where can i buy " + srng.pick(kBlocklist)).entity(type, EntityType::ProductType);
        }
      }
      b.into(turn);
      s.turns.push_back(std::move(turn));
    }
    d.sessions.push_back(std::move(s));
  }

  return d;
}

// --- splitting ---

namespace {

int frequency_tercile(int64_t freq, int64_t lo, int64_t hi) {
  if (freq < lo) return 0;
  if (freq > hi) return 2;
  return 1;
}

}  // namespace

SplitResult split_support(const std::vector<Query>& queries, double support_fraction,
                          uint64_t seed) {
  if (queries.empty()) throw EmptySplit("input");
  if (!(support_fraction > 0.0 && support_fraction < 1.0))
    throw Error("support_fraction must lie in (0,1)");

  const int n = static_cast<int>(queries.size());
  int want = static_cast<int>(std::lround(support_fraction * n));
  if (want <= 0) throw EmptySplit("support");
  if (want >= n) throw EmptySplit("train");

  // stratify by (attribute-arity, frequency tercile)
  std::vector<int64_t> freqs;
  freqs.reserve(queries.size());
  for (const auto& q : queries) freqs.push_back(q.frequency);
  std::sort(freqs.begin(), freqs.end());
  int64_t lo = freqs[static_cast<size_t>((n - 1) / 3)];
  int64_t hi = freqs[static_cast<size_t>((2 * (n - 1)) / 3)];

  std::map<int, std::vector<int>> strata;
  for (int i = 0; i < n; ++i) {
    int arity = std::min<int>(3, static_cast<int>(queries[static_cast<size_t>(i)].gold_spans.size()));
    int key = arity * 3 + frequency_tercile(queries[static_cast<size_t>(i)].frequency, lo, hi);
    strata[key].push_back(i);
  }

  // largest-remainder apportionment of `want` across strata
  struct Quota {
    int key;
    int base;
    double frac;
  };
  std::vector<Quota> quotas;
  int assigned = 0;
  for (const auto& [key, members] : strata) {
    double exact = support_fraction * static_cast<double>(members.size());
    int base = static_cast<int>(std::floor(exact));
    base = std::min<int>(base, static_cast<int>(members.size()));
    quotas.push_back({key, base, exact - base});
    assigned += base;
  }
  std::sort(quotas.begin(), quotas.end(), [](const Quota& a, const Quota& b) {
    if (a.frac != b.frac) return a.frac > b.frac;
    return a.key < b.key;
  });
  for (auto& qta : quotas) {
    if (assigned >= want) break;
    if (qta.base < static_cast<int>(strata[qta.key].size())) {
      ++qta.base;
      ++assigned;
    }
  }
  // rounding drift: trim or top up deterministically
  while (assigned > want) {
    for (auto& qta : quotas) {
      if (assigned <= want) break;
      if (qta.base > 0) {
        --qta.base;
        --assigned;
      }
    }
  }

  std::vector<bool> in_support(static_cast<size_t>(n), false);
  int picked = 0;
  for (const auto& qta : quotas) {
    auto members = strata[qta.key];
    Rng srng = Rng(seed).fork(static_cast<uint64_t>(qta.key) + 101);
    // Fisher-Yates prefix selection
    for (int j = 0; j < qta.base && j < static_cast<int>(members.size()); ++j) {
      int swap_with = j + srng.uniform_int(static_cast<int>(members.size()) - j);
      std::swap(members[static_cast<size_t>(j)], members[static_cast<size_t>(swap_with)]);
      in_support[static_cast<size_t>(members[static_cast<size_t>(j)])] = true;
      ++picked;
    }
  }
  // top up if apportionment fell short (tiny strata), deterministic scan
  Rng trng = Rng(seed).fork(777);
  while (picked < want) {
    int idx = trng.uniform_int(n);
    if (!in_support[static_cast<size_t>(idx)]) {
      in_support[static_cast<size_t>(idx)] = true;
      ++picked;
    }
  }

  SplitResult out;
  for (int i = 0; i < n; ++i) {
    if (in_support[static_cast<size_t>(i)]) {
      out.support.push_back(queries[static_cast<size_t>(i)]);
    } else {
      out.train.push_back(queries[static_cast<size_t>(i)]);
    }
  }
  if (out.support.empty()) throw EmptySplit("support");
  if (out.train.empty()) throw EmptySplit("train");
  return out;
}

int count_products_matching_all_tokens(const std::vector<Product>& products,
                                       const std::vector<std::string>& tokens) {
  if (tokens.empty()) return 0;
  int count = 0;
  for (const auto& p : products) {
    std::string text = p.title + " " + p.product_type;
    if (p.brand) text += " " + *p.brand;
    if (p.color) text += " " + *p.color;
    auto ptokens = tokenize(text);
    std::unordered_set<std::string> pset(ptokens.begin(), ptokens.end());
    bool all = true;
    for (const auto& t : tokens) {
      if (!pset.count(t)) {
        all = false;
        break;
      }
    }
    if (all) ++count;
  }
  return count;
}

}  // namespace qu
