#include "analogion/embedding.hpp"

#include <cstdlib>
#include <filesystem>
#include <istream>
#include <ostream>
#include <sstream>

#include "analogion/corpus.hpp"
#include "analogion/digest.hpp"
#include "analogion/errors.hpp"
#include "analogion/rng.hpp"
#include "analogion/text.hpp"

namespace analogion {

// --- static tables ---------------------------------------------------------------

StaticBackend::StaticBackend(int dimension, std::vector<std::pair<std::string, WordVector>> words,
                             std::vector<WordVector> ngram_buckets, int min_n, int max_n)
    : dim_(dimension), rows_(std::move(words)), buckets_(std::move(ngram_buckets)), min_n_(min_n), max_n_(max_n) {
  if (dim_ <= 0) throw ValidationError("static table dimension must be positive");
  if (min_n_ < 1 || max_n_ < min_n_) throw ValidationError("invalid n-gram length range");
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (rows_[i].second.size() != dim_) throw ValidationError("row for '" + rows_[i].first + "' has wrong dimension");
    if (!rows_[i].second.allFinite()) throw ValidationError("row for '" + rows_[i].first + "' is not finite");
    index_.emplace(rows_[i].first, i);
  }
  for (const auto& b : buckets_)
    if (b.size() != dim_) throw ValidationError("n-gram bucket has wrong dimension");
}

namespace {

WordVector parse_row(const std::vector<std::string>& fields, std::size_t first, int dim, std::size_t line) {
  if (fields.size() != first + static_cast<std::size_t>(dim))
    throw ParseError("expected " + std::to_string(dim) + " values", line);
  WordVector v(dim);
  for (int i = 0; i < dim; ++i) {
    try {
      v[i] = std::stod(fields[first + static_cast<std::size_t>(i)]);
    } catch (const std::exception&) {
      throw ParseError("bad number '" + fields[first + static_cast<std::size_t>(i)] + "'", line);
    }
  }
  if (!v.allFinite()) throw ParseError("non-finite vector entry", line);
  return v;
}

}  // namespace

StaticBackend StaticBackend::load(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError("empty vector file", 1);
  auto header = text::split_whitespace(line);
  if (header.size() != 2 && header.size() != 5) throw ParseError("header must have 2 or 5 integers", 1);
  std::vector<long> h;
  for (const auto& f : header) {
    try {
      h.push_back(std::stol(f));
    } catch (const std::exception&) {
      throw ParseError("bad header field '" + f + "'", 1);
    }
  }
  const long n_words = h[0];
  const int dim = static_cast<int>(h[1]);
  const long n_buckets = header.size() == 5 ? h[2] : 0;
  const int min_n = header.size() == 5 ? static_cast<int>(h[3]) : 3;
  const int max_n = header.size() == 5 ? static_cast<int>(h[4]) : 6;
  if (n_words < 0 || dim <= 0 || n_buckets < 0) throw ParseError("invalid header values", 1);

  std::vector<std::pair<std::string, WordVector>> words;
  words.reserve(static_cast<std::size_t>(n_words));
  for (long i = 0; i < n_words; ++i) {
    if (!std::getline(in, line)) throw ParseError("file ends before all word rows", line_no + 1);
    ++line_no;
    auto fields = text::split_whitespace(line);
    if (fields.empty()) throw ParseError("empty word row", line_no);
    words.emplace_back(fields[0], parse_row(fields, 1, dim, line_no));
  }
  std::vector<WordVector> buckets;
  buckets.reserve(static_cast<std::size_t>(n_buckets));
  for (long i = 0; i < n_buckets; ++i) {
    if (!std::getline(in, line)) throw ParseError("file ends before all n-gram rows", line_no + 1);
    ++line_no;
    buckets.push_back(parse_row(text::split_whitespace(line), 0, dim, line_no));
  }
  return StaticBackend(dim, std::move(words), std::move(buckets), min_n, max_n);
}

StaticBackend StaticBackend::load_file(const std::string& path) {
  std::istringstream in(read_file(path));
  return load(in);
}

void StaticBackend::save(std::ostream& out) const {
  out << rows_.size() << ' ' << dim_;
  if (!buckets_.empty()) out << ' ' << buckets_.size() << ' ' << min_n_ << ' ' << max_n_;
  out << '\n';
  const auto old_precision = out.precision(17);
  for (const auto& [word, v] : rows_) {
    out << word;
    for (int i = 0; i < dim_; ++i) out << ' ' << v[i];
    out << '\n';
  }
  for (const auto& b : buckets_) {
    for (int i = 0; i < dim_; ++i) out << (i ? " " : "") << b[i];
    out << '\n';
  }
  out.precision(old_precision);
}

bool StaticBackend::contains(std::string_view word) const { return index_.count(text::normalize_space(word)) != 0; }

bool StaticBackend::is_oov(std::string_view word) const {
  const auto w = text::normalize_space(word);
  if (index_.count(w)) return false;
  const auto parts = text::split_whitespace(w);
  if (parts.size() <= 1) return true;
  for (const auto& p : parts)
    if (!index_.count(p)) return true;
  return false;
}

std::string StaticBackend::describe() const {
  return "static(words=" + std::to_string(rows_.size()) + ",dim=" + std::to_string(dim_) +
         ",buckets=" + std::to_string(buckets_.size()) + ")";
}

std::uint32_t StaticBackend::hash_ngram(std::string_view ngram) {
  std::uint32_t h = 2166136261u;
  for (char c : ngram) {
    h = h ^ static_cast<std::uint32_t>(static_cast<std::int8_t>(c));
    h = h * 16777619u;
  }
  return h;
}

std::vector<std::string> StaticBackend::char_ngrams(std::string_view word) const {
  const std::string w = "<" + std::string(word) + ">";
  std::vector<std::string> out;
  const auto is_cont = [](char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; };
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (is_cont(w[i])) continue;
    std::string ngram;
    std::size_t j = i;
    for (int n = 1; j < w.size() && n <= max_n_; ++n) {
      ngram.push_back(w[j++]);
      while (j < w.size() && is_cont(w[j])) ngram.push_back(w[j++]);
      if (n >= min_n_ && !(n == 1 && (i == 0 || j == w.size()))) out.push_back(ngram);
    }
  }
  return out;
}

WordVector StaticBackend::lookup_single(const std::string& word) const {
  if (auto it = index_.find(word); it != index_.end()) return rows_[it->second].second;
  if (buckets_.empty()) throw MissingWordError(word);
  const auto grams = char_ngrams(word);
  if (grams.empty()) throw MissingWordError(word);
  WordVector sum = WordVector::Zero(dim_);
  for (const auto& g : grams) sum += buckets_[hash_ngram(g) % buckets_.size()];
  return sum / static_cast<double>(grams.size());
}

WordVector StaticBackend::lookup(std::string_view word) const {
  const auto w = text::normalize_space(word);
  if (w.empty()) throw ValidationError("cannot embed an empty word");
  if (auto it = index_.find(w); it != index_.end()) return rows_[it->second].second;
  const auto parts = text::split_whitespace(w);
  if (parts.size() == 1) return lookup_single(w);
  WordVector sum = WordVector::Zero(dim_);
  for (const auto& p : parts) sum += lookup_single(p);
  return sum / static_cast<double>(parts.size());
}

WordVector static_lookup(const StaticBackend& backend, std::string_view word) { return backend.lookup(word); }

// --- token features -----------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

WordVector HashedTokenFeatures::features(const std::string& token) const {
  std::uint64_t state = fnv1a64(token) ^ seed_;
  WordVector v(dim_);
  for (int i = 0; i < dim_; ++i) v[i] = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  return v;
}

TableTokenFeatures::TableTokenFeatures(int dimension, std::unordered_map<std::string, WordVector> table)
    : dim_(dimension), table_(std::move(table)) {
  for (const auto& [tok, v] : table_)
    if (v.size() != dim_) throw ValidationError("token feature for '" + tok + "' has wrong dimension");
}

WordVector TableTokenFeatures::features(const std::string& token) const {
  auto it = table_.find(token);
  if (it == table_.end()) throw MissingWordError(token);
  return it->second;
}

// --- contextual encoder ------------------------------------------------------------

const Eigen::MatrixXd& ContextualBackend::Encoded::output(int layer) const {
  switch (layer) {
    case 0: return features;
    case 1: return backbone;
    default: return extra;
  }
}

ContextualBackend::ContextualBackend(std::shared_ptr<const Tokenizer> tokenizer,
                                     std::shared_ptr<const TokenFeatures> features, ContextualConfig config,
                                     std::string id)
    : tokenizer_(std::move(tokenizer)), features_(std::move(features)), config_(config), id_(std::move(id)) {
  if (!tokenizer_ || !features_) throw ConfigError("contextual backend needs a tokenizer and token features");
  if (features_->dimension() != config_.dimension)
    throw ConfigError("token feature dimension does not match backend dimension");
  const auto D = static_cast<std::size_t>(config_.dimension);
  std::size_t offset = 0;
  auto add = [&](const char* name, std::size_t size) {
    groups_.push_back({name, offset, size, true});
    offset += size;
  };
  if (config_.backbone_layer) add("backbone", 2 * D * D + D);
  if (config_.extra_layer) add("extra", D * D + D);
  if (config_.classifier_head) add("head", 2 * D + 2);
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset));
  (void)output_layer();

  const auto d = static_cast<Eigen::Index>(D);
  if (const auto* g = group("backbone")) {
    Eigen::Map<Eigen::MatrixXd> W(params_.data() + g->offset, d, d);
    Eigen::Map<Eigen::MatrixXd> U(params_.data() + g->offset + D * D, d, d);
    W.setIdentity();
    Rng rng(config_.init_seed);
    const double scale = config_.context_init_scale / std::sqrt(static_cast<double>(D));
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index i = 0; i < d; ++i) U(i, j) = scale * rng.normal();
  }
  if (const auto* g = group("extra")) {
    Eigen::Map<Eigen::MatrixXd> L(params_.data() + g->offset, d, d);
    L.setIdentity();
  }
}

bool ContextualBackend::trainable() const {
  for (const auto& g : groups_)
    if (g.trainable && g.size > 0) return true;
  return false;
}

const ContextualBackend::ParamGroup* ContextualBackend::group(std::string_view name) const {
  for (const auto& g : groups_)
    if (g.name == name) return &g;
  return nullptr;
}

void ContextualBackend::set_trainable(std::string_view name, bool trainable) {
  for (auto& g : groups_)
    if (g.name == name) g.trainable = trainable;
}

Eigen::VectorXd ContextualBackend::trainable_mask() const {
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(params_.size());
  for (const auto& g : groups_)
    if (g.trainable)
      mask.segment(static_cast<Eigen::Index>(g.offset), static_cast<Eigen::Index>(g.size)).setOnes();
  return mask;
}

std::string ContextualBackend::group_checksum(std::string_view name) const {
  const auto* g = group(name);
  if (!g) return "";
  const auto* bytes = reinterpret_cast<const unsigned char*>(params_.data() + g->offset);
  return sha256_hex(std::span<const unsigned char>(bytes, g->size * sizeof(double)));
}

int ContextualBackend::output_layer() const {
  if (config_.pool_layer == -1) return config_.extra_layer ? 2 : (config_.backbone_layer ? 1 : 0);
  const int layer = config_.pool_layer;
  if (layer == 0 || (layer == 1 && config_.backbone_layer) || (layer == 2 && config_.extra_layer)) return layer;
  throw ConfigError("pool_layer " + std::to_string(layer) + " is not available in this backend");
}

Eigen::Map<const Eigen::MatrixXd> ContextualBackend::matrix(std::string_view name, std::size_t offset, int rows,
                                                            int cols) const {
  const auto* g = group(name);
  return Eigen::Map<const Eigen::MatrixXd>(params_.data() + g->offset + offset, rows, cols);
}

ContextualBackend::Encoded ContextualBackend::encode(std::span<const std::string> words) const {
  Encoded enc;
  enc.tokens.push_back(tokenizer_->cls_token());
  for (const auto& w : words) {
    auto pieces = tokenizer_->tokenize(w);
    if (pieces.empty()) throw AlignmentError("word '" + w + "' produced no tokens");
    TokenSpan span{w, enc.tokens.size(), enc.tokens.size() + pieces.size()};
    enc.tokens.insert(enc.tokens.end(), pieces.begin(), pieces.end());
    enc.tokens.push_back(tokenizer_->sep_token());
    enc.spans.push_back(std::move(span));
  }
  if (enc.tokens.size() > config_.max_sequence_length)
    throw SequenceTooLongError("sequence of " + std::to_string(enc.tokens.size()) + " tokens exceeds the limit of " +
                               std::to_string(config_.max_sequence_length));

  const int D = config_.dimension;
  const auto n = static_cast<Eigen::Index>(enc.tokens.size());
  enc.features.resize(D, n);
  for (Eigen::Index i = 0; i < n; ++i) enc.features.col(i) = features_->features(enc.tokens[static_cast<std::size_t>(i)]);
  enc.context = enc.features.rowwise().mean();

  const int out = output_layer();
  const Eigen::MatrixXd* prev = &enc.features;
  if (config_.backbone_layer && out >= 1) {
    const std::size_t DD = static_cast<std::size_t>(D) * static_cast<std::size_t>(D);
    auto W = matrix("backbone", 0, D, D);
    auto U = matrix("backbone", DD, D, D);
    auto b = matrix("backbone", 2 * DD, D, 1);
    Eigen::VectorXd shift = U * enc.context + b;
    enc.backbone = (W * enc.features).colwise() + shift;
    prev = &enc.backbone;
  }
  if (config_.extra_layer && out >= 2) {
    const std::size_t DD = static_cast<std::size_t>(D) * static_cast<std::size_t>(D);
    auto L = matrix("extra", 0, D, D);
    auto c = matrix("extra", DD, D, 1);
    enc.extra = (L * *prev).colwise() + Eigen::VectorXd(c);
  }
  return enc;
}

WordVector ContextualBackend::pool(const Encoded& enc, const TokenSpan& span) const {
  const auto& out = enc.output(output_layer());
  return out.middleCols(static_cast<Eigen::Index>(span.begin), static_cast<Eigen::Index>(span.size())).rowwise().mean();
}

void ContextualBackend::backward(const Encoded& enc, const Eigen::MatrixXd& d_output, Eigen::VectorXd& grad) const {
  const int D = config_.dimension;
  const std::size_t DD = static_cast<std::size_t>(D) * static_cast<std::size_t>(D);
  const int out = output_layer();
  Eigen::MatrixXd d_hidden = d_output;

  if (out == 2) {
    const auto* g = group("extra");
    const Eigen::MatrixXd& input = config_.backbone_layer ? enc.backbone : enc.features;
    Eigen::Map<Eigen::MatrixXd> gL(grad.data() + g->offset, D, D);
    Eigen::Map<Eigen::VectorXd> gc(grad.data() + g->offset + DD, D);
    gL.noalias() += d_output * input.transpose();
    gc += d_output.rowwise().sum();
    if (!config_.backbone_layer) return;
    d_hidden = matrix("extra", 0, D, D).transpose() * d_output;
  }
  if (out >= 1 && config_.backbone_layer) {
    const auto* g = group("backbone");
    Eigen::Map<Eigen::MatrixXd> gW(grad.data() + g->offset, D, D);
    Eigen::Map<Eigen::MatrixXd> gU(grad.data() + g->offset + DD, D, D);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + g->offset + 2 * DD, D);
    gW.noalias() += d_hidden * enc.features.transpose();
    const Eigen::VectorXd summed = d_hidden.rowwise().sum();
    gU.noalias() += summed * enc.context.transpose();
    gb += summed;
  }
}

Eigen::Vector2d ContextualBackend::head_logits(const Encoded& enc) const {
  if (!has_head()) throw ConfigError("backend '" + id_ + "' has no classification head");
  const int D = config_.dimension;
  auto H = matrix("head", 0, 2, D);
  auto hb = matrix("head", 2 * static_cast<std::size_t>(D), 2, 1);
  return H * enc.output(output_layer()).col(0) + Eigen::Vector2d(hb);
}

void ContextualBackend::head_backward(const Encoded& enc, const Eigen::Vector2d& d_logits, Eigen::VectorXd& grad) const {
  const int D = config_.dimension;
  const auto* g = group("head");
  const auto& out = enc.output(output_layer());
  Eigen::Map<Eigen::MatrixXd> gH(grad.data() + g->offset, 2, D);
  Eigen::Map<Eigen::Vector2d> ghb(grad.data() + g->offset + 2 * static_cast<std::size_t>(D));
  gH.noalias() += d_logits * out.col(0).transpose();
  ghb += d_logits;
  Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(D, out.cols());
  d_out.col(0) = matrix("head", 0, 2, D).transpose() * d_logits;
  backward(enc, d_out, grad);
}

WordVector ContextualBackend::embed_word(std::string_view word) const {
  const std::string w(word);
  auto enc = encode(std::span<const std::string>(&w, 1));
  return pool(enc, enc.spans[0]);
}

std::size_t ContextualBackend::piece_count(std::string_view word) const { return tokenizer_->tokenize(word).size(); }

bool ContextualBackend::is_oov(std::string_view word) const { return piece_count(word) >= 2; }

std::pair<WordVector, WordVector> encode_pair(const ContextualBackend& backend, const std::string& first,
                                              const std::string& second) {
  const std::string words[2] = {first, second};
  auto enc = backend.encode(words);
  return {backend.pool(enc, enc.spans[0]), backend.pool(enc, enc.spans[1])};
}

QuadVectors encode_quad_for_offsets(const EmbeddingBackend& backend, const std::string& a, const std::string& b,
                                    const std::string& c, const std::string& d) {
  if (const auto* ctx = dynamic_cast<const ContextualBackend*>(&backend)) {
    auto [va, vb] = encode_pair(*ctx, a, b);
    auto [vc, vd] = encode_pair(*ctx, c, d);
    return {std::move(va), std::move(vb), std::move(vc), std::move(vd)};
  }
  return {backend.embed_word(a), backend.embed_word(b), backend.embed_word(c), backend.embed_word(d)};
}

WordVector encode_single_word(const EmbeddingBackend& backend, std::string_view word) {
  return backend.embed_word(word);
}

bool is_oov(const EmbeddingBackend& backend, std::string_view word) { return backend.is_oov(word); }

// --- backend registry ------------------------------------------------------------

namespace {

struct BackboneSpec {
  std::string family;
  std::map<std::string, std::string> options;
};

BackboneSpec parse_backbone_id(std::string_view id) {
  BackboneSpec spec;
  const auto colon = id.find(':');
  spec.family = std::string(id.substr(0, colon));
  if (colon == std::string_view::npos) return spec;
  for (const auto& kv : text::split(id.substr(colon + 1), ',')) {
    if (kv.empty()) continue;
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("backbone option '" + kv + "' is not key=value");
    spec.options[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return spec;
}

bool is_pretrained_family(std::string_view family) {
  return family.find("bert") != std::string_view::npos || family.find("roberta") != std::string_view::npos ||
         family.find('/') != std::string_view::npos;
}

std::string resolve_cached_path(const std::string& path) {
  if (std::filesystem::exists(path)) return path;
  if (const char* cache = std::getenv("ANALOGION_CACHE")) {
    auto candidate = std::filesystem::path(cache) / path;
    if (std::filesystem::exists(candidate)) return candidate.string();
  }
  throw ConfigError("file '" + path + "' not found (also searched ANALOGION_CACHE)");
}

}  // namespace

bool is_known_backbone_id(std::string_view backbone_id) {
  const auto family = parse_backbone_id(backbone_id).family;
  return family == "stub" || family == "toy" || is_pretrained_family(family);
}

std::unique_ptr<ContextualBackend> make_contextual_backend(std::string_view backbone_id, bool extra_layer,
                                                           bool classifier_head) {
  const auto spec = parse_backbone_id(backbone_id);
  if (spec.family != "stub" && spec.family != "toy") {
    if (is_pretrained_family(spec.family))
      throw ConfigError("backbone '" + std::string(backbone_id) +
                        "' needs a pretrained transformer runtime, which this build does not include");
    throw ConfigError("unknown backbone '" + std::string(backbone_id) + "'");
  }
  auto opt = [&](const char* key, const char* fallback) {
    auto it = spec.options.find(key);
    return it == spec.options.end() ? std::string(fallback) : it->second;
  };
  ContextualConfig cfg;
  try {
    cfg.dimension = std::stoi(opt("dim", "32"));
    cfg.init_seed = std::stoull(opt("seed", "1"));
    cfg.context_init_scale = std::stod(opt("context", "0.1"));
    cfg.max_sequence_length = std::stoul(opt("maxlen", "512"));
    cfg.pool_layer = std::stoi(opt("layer", "-1"));
  } catch (const std::exception&) {
    throw ConfigError("malformed numeric option in backbone id '" + std::string(backbone_id) + "'");
  }
  if (cfg.dimension <= 0) throw ConfigError("backbone dimension must be positive");
  cfg.backbone_layer = spec.family == "toy";
  cfg.extra_layer = extra_layer;
  cfg.classifier_head = classifier_head;

  std::shared_ptr<const Tokenizer> tokenizer;
  if (auto it = spec.options.find("vocab"); it != spec.options.end()) {
    tokenizer = std::make_shared<WordPieceTokenizer>(WordPieceTokenizer::from_file(resolve_cached_path(it->second)));
  } else {
    std::size_t width = 10;
    try {
      width = std::stoul(opt("chunk", "10"));
    } catch (const std::exception&) {
      throw ConfigError("malformed chunk option in backbone id");
    }
    tokenizer = std::make_shared<ChunkTokenizer>(width);
  }
  auto features = std::make_shared<HashedTokenFeatures>(cfg.init_seed, cfg.dimension);
  return std::make_unique<ContextualBackend>(std::move(tokenizer), std::move(features), cfg, std::string(backbone_id));
}

// --- frequency table ---------------------------------------------------------------

FrequencyTable FrequencyTable::load(std::istream& in) {
  FrequencyTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos || tab == 0) throw ParseError("expected word<TAB>count", line_no);
    const auto count_str = line.substr(tab + 1);
    if (count_str.empty() || count_str.find_first_not_of("0123456789") != std::string::npos)
      throw ParseError("count must be a non-negative integer", line_no);
    table.set(line.substr(0, tab), std::stoull(count_str));
  }
  return table;
}

FrequencyTable FrequencyTable::load_file(const std::string& path) {
  std::istringstream in(read_file(path));
  return load(in);
}

void FrequencyTable::dump(std::ostream& out) const {
  for (const auto& [word, count] : entries_) out << word << '\t' << count << '\n';
}

void FrequencyTable::set(const std::string& word, std::uint64_t count) {
  if (auto it = index_.find(word); it != index_.end()) {
    entries_[it->second].second = count;
    return;
  }
  index_.emplace(word, entries_.size());
  entries_.emplace_back(word, count);
}

std::optional<std::uint64_t> FrequencyTable::lookup(std::string_view word) const {
  if (auto it = index_.find(text::fold(word)); it != index_.end()) return entries_[it->second].second;
  if (auto it = index_.find(std::string(word)); it != index_.end()) return entries_[it->second].second;
  return std::nullopt;
}

std::optional<std::uint64_t> lookup_frequency(const FrequencyTable& table, std::string_view word) {
  return table.lookup(word);
}

}  // namespace analogion
