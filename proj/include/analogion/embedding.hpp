#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "analogion/tokenizer.hpp"

namespace analogion {

using WordVector = Eigen::VectorXd;

enum class BackendKind { static_table, contextual };

/// Word-level vector provider. Read-only after construction.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;

  virtual int dimension() const = 0;
  virtual BackendKind kind() const = 0;
  virtual bool trainable() const = 0;
  /// Vector for a word (or entity) with no partner context.
  virtual WordVector embed_word(std::string_view word) const = 0;
  /// Subword split (contextual) or vocabulary miss (static).
  virtual bool is_oov(std::string_view word) const = 0;
  /// Number of subword pieces; static tables report 1.
  virtual std::size_t piece_count(std::string_view word) const = 0;
  virtual std::string describe() const = 0;
};

// --- static tables -------------------------------------------------------------

/// fastText-style table: whole-word rows plus an optional bucketed
/// character n-gram section used to compose vectors for unseen words.
class StaticBackend final : public EmbeddingBackend {
 public:
  StaticBackend(int dimension, std::vector<std::pair<std::string, WordVector>> words,
                std::vector<WordVector> ngram_buckets = {}, int min_n = 3, int max_n = 6);

  /// Text format: header "<n_words> <dim> [<n_buckets> <min_n> <max_n>]",
  /// then n_words lines "word v1 ... vd", then n_buckets lines "v1 ... vd".
  static StaticBackend load(std::istream& in);
  static StaticBackend load_file(const std::string& path);
  void save(std::ostream& out) const;

  int dimension() const override { return dim_; }
  BackendKind kind() const override { return BackendKind::static_table; }
  bool trainable() const override { return false; }
  WordVector embed_word(std::string_view word) const override { return lookup(word); }
  bool is_oov(std::string_view word) const override;
  std::size_t piece_count(std::string_view) const override { return 1; }
  std::string describe() const override;

  bool contains(std::string_view word) const;
  bool has_subwords() const { return !buckets_.empty(); }
  /// Table row for known words; mean of hashed n-gram rows for unknown ones.
  /// Multi-word entities not in the table are the mean of their words.
  WordVector lookup(std::string_view word) const;

  /// Character n-grams of "<word>" with lengths min_n..max_n.
  std::vector<std::string> char_ngrams(std::string_view word) const;
  static std::uint32_t hash_ngram(std::string_view ngram);

 private:
  WordVector lookup_single(const std::string& word) const;

  int dim_;
  std::vector<std::pair<std::string, WordVector>> rows_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<WordVector> buckets_;
  int min_n_;
  int max_n_;
};

WordVector static_lookup(const StaticBackend& backend, std::string_view word);

// --- token features ----------------------------------------------------------

/// Input vectors for individual tokens (the embedding layer of a contextual
/// encoder).
class TokenFeatures {
 public:
  virtual ~TokenFeatures() = default;
  virtual int dimension() const = 0;
  virtual WordVector features(const std::string& token) const = 0;
};

/// Deterministic token -> vector map: entries are uniform in [-1, 1) drawn
/// from a splitmix64 stream seeded with fnv1a64(token) ^ seed.
class HashedTokenFeatures final : public TokenFeatures {
 public:
  HashedTokenFeatures(std::uint64_t seed, int dimension) : seed_(seed), dim_(dimension) {}
  int dimension() const override { return dim_; }
  WordVector features(const std::string& token) const override;

 private:
  std::uint64_t seed_;
  int dim_;
};

/// Explicit token table; lookups of absent tokens throw MissingWordError.
class TableTokenFeatures final : public TokenFeatures {
 public:
  TableTokenFeatures(int dimension, std::unordered_map<std::string, WordVector> table);
  int dimension() const override { return dim_; }
  WordVector features(const std::string& token) const override;

 private:
  int dim_;
  std::unordered_map<std::string, WordVector> table_;
};

std::uint64_t fnv1a64(std::string_view s);

// --- contextual encoder --------------------------------------------------------

/// Contiguous token range [begin, end) of one word inside an encoded sequence.
struct TokenSpan {
  std::string word;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

struct ContextualConfig {
  int dimension = 32;
  /// Trainable token-wise layer h_i = W e_i + U mean(e) + b.
  bool backbone_layer = true;
  /// Token-wise feed-forward layer g_i = L h_i + c, identity-initialised,
  /// inserted before pooling.
  bool extra_layer = false;
  /// Two-way affine head over the [CLS] representation.
  bool classifier_head = false;
  /// Scale of the random init of U; W starts at identity.
  double context_init_scale = 0.1;
  std::uint64_t init_seed = 1;
  std::size_t max_sequence_length = 512;
  /// Layer to pool from: 0 = token features, 1 = backbone, 2 = extra,
  /// -1 = last available.
  int pool_layer = -1;
};

/// Pair encoder: "[CLS] w1 [SEP] w2 [SEP] ..." is encoded once and every
/// word vector is the mean of its span's output token vectors.
///
/// All parameters live in one flat vector grouped as backbone, extra and
/// head so optimisers and finite-difference checks can address them
/// uniformly.
class ContextualBackend final : public EmbeddingBackend {
 public:
  struct ParamGroup {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
    bool trainable = true;
  };

  struct Encoded {
    std::vector<std::string> tokens;
    std::vector<TokenSpan> spans;
    Eigen::MatrixXd features;   // D x n
    Eigen::VectorXd context;    // mean of feature columns
    Eigen::MatrixXd backbone;   // D x n, empty without a backbone layer
    Eigen::MatrixXd extra;      // D x n, empty without an extra layer
    const Eigen::MatrixXd& output(int layer) const;
  };

  ContextualBackend(std::shared_ptr<const Tokenizer> tokenizer, std::shared_ptr<const TokenFeatures> features,
                    ContextualConfig config, std::string id = "custom");

  int dimension() const override { return config_.dimension; }
  BackendKind kind() const override { return BackendKind::contextual; }
  bool trainable() const override;
  WordVector embed_word(std::string_view word) const override;
  bool is_oov(std::string_view word) const override;
  std::size_t piece_count(std::string_view word) const override;
  std::string describe() const override { return id_; }

  const Tokenizer& tokenizer() const { return *tokenizer_; }
  const ContextualConfig& config() const { return config_; }
  const std::string& id() const { return id_; }

  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }
  const std::vector<ParamGroup>& groups() const { return groups_; }
  const ParamGroup* group(std::string_view name) const;
  void set_trainable(std::string_view group, bool trainable);
  /// 1.0 for trainable parameters, 0.0 otherwise.
  Eigen::VectorXd trainable_mask() const;
  /// SHA-256 hex digest of a parameter group's raw bytes ("" if absent).
  std::string group_checksum(std::string_view group) const;
  bool has_head() const { return group("head") != nullptr; }

  /// Layer index that pooling and the classifier read from.
  int output_layer() const;

  /// Encodes "[CLS] words[0] [SEP] words[1] [SEP] ...". Throws
  /// AlignmentError if a word yields no tokens and SequenceTooLongError
  /// beyond max_sequence_length.
  Encoded encode(std::span<const std::string> words) const;
  WordVector pool(const Encoded& enc, const TokenSpan& span) const;

  /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output layer).
  void backward(const Encoded& enc, const Eigen::MatrixXd& d_output, Eigen::VectorXd& grad) const;

  /// Head logits for an encoded sequence (column 0 = [CLS]).
  Eigen::Vector2d head_logits(const Encoded& enc) const;
  /// Accumulates head and encoder gradients given d(loss)/d(logits).
  void head_backward(const Encoded& enc, const Eigen::Vector2d& d_logits, Eigen::VectorXd& grad) const;

 private:
  Eigen::Map<const Eigen::MatrixXd> matrix(std::string_view group, std::size_t offset, int rows, int cols) const;

  std::shared_ptr<const Tokenizer> tokenizer_;
  std::shared_ptr<const TokenFeatures> features_;
  ContextualConfig config_;
  std::string id_;
  Eigen::VectorXd params_;
  std::vector<ParamGroup> groups_;
};

std::pair<WordVector, WordVector> encode_pair(const ContextualBackend& backend, const std::string& first,
                                              const std::string& second);

struct QuadVectors {
  WordVector a, b, c, d;
};

/// (a, b) and (c, d) are encoded as two separate sequences.
QuadVectors encode_quad_for_offsets(const EmbeddingBackend& backend, const std::string& a, const std::string& b,
                                    const std::string& c, const std::string& d);

WordVector encode_single_word(const EmbeddingBackend& backend, std::string_view word);
bool is_oov(const EmbeddingBackend& backend, std::string_view word);

/// Builds a contextual backend from a checkpoint identifier:
///   "stub:dim=32,seed=7,chunk=10"  hashed token features, no trainable layers
///   "toy:dim=32,seed=7,chunk=10,context=0.1"  adds the trainable backbone layer
/// Optional "vocab=<path>" selects a WordPiece tokenizer. Pretrained
/// transformer ids are recognised but not loadable in this build.
std::unique_ptr<ContextualBackend> make_contextual_backend(std::string_view backbone_id, bool extra_layer = false,
                                                           bool classifier_head = false);

/// Whether an id names a known backbone family (stub, toy or a pretrained id).
bool is_known_backbone_id(std::string_view backbone_id);

// --- frequency table -----------------------------------------------------------

/// Pretraining frequency estimates, "word<TAB>count" per line.
class FrequencyTable {
 public:
  static FrequencyTable load(std::istream& in);
  static FrequencyTable load_file(const std::string& path);
  void dump(std::ostream& out) const;

  void set(const std::string& word, std::uint64_t count);
  /// Case-folded lookup first, then the raw form; nullopt means unknown.
  std::optional<std::uint64_t> lookup(std::string_view word) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<std::pair<std::string, std::uint64_t>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

std::optional<std::uint64_t> lookup_frequency(const FrequencyTable& table, std::string_view word);

}  // namespace analogion
