#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace analogion {

/// Splits a word (or multi-word entity) into subword pieces.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  virtual std::vector<std::string> tokenize(std::string_view word) const = 0;
  virtual std::string describe() const = 0;

  std::string cls_token() const { return "[CLS]"; }
  std::string sep_token() const { return "[SEP]"; }
};

/// Greedy longest-match-first WordPiece with "##" continuation pieces.
/// Words are pre-split on whitespace and ASCII punctuation.
class WordPieceTokenizer final : public Tokenizer {
 public:
  explicit WordPieceTokenizer(std::vector<std::string> vocab, bool lowercase = true,
                              std::string unk_token = "[UNK]", std::size_t max_chars_per_word = 100);

  /// One token per line, as in BERT vocab.txt files.
  static WordPieceTokenizer from_file(const std::string& path, bool lowercase = true);

  std::vector<std::string> tokenize(std::string_view word) const override;
  std::string describe() const override;
  bool contains(const std::string& piece) const { return vocab_.count(piece) != 0; }

 private:
  std::vector<std::string> basic_split(std::string_view text) const;

  std::unordered_set<std::string> vocab_;
  bool lowercase_;
  std::string unk_;
  std::size_t max_chars_;
};

/// Vocabulary-free tokenizer: each whitespace-separated word becomes one
/// token when it has at most `max_piece_chars` characters, otherwise it is
/// cut into fixed-width pieces ("electromag", "##netism", ...).
class ChunkTokenizer final : public Tokenizer {
 public:
  explicit ChunkTokenizer(std::size_t max_piece_chars = 10, bool lowercase = true);

  std::vector<std::string> tokenize(std::string_view word) const override;
  std::string describe() const override;

 private:
  std::size_t max_piece_;
  bool lowercase_;
};

}  // namespace analogion
