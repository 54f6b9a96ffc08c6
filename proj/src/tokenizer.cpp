#include "analogion/tokenizer.hpp"

#include <cctype>
#include <sstream>

#include "analogion/corpus.hpp"
#include "analogion/errors.hpp"
#include "analogion/text.hpp"

namespace analogion {

WordPieceTokenizer::WordPieceTokenizer(std::vector<std::string> vocab, bool lowercase, std::string unk_token,
                                       std::size_t max_chars_per_word)
    : vocab_(vocab.begin(), vocab.end()),
      lowercase_(lowercase),
      unk_(std::move(unk_token)),
      max_chars_(max_chars_per_word) {}

WordPieceTokenizer WordPieceTokenizer::from_file(const std::string& path, bool lowercase) {
  std::istringstream in(read_file(path));
  std::vector<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) vocab.push_back(line);
  }
  if (vocab.empty()) throw ConfigError("vocabulary file '" + path + "' is empty");
  return WordPieceTokenizer(std::move(vocab), lowercase);
}

std::vector<std::string> WordPieceTokenizer::basic_split(std::string_view s) const {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      flush();
    } else if (text::is_ascii_punct(c)) {
      flush();
      words.emplace_back(1, static_cast<char>(c));
    } else {
      current.push_back(lowercase_ ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    }
  }
  flush();
  return words;
}

std::vector<std::string> WordPieceTokenizer::tokenize(std::string_view word) const {
  std::vector<std::string> out;
  for (const auto& w : basic_split(word)) {
    if (w.size() > max_chars_) {
      out.push_back(unk_);
      continue;
    }
    std::vector<std::string> pieces;
    std::size_t start = 0;
    bool bad = false;
    while (start < w.size()) {
      std::size_t end = w.size();
      std::string found;
      while (start < end) {
        std::string candidate = (start > 0 ? "##" : "") + w.substr(start, end - start);
        if (vocab_.count(candidate)) {
          found = std::move(candidate);
          break;
        }
        --end;
      }
      if (found.empty()) {
        bad = true;
        break;
      }
      pieces.push_back(std::move(found));
      start = end;
    }
    if (bad) {
      out.push_back(unk_);
    } else {
      out.insert(out.end(), pieces.begin(), pieces.end());
    }
  }
  return out;
}

std::string WordPieceTokenizer::describe() const {
  return "wordpiece(vocab=" + std::to_string(vocab_.size()) + (lowercase_ ? ",uncased)" : ",cased)");
}

ChunkTokenizer::ChunkTokenizer(std::size_t max_piece_chars, bool lowercase)
    : max_piece_(max_piece_chars), lowercase_(lowercase) {
  if (max_piece_ == 0) throw ConfigError("chunk tokenizer piece width must be positive");
}

std::vector<std::string> ChunkTokenizer::tokenize(std::string_view word) const {
  std::vector<std::string> out;
  for (auto w : text::split_whitespace(word)) {
    if (lowercase_)
      for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (std::size_t start = 0; start < w.size(); start += max_piece_)
      out.push_back((start > 0 ? "##" : "") + w.substr(start, max_piece_));
  }
  return out;
}

std::string ChunkTokenizer::describe() const {
  return "chunk(width=" + std::to_string(max_piece_) + (lowercase_ ? ",uncased)" : ",cased)");
}

}  // namespace analogion
