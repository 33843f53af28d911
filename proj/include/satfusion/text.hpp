#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace satfusion {

/// Lowercases and splits on whitespace; every punctuation character becomes
/// its own token.
std::vector<std::string> tokenize(std::string_view text);

/// Token vocabulary with PAD = 0 and OOV = 1.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kOov = 1;

  Vocabulary();

  /// Keeps tokens seen at least min_freq times, ordered by descending count
  /// then lexicographically.
  static Vocabulary build(const std::map<std::string, std::size_t>& counts, std::size_t min_freq);
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  int id(const std::string& token) const;
  std::vector<int> encode(std::string_view text, std::size_t max_tokens) const;

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// Value-to-id map for one categorical feature; id 0 is the unseen bucket.
class CategoryVocabulary {
 public:
  CategoryVocabulary() = default;
  explicit CategoryVocabulary(std::vector<std::string> values);

  int id(const std::string& value) const;
  /// Includes the unseen bucket.
  std::size_t size() const { return values_.size() + 1; }
  const std::vector<std::string>& values() const { return values_; }

 private:
  std::vector<std::string> values_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace satfusion
