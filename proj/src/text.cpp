#include "satfusion/text.hpp"

#include <algorithm>
#include <cctype>

#include "satfusion/random.hpp"

namespace satfusion {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      tokens.emplace_back(1, ch);
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return tokens;
}

Vocabulary::Vocabulary() : tokens_{"<pad>", "<oov>"} {
  ids_.emplace("<pad>", kPad);
  ids_.emplace("<oov>", kOov);
}

Vocabulary Vocabulary::build(const std::map<std::string, std::size_t>& counts,
                             std::size_t min_freq) {
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [token, count] : counts) {
    if (count >= min_freq) kept.emplace_back(token, count);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  for (auto& [token, _] : kept) tokens.push_back(token);
  return from_tokens(tokens);
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  for (const auto& t : tokens) {
    if (v.ids_.count(t) != 0) continue;
    v.ids_.emplace(t, static_cast<int>(v.tokens_.size()));
    v.tokens_.push_back(t);
  }
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kOov : it->second;
}

std::vector<int> Vocabulary::encode(std::string_view text, std::size_t max_tokens) const {
  std::vector<int> ids;
  for (const auto& t : tokenize(text)) {
    if (ids.size() >= max_tokens) break;
    ids.push_back(id(t));
  }
  if (ids.empty()) ids.push_back(kPad);
  return ids;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = fnv1a("vocab");
  for (const auto& t : tokens_) {
    h = fnv1a(t, h);
    h = fnv1a(std::string_view("\x1f", 1), h);
  }
  return h;
}

CategoryVocabulary::CategoryVocabulary(std::vector<std::string> values)
    : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    ids_.emplace(values_[i], static_cast<int>(i + 1));
  }
}

int CategoryVocabulary::id(const std::string& value) const {
  auto it = ids_.find(value);
  return it == ids_.end() ? 0 : it->second;
}

}  // namespace satfusion
