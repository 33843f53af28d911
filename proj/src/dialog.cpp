#include "satfusion/dialog.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <sstream>

#include "satfusion/errors.hpp"

namespace satfusion {

namespace {

constexpr std::array<std::string_view, 5> kFlagNames{
    "BARGE_IN", "TERMINATION", "UNHANDLED", "ELICITATION_PROMPT", "ANSWERING_TURN"};

constexpr std::array<std::string_view, 5> kFeedbackNames{"YES", "NO", "SILENCE", "OTHER",
                                                         "NONE_ELICITED"};

struct WordSpan {
  std::size_t begin;
  std::string word;
};

// Lowercased alphanumeric runs with their byte offsets.
std::vector<WordSpan> word_spans(std::string_view text) {
  std::vector<WordSpan> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!std::isalnum(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    WordSpan span{i, {}};
    while (i < text.size() && std::isalnum(static_cast<unsigned char>(text[i]))) {
      span.word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
      ++i;
    }
    out.push_back(std::move(span));
  }
  return out;
}

// Removes a trailing prompt from text; returns nullopt when none matches.
std::optional<std::string> remove_prompt_suffix(const std::string& text,
                                                const std::vector<std::string>& prompts) {
  const auto words = word_spans(text);
  for (const auto& prompt : prompts) {
    const auto prompt_words = word_spans(prompt);
    if (prompt_words.empty() || prompt_words.size() > words.size()) continue;
    const std::size_t offset = words.size() - prompt_words.size();
    bool match = true;
    for (std::size_t k = 0; k < prompt_words.size(); ++k) {
      if (words[offset + k].word != prompt_words[k].word) {
        match = false;
        break;
      }
    }
    if (!match) continue;
    std::string kept = text.substr(0, words[offset].begin);
    while (!kept.empty() && std::isspace(static_cast<unsigned char>(kept.back()))) {
      kept.pop_back();
    }
    return kept;
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(TurnFlag flag) { return kFlagNames.at(static_cast<std::size_t>(flag)); }

TurnFlag parse_turn_flag(std::string_view name) {
  for (std::size_t i = 0; i < kFlagNames.size(); ++i) {
    if (kFlagNames[i] == name) return static_cast<TurnFlag>(i);
  }
  throw DataError("unknown turn flag '" + std::string(name) + "'");
}

std::vector<TurnFlag> TurnFlags::list() const {
  std::vector<TurnFlag> out;
  for (std::size_t i = 0; i < kFlagNames.size(); ++i) {
    if (has(static_cast<TurnFlag>(i))) out.push_back(static_cast<TurnFlag>(i));
  }
  return out;
}

std::string_view to_string(FeedbackCategory category) {
  return kFeedbackNames.at(static_cast<std::size_t>(category));
}

FeedbackCategory parse_feedback(std::string_view name) {
  for (std::size_t i = 0; i < kFeedbackNames.size(); ++i) {
    if (kFeedbackNames[i] == name) return static_cast<FeedbackCategory>(i);
  }
  throw DataError("unknown feedback category '" + std::string(name) + "'");
}

std::optional<int> feedback_label(FeedbackCategory c) {
  if (c == FeedbackCategory::kYes) return 0;
  if (c == FeedbackCategory::kNo) return 1;
  return std::nullopt;
}

void validate(const Turn& turn) {
  if (!std::isfinite(turn.timestamp) || turn.timestamp < 0.0) {
    throw DataError("turn timestamp must be finite and non-negative");
  }
  if (turn.flags.has(TurnFlag::kElicitationPrompt) && turn.flags.has(TurnFlag::kAnsweringTurn)) {
    throw DataError("turn cannot be both ELICITATION_PROMPT and ANSWERING_TURN");
  }
  for (const auto& [name, value] : turn.meta_numerical) {
    if (!std::isfinite(value)) throw DataError("non-finite meta feature '" + name + "'");
  }
}

namespace {

template <typename Map>
void check_keys(const Map& values, const std::vector<std::string>& expected,
                std::string_view where) {
  bool ok = values.size() == expected.size();
  for (const auto& name : expected) ok = ok && values.count(name) == 1;
  if (!ok) {
    std::ostringstream msg;
    msg << where << " features do not match the declared schema (expected";
    for (const auto& name : expected) msg << ' ' << name;
    msg << ", got";
    for (const auto& [name, _] : values) msg << ' ' << name;
    msg << ')';
    throw DataError(msg.str());
  }
}

}  // namespace

void validate(const Session& session, const MetaSchema* schema) {
  if (session.turns.empty()) throw DataError("session '" + session.session_id + "' has no turns");
  if (session.target_index >= session.turns.size()) {
    throw DataError("session '" + session.session_id + "' target_index out of range");
  }
  if (session.label && *session.label != 0 && *session.label != 1) {
    throw DataError("session '" + session.session_id + "' label must be 0 or 1");
  }
  for (const auto& turn : session.turns) validate(turn);
  if (session.feedback != FeedbackCategory::kNoneElicited) {
    bool prompt_found = false;
    for (std::size_t i = session.target_index; i < session.turns.size(); ++i) {
      prompt_found = prompt_found || session.turns[i].flags.has(TurnFlag::kElicitationPrompt);
    }
    if (!prompt_found) {
      throw DataError("session '" + session.session_id +
                      "' carries feedback but no elicitation prompt at or after the target");
    }
  }
  if (schema != nullptr) {
    for (const auto& turn : session.turns) {
      check_keys(turn.meta_categorical, schema->turn_categorical, "turn categorical");
      check_keys(turn.meta_numerical, schema->turn_numerical, "turn numerical");
    }
    check_keys(session.session_categorical, schema->session_categorical, "session categorical");
    check_keys(session.session_numerical, schema->session_numerical, "session numerical");
  }
}

std::vector<Session> sessionize(std::span<const Turn> turns, double delta_minutes) {
  if (!(delta_minutes > 0.0) || !std::isfinite(delta_minutes)) {
    throw ConfigError("sessionize: delta_minutes must be positive");
  }
  for (std::size_t i = 1; i < turns.size(); ++i) {
    if (turns[i].timestamp < turns[i - 1].timestamp) {
      throw DataError("sessionize: turns not sorted by timestamp at position " +
                      std::to_string(i));
    }
  }
  const double max_gap = delta_minutes * 60.0;
  std::vector<Session> sessions;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (i == 0 || turns[i].timestamp - turns[i - 1].timestamp > max_gap) {
      sessions.emplace_back();
      sessions.back().session_id = "s" + std::to_string(sessions.size() - 1);
    }
    sessions.back().turns.push_back(turns[i]);
  }
  for (auto& s : sessions) {
    s.segment.intent = s.turns.front().intent;
  }
  return sessions;
}

const std::vector<std::string>& default_elicitation_prompts() {
  static const std::vector<std::string> prompts{"did i answer your question",
                                                "was that what you wanted"};
  return prompts;
}

Session strip_elicitation(const Session& session, const std::vector<std::string>& prompts) {
  Session out = session;
  out.turns.clear();
  std::size_t new_target = 0;
  for (std::size_t i = 0; i < session.turns.size(); ++i) {
    const Turn& turn = session.turns[i];
    const bool is_target = i == session.target_index;
    if (is_target) {
      Turn kept = turn;
      if (kept.flags.has(TurnFlag::kElicitationPrompt)) {
        if (auto text = remove_prompt_suffix(kept.agent_text, prompts)) {
          kept.agent_text = std::move(*text);
        }
        kept.flags.clear(TurnFlag::kElicitationPrompt);
      }
      kept.flags.clear(TurnFlag::kAnsweringTurn);
      new_target = out.turns.size();
      out.turns.push_back(std::move(kept));
      continue;
    }
    if (turn.flags.has(TurnFlag::kElicitationPrompt) || turn.flags.has(TurnFlag::kAnsweringTurn)) {
      continue;
    }
    out.turns.push_back(turn);
  }
  out.target_index = new_target;
  return out;
}

Segment segment_of(const Session& session, const std::set<std::string>& whitelist) {
  if (session.turns.empty() || session.target_index >= session.turns.size()) {
    throw DataError("segment_of: session '" + session.session_id + "' has no target turn");
  }
  const std::string& intent = session.target().intent;
  if (intent.empty()) {
    throw DataError("segment_of: target turn of session '" + session.session_id +
                    "' has no intent (malformed corpus)");
  }
  return Segment{intent, session.segment.domain, whitelist.count(intent) == 1};
}

}  // namespace satfusion
