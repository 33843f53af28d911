#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace satfusion {

enum class TurnFlag : std::uint8_t {
  kBargeIn = 0,
  kTermination = 1,
  kUnhandled = 2,
  kElicitationPrompt = 3,
  kAnsweringTurn = 4,
};

std::string_view to_string(TurnFlag flag);
TurnFlag parse_turn_flag(std::string_view name);

/// Small bitset over TurnFlag.
class TurnFlags {
 public:
  TurnFlags() = default;
  TurnFlags(std::initializer_list<TurnFlag> flags) {
    for (auto f : flags) set(f);
  }

  bool has(TurnFlag f) const { return (bits_ >> static_cast<unsigned>(f)) & 1U; }
  void set(TurnFlag f) { bits_ |= static_cast<std::uint8_t>(1U << static_cast<unsigned>(f)); }
  void clear(TurnFlag f) { bits_ &= static_cast<std::uint8_t>(~(1U << static_cast<unsigned>(f))); }
  bool empty() const { return bits_ == 0; }

  /// True for any of barge-in, termination, unhandled.
  bool ineligible() const {
    return has(TurnFlag::kBargeIn) || has(TurnFlag::kTermination) ||
           has(TurnFlag::kUnhandled);
  }

  std::vector<TurnFlag> list() const;

  friend bool operator==(TurnFlags, TurnFlags) = default;

 private:
  std::uint8_t bits_ = 0;
};

enum class FeedbackCategory : std::uint8_t { kYes, kNo, kSilence, kOther, kNoneElicited };

std::string_view to_string(FeedbackCategory category);
FeedbackCategory parse_feedback(std::string_view name);

/// YES and NO are the only categories the waterfall treats as interpretable.
constexpr bool interpretable(FeedbackCategory c) {
  return c == FeedbackCategory::kYes || c == FeedbackCategory::kNo;
}

/// YES -> 0 (satisfied), NO -> 1 (dissatisfied); nullopt otherwise.
std::optional<int> feedback_label(FeedbackCategory c);

/// One user utterance plus the agent response and its meta features.
struct Turn {
  std::string user_text;
  std::string agent_text;
  double timestamp = 0.0;  // seconds since epoch
  std::map<std::string, std::string> meta_categorical;
  std::map<std::string, double> meta_numerical;
  std::string intent;
  TurnFlags flags;

  friend bool operator==(const Turn&, const Turn&) = default;
};

struct Segment {
  std::string intent;
  std::string domain;
  bool eligible_for_feedback = false;

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct Session {
  std::string session_id;
  std::vector<Turn> turns;
  std::size_t target_index = 0;
  FeedbackCategory feedback = FeedbackCategory::kNoneElicited;
  std::optional<int> label;  // 1 = dissatisfied
  Segment segment;
  std::map<std::string, std::string> session_categorical;
  std::map<std::string, double> session_numerical;

  const Turn& target() const { return turns.at(target_index); }

  friend bool operator==(const Session&, const Session&) = default;
};

/// Feature names a corpus declares at creation; every turn and session must
/// use exactly these keys.
struct MetaSchema {
  std::vector<std::string> turn_categorical{"skill", "device_screen"};
  std::vector<std::string> turn_numerical{"response_latency_s", "turn_index_in_session"};
  std::vector<std::string> session_categorical{"device_type"};
  std::vector<std::string> session_numerical{"session_length"};

  friend bool operator==(const MetaSchema&, const MetaSchema&) = default;
};

/// Throws DataError on any Turn invariant violation.
void validate(const Turn& turn);

/// Throws DataError on any Session invariant violation; checks the meta
/// schema when one is given.
void validate(const Session& session, const MetaSchema* schema = nullptr);

constexpr double kDefaultSessionGapMinutes = 30.0;

/// Splits a time-ordered turn list into maximal sessions whose adjacent gaps
/// are at most delta_minutes. Output sessions target their first turn.
std::vector<Session> sessionize(std::span<const Turn> turns,
                                double delta_minutes = kDefaultSessionGapMinutes);

/// Default elicitation prompt texts, matched case-insensitively.
const std::vector<std::string>& default_elicitation_prompts();

/// Removes the feedback prompt and answering turn. A prompt flagged on the
/// target turn itself is removed as a text suffix; any other flagged turn is
/// dropped. Idempotent; the feedback field is preserved.
Session strip_elicitation(const Session& session,
                          const std::vector<std::string>& prompts = default_elicitation_prompts());

/// Segment of the targeted turn. Domain is carried over from the session.
Segment segment_of(const Session& session, const std::set<std::string>& whitelist);

}  // namespace satfusion
