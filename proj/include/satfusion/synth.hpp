#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "satfusion/dialog.hpp"
#include "satfusion/dialog_io.hpp"

namespace satfusion {

/// Traffic rates of one segment (intent).
struct TrafficRates {
  double dissatisfaction_rate = 0.22;
  double barge_in_rate = 0.04;
  double termination_rate = 0.03;
  double unhandled_rate = 0.04;
  double elicitation_rate = 0.7;
  double silence_rate = 0.2;
  double other_feedback_rate = 0.12;

  friend bool operator==(const TrafficRates&, const TrafficRates&) = default;
};

struct GeneratorConfig {
  std::size_t num_sessions = 50000;
  std::size_t num_intents = 100;
  std::size_t num_domains = 25;
  /// Domains past the first head_domains share tail_traffic_share of traffic.
  std::size_t head_domains = 20;
  double tail_traffic_share = 0.02;
  double whitelist_fraction = 0.43;
  TrafficRates rates;
  /// Per-intent overrides of the base rates.
  std::map<std::string, TrafficRates> segment_rates;
  /// Per-intent multiplicative spread of the dissatisfaction rate, so domains
  /// differ in difficulty: rate * (1 + rate_jitter * u), u uniform in [-1, 1].
  double rate_jitter = 0.4;
  /// How much likelier a dissatisfying target turn is to carry an ineligible
  /// flag (odds multiplier, marginal flag rates preserved).
  double ineligible_dissatisfaction_boost = 4.0;
  /// Probability that a dissatisfied session shows its lexical markers.
  double lexical_separability = 0.9;
  /// Per-domain spread of lexical_separability: sep + jitter * u_d.
  double separability_jitter = 0.08;
  /// Share of satisfied sessions answered with the generic web response,
  /// which is then a legitimate answer.
  double generic_answer_rate = 0.02;
  /// Share of dissatisfied sessions whose failure is only visible as a
  /// generic, off-target answer.
  double covert_failure_share = 0.14;
  /// Chance an annotator reads a covert failure as satisfying.
  double annotator_blind_rate = 0.95;
  double feedback_noise_rate = 0.003;
  double annotation_noise_rate = 0.0;
  double start_time = 1.6e9;
  std::uint64_t seed = 2021;

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

/// Throws ConfigError on rates outside [0, 1], num_intents < 2, or other
/// inconsistent settings.
void validate(const GeneratorConfig& config);

Json to_json(const GeneratorConfig& config);
GeneratorConfig generator_config_from_json(const Json& j);

struct IntentInfo {
  std::string name;
  std::string domain;
  std::size_t domain_index = 0;
  std::size_t local_index = 0;
  double traffic_share = 0.0;
  double separability = 1.0;
  bool whitelisted = false;
  TrafficRates rates;  // after overrides and jitter
};

/// Intent catalog implied by the config: names, domains, traffic shares,
/// whitelist membership and effective rates.
std::vector<IntentInfo> intent_catalog(const GeneratorConfig& config);
std::set<std::string> whitelist_of(const std::vector<IntentInfo>& catalog);

/// Latent facts the generator knows about a session.
struct SessionTruth {
  std::string session_id;
  int label = 0;  // latent: 1 = dissatisfied
  bool covert = false;
  int annotation = 0;

  friend bool operator==(const SessionTruth&, const SessionTruth&) = default;
};

/// Stand-in for a human annotator: flips the latent label with
/// annotation_noise_rate, and misses covert failures with
/// annotator_blind_rate. Deterministic given the config seed and session id.
int annotate_oracle(const SessionTruth& truth, const GeneratorConfig& config);

struct SegmentRealization {
  std::string intent;
  std::string domain;
  bool whitelisted = false;
  std::size_t sessions = 0;
  std::size_t dissatisfied = 0;
  std::size_t ineligible = 0;
  std::size_t elicited = 0;
  std::size_t yes = 0, no = 0, silence = 0, other = 0;
  TrafficRates configured;
};

struct CorpusManifest {
  GeneratorConfig config;
  std::vector<SegmentRealization> segments;
  std::size_t sessions = 0;
  std::size_t turns = 0;
  std::size_t distinct_tokens = 0;
  double whitelist_coverage = 0.0;  // share of sessions on whitelisted intents
  std::set<std::string> whitelist;
};

Json to_json(const CorpusManifest& manifest);

struct GeneratedCorpus {
  std::vector<Session> sessions;  // label holds the latent label
  std::vector<SessionTruth> truths;
  CorpusManifest manifest;
};

/// Template-based traffic. Output order is canonical: intent catalog order,
/// then index within the intent; each intent draws from its own seed.
GeneratedCorpus generate(const GeneratorConfig& config);

/// Words whose presence marks a dissatisfying session in generated text.
const std::vector<std::string>& dissatisfaction_markers();

/// Keyword rule: true if any marker phrase occurs in the session text.
bool keyword_rule(const Session& session);

void save_truths(const std::filesystem::path& path, const std::vector<SessionTruth>& truths);
std::vector<SessionTruth> load_truths(const std::filesystem::path& path);

}  // namespace satfusion
