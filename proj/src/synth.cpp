#include "satfusion/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "satfusion/errors.hpp"
#include "satfusion/random.hpp"
#include "satfusion/text.hpp"

namespace satfusion {

namespace {

struct DomainWords {
  const char* name;
  const char* noun;
};

constexpr std::array<DomainWords, 25> kDomains{{
    {"Weather", "forecast"},   {"Music", "playlist"},   {"Shopping", "order"},
    {"Timer", "timer"},        {"News", "headlines"},   {"Sports", "score"},
    {"Recipe", "recipe"},      {"Lights", "lights"},    {"Calendar", "meeting"},
    {"Trivia", "quiz"},        {"Traffic", "commute"},  {"Radio", "station"},
    {"Podcast", "episode"},    {"Books", "audiobook"},  {"Movies", "showtimes"},
    {"Reminder", "reminder"},  {"Alarm", "alarm"},      {"Translate", "translation"},
    {"Math", "calculation"},   {"Jokes", "joke"},       {"Flights", "flight"},
    {"Stocks", "stock price"}, {"Dictionary", "definition"}, {"Games", "game"},
    {"Horoscope", "horoscope"},
}};

constexpr std::array<const char*, 4> kActions{"Get", "Find", "Start", "Check"};

const std::array<std::vector<std::string>, 4> kUserTemplates{{
    {"tell me the {noun} for {slot}", "what is the {noun} in {slot}", "give me the {slot} {noun}"},
    {"find a {noun} about {slot}", "search for {slot} {noun}", "look up the {noun} for {slot}"},
    {"start the {slot} {noun}", "play the {noun} for {slot}", "open my {noun} for {slot}"},
    {"check the {noun} for {slot}", "how is the {slot} {noun}", "is there a {noun} for {slot}"},
}};

const std::vector<std::string> kGoodResponses{
    "here is the {noun} for {slot}: {value}", "the {noun} for {slot} is {value}",
    "okay, your {slot} {noun} is {value}", "got it, {slot} {noun} is {value}",
    "right now the {slot} {noun} is {value}"};

const std::vector<std::string> kValues{"ready",         "sunny and mild", "on time",
                                       "three items",   "up two percent", "twenty minutes",
                                       "set for seven", "in your list",   "playing now",
                                       "updated"};

const std::vector<std::string> kSlots{
    "boston",  "seattle", "paris",   "tokyo",   "denver", "london", "miami",   "chicago",
    "kitchen", "bedroom", "monday",  "friday",  "tonight", "morning", "jazz",  "rock",
    "soccer",  "tennis",  "pasta",   "salad",   "apple",   "amazon",  "spanish", "french",
    "mom",     "work",    "office",  "garden",  "weekend", "holiday"};

const std::vector<std::string> kOvertFailures{
    "sorry, i don't know that", "sorry, i can't find a {noun} for {slot}",
    "hmm, i'm not sure about that", "sorry, something went wrong"};

const std::vector<std::string> kRephrases{"no, i said {request}", "i meant the {slot} {noun}",
                                          "that's not what i asked, {request}"};

const std::vector<std::string> kCovertResponses{
    "here is something i found on the web about {slot}",
    "here is something i found on the web for {noun}"};

const std::vector<std::string> kOtherAnswers{"what time is it", "play something", "turn it up",
                                             "what's next"};

const std::vector<std::string> kDeviceTypes{"speaker", "screen", "auto"};

std::string fill(std::string text, const std::string& key, const std::string& value) {
  const std::string token = "{" + key + "}";
  for (std::size_t pos = text.find(token); pos != std::string::npos; pos = text.find(token, pos)) {
    text.replace(pos, token.size(), value);
    pos += value.size();
  }
  return text;
}

void check_rate(double r, const std::string& name) {
  if (!(r >= 0.0 && r <= 1.0)) {
    throw ConfigError("generator: " + name + " must lie in [0, 1], got " + std::to_string(r));
  }
}

void check_rates(const TrafficRates& r, const std::string& where) {
  check_rate(r.dissatisfaction_rate, where + "dissatisfaction_rate");
  check_rate(r.barge_in_rate, where + "barge_in_rate");
  check_rate(r.termination_rate, where + "termination_rate");
  check_rate(r.unhandled_rate, where + "unhandled_rate");
  check_rate(r.elicitation_rate, where + "elicitation_rate");
  check_rate(r.silence_rate, where + "silence_rate");
  check_rate(r.other_feedback_rate, where + "other_feedback_rate");
  if (r.silence_rate + r.other_feedback_rate > 1.0 + 1e-12) {
    throw ConfigError("generator: " + where + "silence_rate + other_feedback_rate exceeds 1");
  }
}

Json to_json(const TrafficRates& r) {
  return Json{{"dissatisfaction_rate", r.dissatisfaction_rate},
              {"barge_in_rate", r.barge_in_rate},
              {"termination_rate", r.termination_rate},
              {"unhandled_rate", r.unhandled_rate},
              {"elicitation_rate", r.elicitation_rate},
              {"silence_rate", r.silence_rate},
              {"other_feedback_rate", r.other_feedback_rate}};
}

TrafficRates rates_from_json(const Json& j, TrafficRates r) {
  r.dissatisfaction_rate = j.value("dissatisfaction_rate", r.dissatisfaction_rate);
  r.barge_in_rate = j.value("barge_in_rate", r.barge_in_rate);
  r.termination_rate = j.value("termination_rate", r.termination_rate);
  r.unhandled_rate = j.value("unhandled_rate", r.unhandled_rate);
  r.elicitation_rate = j.value("elicitation_rate", r.elicitation_rate);
  r.silence_rate = j.value("silence_rate", r.silence_rate);
  r.other_feedback_rate = j.value("other_feedback_rate", r.other_feedback_rate);
  return r;
}

std::string domain_name(std::size_t d) {
  if (d < kDomains.size()) return kDomains[d].name;
  return "Domain" + std::to_string(d);
}

std::string domain_noun(std::size_t d) {
  if (d < kDomains.size()) return kDomains[d].noun;
  return "item";
}

std::string intent_name(std::size_t d, std::size_t local) {
  const std::string action =
      local < kActions.size() ? kActions[local] : "Do" + std::to_string(local);
  return action + domain_name(d) + "Intent";
}

// Integer counts proportional to shares, largest remainder first (ties by
// position), summing exactly to total.
std::vector<std::size_t> allocate(std::size_t total, const std::vector<double>& shares) {
  std::vector<std::size_t> counts(shares.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    const double exact = shares[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) {
    ++counts[remainders[k % remainders.size()].second];
  }
  return counts;
}

}  // namespace

void validate(const GeneratorConfig& c) {
  if (c.num_intents < 2) throw ConfigError("generator: num_intents must be at least 2");
  if (c.num_domains < 1 || c.num_domains > c.num_intents) {
    throw ConfigError("generator: num_domains must lie in [1, num_intents]");
  }
  if (c.head_domains < 1 || c.head_domains > c.num_domains) {
    throw ConfigError("generator: head_domains must lie in [1, num_domains]");
  }
  if (c.num_sessions < 1) throw ConfigError("generator: num_sessions must be positive");
  check_rate(c.tail_traffic_share, "tail_traffic_share");
  check_rate(c.whitelist_fraction, "whitelist_fraction");
  check_rate(c.lexical_separability, "lexical_separability");
  check_rate(c.separability_jitter, "separability_jitter");
  check_rate(c.generic_answer_rate, "generic_answer_rate");
  check_rate(c.covert_failure_share, "covert_failure_share");
  check_rate(c.annotator_blind_rate, "annotator_blind_rate");
  check_rate(c.feedback_noise_rate, "feedback_noise_rate");
  check_rate(c.annotation_noise_rate, "annotation_noise_rate");
  check_rate(c.rate_jitter, "rate_jitter");
  if (!(c.ineligible_dissatisfaction_boost > 0.0)) {
    throw ConfigError("generator: ineligible_dissatisfaction_boost must be positive");
  }
  if (!std::isfinite(c.start_time) || c.start_time < 0.0) {
    throw ConfigError("generator: start_time must be finite and non-negative");
  }
  check_rates(c.rates, "");
  for (const auto& [intent, r] : c.segment_rates) check_rates(r, intent + ".");
}

Json to_json(const GeneratorConfig& c) {
  Json overrides = Json::object();
  for (const auto& [intent, r] : c.segment_rates) overrides[intent] = to_json(r);
  return Json{{"num_sessions", c.num_sessions},
              {"num_intents", c.num_intents},
              {"num_domains", c.num_domains},
              {"head_domains", c.head_domains},
              {"tail_traffic_share", c.tail_traffic_share},
              {"whitelist_fraction", c.whitelist_fraction},
              {"rates", to_json(c.rates)},
              {"segment_rates", overrides},
              {"rate_jitter", c.rate_jitter},
              {"ineligible_dissatisfaction_boost", c.ineligible_dissatisfaction_boost},
              {"lexical_separability", c.lexical_separability},
              {"separability_jitter", c.separability_jitter},
              {"generic_answer_rate", c.generic_answer_rate},
              {"covert_failure_share", c.covert_failure_share},
              {"annotator_blind_rate", c.annotator_blind_rate},
              {"feedback_noise_rate", c.feedback_noise_rate},
              {"annotation_noise_rate", c.annotation_noise_rate},
              {"start_time", c.start_time},
              {"seed", c.seed}};
}

GeneratorConfig generator_config_from_json(const Json& j) {
  GeneratorConfig c;
  c.num_sessions = j.value("num_sessions", c.num_sessions);
  c.num_intents = j.value("num_intents", c.num_intents);
  c.num_domains = j.value("num_domains", c.num_domains);
  c.head_domains = j.value("head_domains", c.head_domains);
  c.tail_traffic_share = j.value("tail_traffic_share", c.tail_traffic_share);
  c.whitelist_fraction = j.value("whitelist_fraction", c.whitelist_fraction);
  if (j.contains("rates")) c.rates = rates_from_json(j.at("rates"), c.rates);
  if (j.contains("segment_rates")) {
    for (const auto& [intent, r] : j.at("segment_rates").items()) {
      c.segment_rates[intent] = rates_from_json(r, c.rates);
    }
  }
  c.rate_jitter = j.value("rate_jitter", c.rate_jitter);
  c.ineligible_dissatisfaction_boost =
      j.value("ineligible_dissatisfaction_boost", c.ineligible_dissatisfaction_boost);
  c.lexical_separability = j.value("lexical_separability", c.lexical_separability);
  c.separability_jitter = j.value("separability_jitter", c.separability_jitter);
  c.generic_answer_rate = j.value("generic_answer_rate", c.generic_answer_rate);
  c.covert_failure_share = j.value("covert_failure_share", c.covert_failure_share);
  c.annotator_blind_rate = j.value("annotator_blind_rate", c.annotator_blind_rate);
  c.feedback_noise_rate = j.value("feedback_noise_rate", c.feedback_noise_rate);
  c.annotation_noise_rate = j.value("annotation_noise_rate", c.annotation_noise_rate);
  c.start_time = j.value("start_time", c.start_time);
  c.seed = j.value("seed", c.seed);
  validate(c);
  return c;
}

std::vector<IntentInfo> intent_catalog(const GeneratorConfig& c) {
  validate(c);
  // Head domains follow a mild power law; the tail splits its share evenly.
  std::vector<double> domain_share(c.num_domains, 0.0);
  const std::size_t tail = c.num_domains - c.head_domains;
  const double head_total = tail == 0 ? 1.0 : 1.0 - c.tail_traffic_share;
  double norm = 0.0;
  for (std::size_t d = 0; d < c.head_domains; ++d) norm += 1.0 / std::sqrt(d + 1.0);
  for (std::size_t d = 0; d < c.head_domains; ++d) {
    domain_share[d] = head_total / std::sqrt(d + 1.0) / norm;
  }
  for (std::size_t d = c.head_domains; d < c.num_domains; ++d) {
    domain_share[d] = c.tail_traffic_share / static_cast<double>(tail);
  }

  std::vector<std::size_t> per_domain(c.num_domains, 0);
  for (std::size_t i = 0; i < c.num_intents; ++i) ++per_domain[i % c.num_domains];

  std::vector<IntentInfo> catalog;
  for (std::size_t i = 0; i < c.num_intents; ++i) {
    IntentInfo info;
    info.domain_index = i % c.num_domains;
    info.local_index = i / c.num_domains;
    info.domain = domain_name(info.domain_index);
    info.name = intent_name(info.domain_index, info.local_index);
    info.traffic_share =
        domain_share[info.domain_index] / static_cast<double>(per_domain[info.domain_index]);
    {
      Rng rng(derive_seed(c.seed, "domain:" + info.domain));
      info.separability =
          std::clamp(c.lexical_separability + c.separability_jitter * rng.uniform(-1.0, 1.0),
                     0.0, 1.0);
    }
    auto it = c.segment_rates.find(info.name);
    info.rates = it == c.segment_rates.end() ? c.rates : it->second;
    if (it == c.segment_rates.end()) {
      Rng rng(derive_seed(c.seed, "rates:" + info.name));
      const double u = rng.uniform(-1.0, 1.0);
      info.rates.dissatisfaction_rate =
          std::clamp(info.rates.dissatisfaction_rate * (1.0 + c.rate_jitter * u), 0.0, 1.0);
    }
    catalog.push_back(std::move(info));
  }

  // Whitelist: head domains first, one action at a time across domains.
  std::vector<std::size_t> order(catalog.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto key = [&](std::size_t i) {
      return std::tuple(catalog[i].domain_index >= c.head_domains, catalog[i].local_index,
                        catalog[i].domain_index);
    };
    return key(a) < key(b);
  });
  const std::size_t n_white =
      std::min(catalog.size(), static_cast<std::size_t>(std::floor(
                                   c.whitelist_fraction * static_cast<double>(c.num_intents) + 0.5)));
  for (std::size_t k = 0; k < n_white; ++k) catalog[order[k]].whitelisted = true;
  return catalog;
}

std::set<std::string> whitelist_of(const std::vector<IntentInfo>& catalog) {
  std::set<std::string> out;
  for (const auto& info : catalog) {
    if (info.whitelisted) out.insert(info.name);
  }
  return out;
}

int annotate_oracle(const SessionTruth& truth, const GeneratorConfig& config) {
  Rng rng(derive_seed(config.seed, "annotate:" + truth.session_id));
  const bool blind = rng.bernoulli(config.annotator_blind_rate);
  const bool flip = rng.bernoulli(config.annotation_noise_rate);
  if (truth.covert && truth.label == 1 && blind) return 0;
  return flip ? 1 - truth.label : truth.label;
}

const std::vector<std::string>& dissatisfaction_markers() {
  static const std::vector<std::string> markers{
      "sorry",     "not sure",        "went wrong",         "no, i said",
      "i meant",   "not what i asked", "found on the web"};
  return markers;
}

bool keyword_rule(const Session& session) {
  const Session view = strip_elicitation(session);
  for (const auto& turn : view.turns) {
    for (const auto* text : {&turn.user_text, &turn.agent_text}) {
      for (const auto& marker : dissatisfaction_markers()) {
        if (text->find(marker) != std::string::npos) return true;
      }
    }
  }
  return false;
}

namespace {

class SessionBuilder {
 public:
  SessionBuilder(const GeneratorConfig& config, const std::vector<IntentInfo>& catalog,
                 Rng& rng)
      : config_(config), catalog_(catalog), rng_(rng) {}

  struct Exchange {
    std::string request;
    std::string response;
  };

  Exchange normal(const IntentInfo& intent, const std::string& slot) {
    const std::string noun = domain_noun(intent.domain_index);
    const auto& templates = kUserTemplates[intent.local_index % kUserTemplates.size()];
    std::string request = fill(fill(rng_.pick(templates), "noun", noun), "slot", slot);
    std::string response = fill(fill(fill(rng_.pick(kGoodResponses), "noun", noun), "slot", slot),
                                "value", rng_.pick(kValues));
    return {request, response};
  }

  Turn make_turn(const IntentInfo& intent, Exchange ex, double& clock, std::size_t index,
                 bool screen, double latency_mean) {
    Turn t;
    t.user_text = std::move(ex.request);
    t.agent_text = std::move(ex.response);
    t.timestamp = clock;
    clock += rng_.uniform(5.0, 60.0);
    t.intent = intent.name;
    t.meta_categorical = {{"skill", "skill." + intent.domain},
                          {"device_screen", screen ? "yes" : "no"}};
    t.meta_numerical = {
        {"response_latency_s", std::max(0.05, latency_mean + 0.3 * rng_.normal())},
        {"turn_index_in_session", static_cast<double>(index)}};
    return t;
  }

  const IntentInfo& random_intent() { return catalog_[rng_.index(catalog_.size())]; }

 private:
  const GeneratorConfig& config_;
  const std::vector<IntentInfo>& catalog_;
  Rng& rng_;
};

double flag_probability(double marginal, double dissatisfaction, double boost, bool dissatisfied) {
  const double base = marginal / (boost * dissatisfaction + (1.0 - dissatisfaction));
  return std::min(1.0, dissatisfied ? boost * base : base);
}

}  // namespace

GeneratedCorpus generate(const GeneratorConfig& config) {
  const std::vector<IntentInfo> catalog = intent_catalog(config);
  std::vector<double> shares;
  for (const auto& info : catalog) shares.push_back(info.traffic_share);
  const std::vector<std::size_t> counts = allocate(config.num_sessions, shares);

  GeneratedCorpus out;
  out.manifest.config = config;
  out.manifest.whitelist = whitelist_of(catalog);
  const auto& prompts = default_elicitation_prompts();
  std::size_t global_index = 0;
  std::size_t whitelisted_sessions = 0;

  for (std::size_t k = 0; k < catalog.size(); ++k) {
    const IntentInfo& intent = catalog[k];
    const TrafficRates& r = intent.rates;
    Rng rng(derive_seed(config.seed, "segment:" + intent.name));
    SessionBuilder builder(config, catalog, rng);
    SegmentRealization real;
    real.intent = intent.name;
    real.domain = intent.domain;
    real.whitelisted = intent.whitelisted;
    real.configured = r;

    for (std::size_t n = 0; n < counts[k]; ++n, ++global_index) {
      Session s;
      s.session_id = intent.name + "-" + std::to_string(n);
      s.segment = {intent.name, intent.domain, intent.whitelisted};
      const bool screen = rng.bernoulli(0.4);
      s.session_categorical["device_type"] =
          screen ? "screen" : (rng.bernoulli(0.7) ? "speaker" : "auto");

      const int label = rng.bernoulli(r.dissatisfaction_rate) ? 1 : 0;
      const bool covert = label == 1 && rng.bernoulli(config.covert_failure_share);
      const bool marked = label == 1 && !covert && rng.bernoulli(intent.separability);
      const bool generic = label == 0 && rng.bernoulli(config.generic_answer_rate);
      const double boost = config.ineligible_dissatisfaction_boost;
      TurnFlags flags;
      if (rng.bernoulli(flag_probability(r.barge_in_rate, r.dissatisfaction_rate, boost, label)))
        flags.set(TurnFlag::kBargeIn);
      if (rng.bernoulli(
              flag_probability(r.termination_rate, r.dissatisfaction_rate, boost, label)))
        flags.set(TurnFlag::kTermination);
      if (rng.bernoulli(flag_probability(r.unhandled_rate, r.dissatisfaction_rate, boost, label)))
        flags.set(TurnFlag::kUnhandled);

      double clock = config.start_time + 3600.0 * static_cast<double>(global_index);
      std::size_t index = 0;
      const std::size_t context = rng.index(3);
      for (std::size_t c = 0; c < context; ++c) {
        const IntentInfo& other = builder.random_intent();
        s.turns.push_back(builder.make_turn(other, builder.normal(other, rng.pick(kSlots)), clock,
                                            index++, screen, 1.1));
      }

      // The targeted exchange.
      const std::string slot = rng.pick(kSlots);
      const std::string noun = domain_noun(intent.domain_index);
      auto ex = builder.normal(intent, slot);
      const std::string request = ex.request;
      bool rephrase = false;
      if (covert || generic) {
        ex.response = fill(fill(rng.pick(kCovertResponses), "slot", slot), "noun", noun);
      } else if (marked) {
        const double u = rng.uniform();
        if (u < 0.7) {
          ex.response = fill(fill(rng.pick(kOvertFailures), "slot", slot), "noun", noun);
        } else {
          ex.response = builder.normal(intent, rng.pick(kSlots)).response;
        }
        rephrase = u >= 0.5;
      }
      if (flags.has(TurnFlag::kUnhandled)) ex.response = "that skill is not available right now";
      if (flags.has(TurnFlag::kBargeIn)) {
        const auto words = tokenize(ex.response);
        std::string cut;
        for (std::size_t w = 0; w < std::min<std::size_t>(3, words.size()); ++w) {
          cut += (w ? " " : "") + words[w];
        }
        ex.response = cut;
      }
      s.target_index = s.turns.size();
      Turn target = builder.make_turn(intent, ex, clock, index++, screen, label ? 1.45 : 1.1);
      target.flags = flags;

      const bool eligible = intent.whitelisted && !flags.ineligible();
      const bool elicited = eligible && rng.bernoulli(r.elicitation_rate);
      if (elicited) {
        target.agent_text += " " + rng.pick(prompts);
        target.flags.set(TurnFlag::kElicitationPrompt);
      }
      s.turns.push_back(std::move(target));

      if (elicited) {
        const double u = rng.uniform();
        Turn answer;
        answer.intent = "FeedbackIntent";
        if (u < r.silence_rate) {
          s.feedback = FeedbackCategory::kSilence;
        } else if (u < r.silence_rate + r.other_feedback_rate) {
          s.feedback = FeedbackCategory::kOther;
          answer.user_text = rng.pick(kOtherAnswers);
          answer.agent_text = "okay";
        } else {
          const bool noisy = rng.bernoulli(config.feedback_noise_rate);
          const int said = noisy ? 1 - label : label;
          s.feedback = said == 1 ? FeedbackCategory::kNo : FeedbackCategory::kYes;
          answer.user_text = said == 1 ? "no" : "yes";
          answer.agent_text = "thanks for your feedback";
        }
        const Turn shaped =
            builder.make_turn(intent, {answer.user_text, answer.agent_text}, clock, index++,
                              screen, 1.1);
        answer.timestamp = shaped.timestamp;
        answer.meta_categorical = shaped.meta_categorical;
        answer.meta_numerical = shaped.meta_numerical;
        answer.flags.set(TurnFlag::kAnsweringTurn);
        s.turns.push_back(std::move(answer));
      }

      if (flags.has(TurnFlag::kTermination)) {
        s.turns.push_back(builder.make_turn(intent, {"stop", "okay"}, clock, index++, screen, 1.1));
      } else if (rephrase) {
        std::string text = fill(fill(fill(rng.pick(kRephrases), "request", request), "slot", slot),
                                "noun", noun);
        auto follow = builder.normal(intent, slot);
        s.turns.push_back(
            builder.make_turn(intent, {text, follow.response}, clock, index++, screen, 1.1));
      } else if (rng.bernoulli(0.35)) {
        const IntentInfo& other = builder.random_intent();
        s.turns.push_back(builder.make_turn(other, builder.normal(other, rng.pick(kSlots)), clock,
                                            index++, screen, 1.1));
      }
      s.session_numerical["session_length"] = static_cast<double>(s.turns.size());
      s.label = label;

      SessionTruth truth{s.session_id, label, covert, 0};
      truth.annotation = annotate_oracle(truth, config);

      ++real.sessions;
      real.dissatisfied += static_cast<std::size_t>(label);
      real.ineligible += flags.ineligible() ? 1 : 0;
      real.elicited += elicited ? 1 : 0;
      switch (s.feedback) {
        case FeedbackCategory::kYes: ++real.yes; break;
        case FeedbackCategory::kNo: ++real.no; break;
        case FeedbackCategory::kSilence: ++real.silence; break;
        case FeedbackCategory::kOther: ++real.other; break;
        case FeedbackCategory::kNoneElicited: break;
      }
      out.manifest.turns += s.turns.size();
      out.sessions.push_back(std::move(s));
      out.truths.push_back(std::move(truth));
    }
    if (intent.whitelisted) whitelisted_sessions += real.sessions;
    out.manifest.segments.push_back(std::move(real));
  }

  out.manifest.sessions = out.sessions.size();
  out.manifest.whitelist_coverage =
      static_cast<double>(whitelisted_sessions) / static_cast<double>(out.sessions.size());
  std::set<std::string> tokens;
  for (const auto& s : out.sessions) {
    for (const auto& t : s.turns) {
      for (auto& w : tokenize(t.user_text)) tokens.insert(std::move(w));
      for (auto& w : tokenize(t.agent_text)) tokens.insert(std::move(w));
    }
  }
  out.manifest.distinct_tokens = tokens.size();
  return out;
}

Json to_json(const CorpusManifest& m) {
  Json segments = Json::array();
  for (const auto& s : m.segments) {
    const auto frac = [](std::size_t a, std::size_t b) {
      return b == 0 ? Json(nullptr) : Json(static_cast<double>(a) / static_cast<double>(b));
    };
    segments.push_back({{"intent", s.intent},
                        {"domain", s.domain},
                        {"whitelisted", s.whitelisted},
                        {"sessions", s.sessions},
                        {"counts",
                         {{"dissatisfied", s.dissatisfied},
                          {"ineligible", s.ineligible},
                          {"elicited", s.elicited},
                          {"yes", s.yes},
                          {"no", s.no},
                          {"silence", s.silence},
                          {"other", s.other}}},
                        {"realized",
                         {{"dissatisfaction_rate", frac(s.dissatisfied, s.sessions)},
                          {"ineligible_rate", frac(s.ineligible, s.sessions)},
                          {"elicitation_rate", frac(s.elicited, s.sessions)},
                          {"silence_rate", frac(s.silence, s.elicited)},
                          {"other_feedback_rate", frac(s.other, s.elicited)}}},
                        {"configured", to_json(s.configured)}});
  }
  return Json{{"config", to_json(m.config)},
              {"sessions", m.sessions},
              {"turns", m.turns},
              {"distinct_tokens", m.distinct_tokens},
              {"whitelist", m.whitelist},
              {"whitelist_coverage", m.whitelist_coverage},
              {"segments", segments}};
}

void save_truths(const std::filesystem::path& path, const std::vector<SessionTruth>& truths) {
  std::ostringstream out;
  for (const auto& t : truths) {
    out << Json{{"session_id", t.session_id},
                {"label", t.label},
                {"covert", t.covert},
                {"annotation", t.annotation}}
               .dump()
        << '\n';
  }
  write_file_atomic(path, out.str());
}

std::vector<SessionTruth> load_truths(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotation file " + path.string());
  std::vector<SessionTruth> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      out.push_back({j.at("session_id").get<std::string>(), j.at("label").get<int>(),
                     j.at("covert").get<bool>(), j.at("annotation").get<int>()});
    } catch (const Json::exception& e) {
      throw DataError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace satfusion
