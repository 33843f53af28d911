#include "satfusion/ground_truth.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "satfusion/errors.hpp"
#include "satfusion/random.hpp"

namespace satfusion {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::kHIneligible:
      return "H_ineligible";
    case Provenance::kHOther:
      return "H_other";
    case Provenance::kFeedback:
      return "F";
  }
  return "F";
}

Provenance parse_provenance(std::string_view name) {
  if (name == "H_ineligible") return Provenance::kHIneligible;
  if (name == "H_other") return Provenance::kHOther;
  if (name == "F") return Provenance::kFeedback;
  throw DataError("unknown provenance '" + std::string(name) + "'");
}

void validate(const SegmentPools& pools) {
  std::unordered_set<std::string> seen_segments;
  for (const auto& pool : pools) {
    if (!seen_segments.insert(pool.segment).second) {
      throw DataError("segment '" + pool.segment + "' listed twice");
    }
    if (!(pool.rate_ineligible >= 0.0 && pool.rate_ineligible <= 1.0) ||
        !(pool.rate_other >= 0.0 && pool.rate_other <= 1.0)) {
      throw DataError("segment '" + pool.segment + "': rates must lie in [0, 1]");
    }
    std::unordered_set<std::string> ids;
    for (const auto* group : {&pool.h_eligible, &pool.h_ineligible, &pool.feedback}) {
      for (const auto& ex : *group) {
        if (!ids.insert(ex.session_id).second) {
          throw DataError("segment '" + pool.segment + "': session '" + ex.session_id +
                          "' appears in more than one pool slot");
        }
      }
    }
  }
}

std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

CompositionCounts composition_counts(std::size_t n, double rate_ineligible, double rate_other) {
  CompositionCounts c;
  c.ineligible = std::min(n, round_half_up(rate_ineligible * static_cast<double>(n)));
  const std::size_t rest = n - c.ineligible;
  c.other = std::min(rest, round_half_up(rate_other * static_cast<double>(rest)));
  c.feedback = rest - c.other;
  return c;
}

std::string whitelist_hash(const std::set<std::string>& whitelist) {
  std::uint64_t h = fnv1a("whitelist");
  for (const auto& intent : whitelist) {
    h = fnv1a(intent, h);
    h = fnv1a(std::string_view("\n", 1), h);
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

namespace {

void draw(const SegmentPool& pool, const std::vector<PoolExample>& source, const char* source_name,
          std::size_t count, Provenance provenance, Rng& rng, ShortfallPolicy policy,
          GroundTruthSet& out) {
  if (count > source.size()) {
    if (policy == ShortfallPolicy::kStrict) {
      throw DataError("segment '" + pool.segment + "': pool " + source_name + " has " +
                      std::to_string(source.size()) + " examples but " + std::to_string(count) +
                      " are required (short by " + std::to_string(count - source.size()) + ")");
    }
    out.shortfalls.push_back({pool.segment, source_name, count, source.size()});
    count = source.size();
  }
  for (std::size_t i : rng.sample_indices(source.size(), count)) {
    const PoolExample& ex = source[i];
    out.examples.push_back({pool.segment, ex.domain, ex.session_id, ex.label, provenance, false});
  }
}

}  // namespace

GroundTruthSet compose_ground_truth(const SegmentPools& pools,
                                    const std::set<std::string>& whitelist, std::uint64_t seed,
                                    ShortfallPolicy policy) {
  validate(pools);
  GroundTruthSet gt;
  gt.seed = seed;
  gt.whitelist_hash = whitelist_hash(whitelist);
  for (const auto& pool : pools) {
    SegmentRates& rates = gt.rates[pool.segment];
    rates.rate_ineligible = pool.rate_ineligible;
    rates.rate_other = pool.rate_other;
    rates.sessions = pool.h_eligible.size() + pool.h_ineligible.size() + pool.feedback.size();

    Rng rng(derive_seed(seed, pool.segment));
    if (whitelist.count(pool.segment) == 0) {
      // H_s is the union of both annotation slots.
      std::vector<PoolExample> h = pool.h_ineligible;
      h.insert(h.end(), pool.h_eligible.begin(), pool.h_eligible.end());
      const std::size_t before = gt.examples.size();
      draw(pool, h, "H", pool.target_count, Provenance::kHIneligible, rng, policy, gt);
      // Keep the provenance of the slot each example came from.
      std::unordered_set<std::string> eligible_ids;
      for (const auto& ex : pool.h_eligible) eligible_ids.insert(ex.session_id);
      for (std::size_t i = before; i < gt.examples.size(); ++i) {
        if (eligible_ids.count(gt.examples[i].session_id)) {
          gt.examples[i].provenance = Provenance::kHOther;
        }
      }
      continue;
    }
    const CompositionCounts c =
        composition_counts(pool.target_count, pool.rate_ineligible, pool.rate_other);
    draw(pool, pool.h_ineligible, "H_ineligible", c.ineligible, Provenance::kHIneligible, rng,
         policy, gt);
    draw(pool, pool.h_eligible, "H_eligible", c.other, Provenance::kHOther, rng, policy, gt);
    draw(pool, pool.feedback, "F", c.feedback, Provenance::kFeedback, rng, policy, gt);
  }
  return gt;
}

std::size_t marking_budget(std::size_t total, std::size_t feedback_available, double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw ConfigError("feedback rate must lie in [0, 1], got " + std::to_string(rate));
  }
  const auto budget =
      static_cast<std::size_t>(std::floor(rate * static_cast<double>(total) + 1e-9));
  return std::min(budget, feedback_available);
}

GroundTruthSet mark_given_feedback(const GroundTruthSet& gt, double rate, std::uint64_t seed) {
  GroundTruthSet out = gt;
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < out.examples.size(); ++i) {
    out.examples[i].given_by_user = false;
    if (out.examples[i].provenance == Provenance::kFeedback) candidates.push_back(i);
  }
  const std::size_t budget = marking_budget(out.examples.size(), candidates.size(), rate);
  Rng rng(derive_seed(seed, "mark_given_feedback"));
  rng.shuffle(candidates);
  for (std::size_t i = 0; i < budget; ++i) out.examples[candidates[i]].given_by_user = true;
  out.marked_rate = rate;
  return out;
}

std::map<std::string, SegmentRates> estimate_rates(std::span<const Session> traffic,
                                                   const std::set<std::string>& whitelist) {
  std::map<std::string, std::size_t> ineligible, other;
  std::map<std::string, SegmentRates> out;
  for (const auto& session : traffic) {
    const Segment seg = segment_of(session, whitelist);
    SegmentRates& r = out[seg.intent];
    ++r.sessions;
    if (!seg.eligible_for_feedback || session.target().flags.ineligible()) ++ineligible[seg.intent];
    if (session.feedback != FeedbackCategory::kNoneElicited) {
      ++r.elicited;
      if (!interpretable(session.feedback)) ++other[seg.intent];
    }
  }
  for (auto& [segment, r] : out) {
    r.rate_ineligible = static_cast<double>(ineligible[segment]) / static_cast<double>(r.sessions);
    if (r.elicited > 0) {
      r.rate_other = static_cast<double>(other[segment]) / static_cast<double>(r.elicited);
    }
  }
  for (const auto& intent : whitelist) out.try_emplace(intent);
  return out;
}

std::size_t feasible_target(const SegmentPool& pool, bool whitelisted, std::size_t cap) {
  if (!whitelisted) return std::min(cap, pool.h_eligible.size() + pool.h_ineligible.size());
  for (std::size_t n = cap; n > 0; --n) {
    const CompositionCounts c = composition_counts(n, pool.rate_ineligible, pool.rate_other);
    if (c.ineligible <= pool.h_ineligible.size() && c.other <= pool.h_eligible.size() &&
        c.feedback <= pool.feedback.size()) {
      return n;
    }
  }
  return 0;
}

Json to_json(const SegmentRates& rates) {
  Json j{{"rate_ineligible", nullptr},
         {"rate_other", nullptr},
         {"sessions", rates.sessions},
         {"elicited", rates.elicited}};
  if (rates.rate_ineligible) j["rate_ineligible"] = *rates.rate_ineligible;
  if (rates.rate_other) j["rate_other"] = *rates.rate_other;
  return j;
}

namespace {

std::optional<double> optional_number(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

void write_ground_truth(std::ostream& out, const GroundTruthSet& gt) {
  Json rates = Json::object();
  for (const auto& [segment, r] : gt.rates) rates[segment] = to_json(r);
  Json shortfalls = Json::array();
  for (const auto& s : gt.shortfalls) {
    shortfalls.push_back({{"segment", s.segment},
                          {"pool", s.pool},
                          {"requested", s.requested},
                          {"available", s.available}});
  }
  Json header{{"header", true},
              {"seed", gt.seed},
              {"whitelist_hash", gt.whitelist_hash},
              {"rates", rates},
              {"shortfalls", shortfalls},
              {"marked_rate", nullptr}};
  if (gt.marked_rate) header["marked_rate"] = *gt.marked_rate;
  out << header.dump() << '\n';
  for (const auto& ex : gt.examples) {
    out << Json{{"segment", ex.segment},
                {"domain", ex.domain},
                {"session_id", ex.session_id},
                {"label", ex.label},
                {"provenance", std::string(to_string(ex.provenance))},
                {"given_by_user", ex.given_by_user}}
               .dump()
        << '\n';
  }
}

GroundTruthSet read_ground_truth(std::istream& in) {
  GroundTruthSet gt;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      if (!have_header) {
        if (!j.value("header", false)) throw DataError("first line must be the header");
        gt.seed = j.at("seed").get<std::uint64_t>();
        gt.whitelist_hash = j.at("whitelist_hash").get<std::string>();
        for (const auto& [segment, r] : j.at("rates").items()) {
          SegmentRates rates;
          rates.rate_ineligible = optional_number(r, "rate_ineligible");
          rates.rate_other = optional_number(r, "rate_other");
          rates.sessions = r.at("sessions").get<std::size_t>();
          rates.elicited = r.at("elicited").get<std::size_t>();
          gt.rates[segment] = rates;
        }
        for (const auto& s : j.at("shortfalls")) {
          gt.shortfalls.push_back({s.at("segment").get<std::string>(),
                                   s.at("pool").get<std::string>(),
                                   s.at("requested").get<std::size_t>(),
                                   s.at("available").get<std::size_t>()});
        }
        gt.marked_rate = optional_number(j, "marked_rate");
        have_header = true;
        continue;
      }
      GroundTruthExample ex;
      ex.segment = j.at("segment").get<std::string>();
      ex.domain = j.at("domain").get<std::string>();
      ex.session_id = j.at("session_id").get<std::string>();
      ex.label = j.at("label").get<int>();
      if (ex.label != 0 && ex.label != 1) throw DataError("label must be 0 or 1");
      ex.provenance = parse_provenance(j.at("provenance").get<std::string>());
      ex.given_by_user = j.at("given_by_user").get<bool>();
      gt.examples.push_back(std::move(ex));
    } catch (const Json::exception& e) {
      throw DataError("ground truth line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("ground truth line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw DataError("ground truth file has no header line");
  return gt;
}

void save_ground_truth(const std::filesystem::path& path, const GroundTruthSet& gt) {
  std::ostringstream out;
  write_ground_truth(out, gt);
  write_file_atomic(path, out.str());
}

GroundTruthSet load_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ground truth file " + path.string());
  return read_ground_truth(in);
}

}  // namespace satfusion
