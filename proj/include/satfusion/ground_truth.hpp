#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "satfusion/dialog.hpp"
#include "satfusion/dialog_io.hpp"

namespace satfusion {

enum class Provenance { kHIneligible, kHOther, kFeedback };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view name);

struct PoolExample {
  std::string session_id;
  int label = 0;
  std::string domain;

  friend bool operator==(const PoolExample&, const PoolExample&) = default;
};

/// Inputs of the composition for one segment. H_s is h_eligible plus
/// h_ineligible; F_s holds sessions with explicit YES/NO feedback.
struct SegmentPool {
  std::string segment;
  std::size_t target_count = 0;  // N_s
  std::vector<PoolExample> h_eligible;
  std::vector<PoolExample> h_ineligible;
  std::vector<PoolExample> feedback;
  double rate_ineligible = 0.0;  // R^i_s
  double rate_other = 0.0;       // R^o_s
};

using SegmentPools = std::vector<SegmentPool>;

/// Throws DataError on rates outside [0, 1] or a session in two pools.
void validate(const SegmentPools& pools);

struct GroundTruthExample {
  std::string segment;
  std::string domain;
  std::string session_id;
  int label = 0;
  Provenance provenance = Provenance::kHIneligible;
  bool given_by_user = false;

  friend bool operator==(const GroundTruthExample&, const GroundTruthExample&) = default;
};

struct Shortfall {
  std::string segment;
  std::string pool;
  std::size_t requested = 0;
  std::size_t available = 0;

  friend bool operator==(const Shortfall&, const Shortfall&) = default;
};

struct SegmentRates {
  std::optional<double> rate_ineligible;
  std::optional<double> rate_other;
  std::size_t sessions = 0;
  std::size_t elicited = 0;

  friend bool operator==(const SegmentRates&, const SegmentRates&) = default;
};

struct GroundTruthSet {
  std::uint64_t seed = 0;
  std::string whitelist_hash;
  std::map<std::string, SegmentRates> rates;
  /// Grouped by segment in pool order, each group in draw order.
  std::vector<GroundTruthExample> examples;
  std::vector<Shortfall> shortfalls;
  /// Set by mark_given_feedback.
  std::optional<double> marked_rate;

  friend bool operator==(const GroundTruthSet&, const GroundTruthSet&) = default;
};

struct CompositionCounts {
  std::size_t ineligible = 0;  // n^hi
  std::size_t other = 0;       // n^ho
  std::size_t feedback = 0;    // n^f

  friend bool operator==(const CompositionCounts&, const CompositionCounts&) = default;
};

/// round(x) with halves rounded up.
std::size_t round_half_up(double x);

/// n^hi = round(R^i N), n^ho = round(R^o (N - n^hi)), n^f = N - n^hi - n^ho.
CompositionCounts composition_counts(std::size_t n, double rate_ineligible, double rate_other);

enum class ShortfallPolicy { kStrict, kLenient };

std::string whitelist_hash(const std::set<std::string>& whitelist);

/// Weaves feedback and annotation pools per segment. Segments outside the
/// whitelist draw N_s from H_s; whitelisted segments split N_s by the
/// ineligible and other-category rates. Sampling is uniform without
/// replacement from a per-segment seed. Strict mode throws DataError on any
/// pool shortfall; lenient mode clamps and records it.
GroundTruthSet compose_ground_truth(const SegmentPools& pools,
                                    const std::set<std::string>& whitelist, std::uint64_t seed,
                                    ShortfallPolicy policy = ShortfallPolicy::kStrict);

/// floor(rate * total + eps), capped by the number of feedback examples.
std::size_t marking_budget(std::size_t total, std::size_t feedback_available, double rate);

/// Marks feedback examples as given by the user. Selection follows one
/// seeded permutation, so marked sets for increasing rates are nested.
GroundTruthSet mark_given_feedback(const GroundTruthSet& gt, double rate, std::uint64_t seed);

/// Per-segment R^i (share of sessions that could not be elicited) and R^o
/// (share of elicited sessions whose answer is neither YES nor NO). Segments
/// on the whitelist with no traffic are reported with absent rates.
std::map<std::string, SegmentRates> estimate_rates(std::span<const Session> traffic,
                                                   const std::set<std::string>& whitelist);

/// Largest N <= cap whose composition the pool can satisfy.
std::size_t feasible_target(const SegmentPool& pool, bool whitelisted, std::size_t cap);

Json to_json(const SegmentRates& rates);

void write_ground_truth(std::ostream& out, const GroundTruthSet& gt);
GroundTruthSet read_ground_truth(std::istream& in);
void save_ground_truth(const std::filesystem::path& path, const GroundTruthSet& gt);
GroundTruthSet load_ground_truth(const std::filesystem::path& path);

}  // namespace satfusion
