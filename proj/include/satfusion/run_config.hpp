#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "satfusion/fusion.hpp"
#include "satfusion/ground_truth.hpp"
#include "satfusion/predictor.hpp"
#include "satfusion/synth.hpp"

namespace satfusion {

/// Artifact locations; relative paths resolve against the work directory.
struct RunPaths {
  std::filesystem::path corpus = "corpus.jsonl";
  std::filesystem::path annotations = "annotations.jsonl";
  std::filesystem::path manifest = "manifest.json";
  std::filesystem::path fp_checkpoint = "fp.ckpt";
  std::filesystem::path hp_checkpoint = "hp.ckpt";
  std::filesystem::path fp_log = "fp_train_log.jsonl";
  std::filesystem::path hp_log = "hp_train_log.jsonl";
  std::filesystem::path ground_truth = "ground_truth.jsonl";
  std::filesystem::path dev_ground_truth = "ground_truth_dev.jsonl";
  std::filesystem::path reports = "reports";

  friend bool operator==(const RunPaths&, const RunPaths&) = default;
};

struct RunConfig {
  std::filesystem::path workdir = "satfusion_run";
  RunPaths paths;
  /// Master seed: the generator, splits, models and sampling all derive
  /// from it.
  std::uint64_t seed = 2021;
  GeneratorConfig generator;
  ModelConfig fp_model;
  ModelConfig hp_model;
  FusionConfig fusion;  // the whitelist is filled in from the corpus
  std::vector<double> tau_grid = default_tau_grid();
  std::vector<double> rates{0.0001, 0.01, 0.10};
  /// Share of a segment's test traffic requested as ground truth (N_s cap).
  double gt_fraction = 0.5;
  /// Share of training traffic sent to (simulated) annotation for HP.
  double annotation_fraction = 0.25;
  std::size_t top_k = 20;
  double coverage_target = 0.98;
  ShortfallPolicy shortfall = ShortfallPolicy::kStrict;

  std::filesystem::path resolve(const std::filesystem::path& p) const {
    return p.is_absolute() ? p : workdir / p;
  }
};

/// Throws ConfigError on rates outside [0, 1], duplicate paths, or invalid
/// nested configs.
void validate(const RunConfig& config);

/// Parses an INI document with sections run, paths, generator, rates,
/// segment.<intent>, model, fp, hp and fusion. Unknown keys are rejected.
RunConfig parse_run_config(const std::string& ini_text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Applies "section.key=value" overrides on top of an INI document.
RunConfig parse_run_config(const std::string& ini_text, const std::vector<std::string>& overrides);

/// The INI text of the defaults, handy as a starting file.
std::string default_run_config_ini();

Json to_json(const RunConfig& config);
/// Hex FNV-1a of the canonical JSON form.
std::string config_hash(const RunConfig& config);

std::vector<double> parse_number_list(const std::string& text);

}  // namespace satfusion
