// Command-line front end: generate, train, compose-gt, evaluate,
// analyze-feedback, sweep.
#include <CLI11.hpp>
#include <iostream>

#include "satfusion/errors.hpp"
#include "satfusion/pipeline.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kUsage = 2,
  kConfig = 3,
  kData = 4,
  kIo = 5,
  kShape = 6,
};

}  // namespace

int main(int argc, char** argv) {
  using namespace satfusion;
  CLI::App app{"Satisfaction estimation with explicit-feedback fusion"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string workdir;
  std::vector<std::string> overrides;
  bool print_json = false;
  app.add_option("--config", config_path, "INI run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed (overrides [run] seed)");
  app.add_option("--workdir", workdir, "artifact directory (overrides [run] workdir)");
  app.add_option("--set", overrides, "section.key=value override, repeatable");
  app.add_flag("--json", print_json, "print the command summary as JSON on stdout");

  auto* generate = app.add_subcommand("generate", "write a synthetic corpus");
  auto* train = app.add_subcommand("train", "train the FP or HP model");
  std::string kind = "fp";
  train->add_option("--kind", kind, "fp or hp")->required()->check(CLI::IsMember({"fp", "hp"}));
  auto* compose = app.add_subcommand("compose-gt", "compose test and dev ground truth");
  auto* evaluate = app.add_subcommand("evaluate", "score the three approaches per feedback rate");
  std::string rates;
  evaluate->add_option("--rates", rates, "comma-separated fractions, e.g. 0.0001,0.01,0.1");
  auto* analyze = app.add_subcommand("analyze-feedback", "feedback vs. annotation agreement");
  auto* sweep = app.add_subcommand("sweep", "run the whole pipeline");
  sweep->add_option("--rates", rates, "comma-separated fractions");
  auto* show_config = app.add_subcommand("show-config", "print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    std::vector<std::string> all = overrides;
    if (seed) all.push_back("run.seed=" + std::to_string(*seed));
    if (!workdir.empty()) all.push_back("run.workdir=" + workdir);
    if (!rates.empty()) all.push_back("run.rates=" + rates);
    const std::string ini = config_path.empty() ? std::string() : read_file(config_path);
    const RunConfig config = parse_run_config(ini, all);

    Json summary;
    if (*generate) {
      summary = cmd_generate(config, std::cerr);
    } else if (*train) {
      summary = cmd_train(parse_model_kind(kind), config, std::cerr);
    } else if (*compose) {
      summary = cmd_compose_gt(config, std::cerr);
    } else if (*evaluate) {
      summary = cmd_evaluate(config, std::cerr);
    } else if (*analyze) {
      summary = cmd_analyze_feedback(config, std::cerr);
    } else if (*sweep) {
      summary = cmd_sweep(config, std::cerr);
    } else if (*show_config) {
      std::cout << to_json(config).dump(2) << "\nconfig_hash " << config_hash(config) << "\n";
      return kOk;
    }
    if (print_json) std::cout << summary.dump(2) << "\n";
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return kShape;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnexpected;
  }
}
