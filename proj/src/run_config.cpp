#include "satfusion/run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <set>
#include <sstream>

#include "satfusion/errors.hpp"
#include "satfusion/random.hpp"

namespace satfusion {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (trim(text.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(where + ": '" + text + "' is not a number");
}

bool parse_bool(const std::string& text, const std::string& where) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(where + ": '" + text + "' is not a boolean");
}

// Overwrites keys of target with INI values, converted to the JSON type
// already held there. Null targets accept "auto" (null) or a number.
void apply_section(Json& target, const pt::ptree& section, const std::string& name) {
  for (const auto& [key, node] : section) {
    const std::string where = "[" + name + "] " + key;
    if (!target.contains(key)) throw ConfigError(where + ": unknown key");
    Json& slot = target[key];
    const std::string value = trim(node.get_value<std::string>());
    if (slot.is_boolean()) {
      slot = parse_bool(value, where);
    } else if (slot.is_number_unsigned() || slot.is_number_integer()) {
      const double v = parse_number(value, where);
      if (v < 0 || v != static_cast<double>(static_cast<std::uint64_t>(v))) {
        throw ConfigError(where + ": expected a non-negative integer");
      }
      slot = static_cast<std::uint64_t>(v);
    } else if (slot.is_number()) {
      slot = parse_number(value, where);
    } else if (slot.is_array()) {
      slot = parse_number_list(value);
    } else if (slot.is_null()) {
      slot = value == "auto" ? Json(nullptr) : Json(parse_number(value, where));
    } else if (slot.is_string()) {
      slot = value;
    } else {
      throw ConfigError(where + ": cannot be set from a config file");
    }
  }
}

}  // namespace

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number(item, "list"));
  }
  return out;
}

void validate(const RunConfig& c) {
  validate(c.generator);
  validate(c.fp_model);
  validate(c.hp_model);
  validate(c.fusion);
  if (c.rates.empty()) throw ConfigError("rate list is empty");
  for (double r : c.rates) {
    if (!(r >= 0.0 && r <= 1.0)) {
      throw ConfigError("feedback rates are fractions in [0, 1]; got " + std::to_string(r) +
                        " (0.01% is written 0.0001)");
    }
  }
  if (c.tau_grid.empty()) throw ConfigError("tau grid is empty");
  for (double t : c.tau_grid) {
    if (!(t >= 0.5 && t <= 1.0)) throw ConfigError("tau grid values must lie in [0.5, 1]");
  }
  if (!(c.gt_fraction > 0.0 && c.gt_fraction <= 1.0)) {
    throw ConfigError("gt_fraction must lie in (0, 1]");
  }
  if (!(c.annotation_fraction > 0.0 && c.annotation_fraction <= 1.0)) {
    throw ConfigError("annotation_fraction must lie in (0, 1]");
  }
  if (c.top_k < 1) throw ConfigError("top_k must be positive");
  if (!(c.coverage_target > 0.0 && c.coverage_target <= 1.0)) {
    throw ConfigError("coverage_target must lie in (0, 1]");
  }
  const std::vector<std::filesystem::path> paths{
      c.paths.corpus,  c.paths.annotations,  c.paths.manifest,     c.paths.fp_checkpoint,
      c.paths.hp_checkpoint, c.paths.fp_log, c.paths.hp_log,       c.paths.ground_truth,
      c.paths.dev_ground_truth, c.paths.reports};
  std::set<std::filesystem::path> seen;
  for (const auto& p : paths) {
    if (!seen.insert(c.resolve(p).lexically_normal()).second) {
      throw ConfigError("path " + p.string() + " is used for two artifacts");
    }
  }
}

RunConfig parse_run_config(const std::string& ini_text) { return parse_run_config(ini_text, {}); }

RunConfig parse_run_config(const std::string& ini_text, const std::vector<std::string>& overrides) {
  pt::ptree tree;
  try {
    std::istringstream in(ini_text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config file: ") + e.what());
  }
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    const auto dot = item.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ConfigError("override '" + item + "' must look like section.key=value");
    }
    // Segment sections contain a dot themselves: split on the last dot
    // before '='.
    const auto last_dot = item.rfind('.', eq);
    const std::string section = item.substr(0, last_dot);
    const std::string key = item.substr(last_dot + 1, eq - last_dot - 1);
    auto found = tree.find(section);
    pt::ptree& target = found == tree.not_found()
                            ? tree.push_back({section, pt::ptree()})->second
                            : found->second;
    target.put(pt::ptree::path_type(key, '\0'), item.substr(eq + 1));
  }

  RunConfig c;
  Json run{{"workdir", c.workdir.string()},
           {"seed", c.seed},
           {"rates", c.rates},
           {"gt_fraction", c.gt_fraction},
           {"annotation_fraction", c.annotation_fraction},
           {"top_k", c.top_k},
           {"coverage_target", c.coverage_target},
           {"shortfall", "strict"}};
  Json paths = to_json(c)["paths"];
  Json generator = to_json(c.generator);
  Json rates = generator["rates"];
  Json model = to_json(c.fp_model);
  Json fp = model, hp = model;
  Json fusion{{"tau", c.fusion.tau},
              {"tau_grid", c.tau_grid},
              {"decision_cutoff", c.fusion.decision_cutoff},
              {"fp_requires_eligible_turn", c.fusion.fp_requires_eligible_turn}};
  std::vector<std::string> segments;

  for (const auto& [name, section] : tree) {
    if (section.empty() && !section.data().empty()) {
      throw ConfigError("config key '" + name + "' must sit inside a section");
    }
    if (name == "run") {
      apply_section(run, section, name);
    } else if (name == "paths") {
      apply_section(paths, section, name);
    } else if (name == "generator") {
      apply_section(generator, section, name);
    } else if (name == "rates") {
      apply_section(rates, section, name);
    } else if (name.rfind("segment.", 0) == 0) {
      segments.push_back(name.substr(8));
    } else if (name == "model") {
      apply_section(model, section, name);
    } else if (name == "fp" || name == "hp" || name == "fusion") {
      // applied after [model] below
    } else {
      throw ConfigError("unknown config section [" + name + "]");
    }
  }
  fp = model;
  hp = model;
  if (auto it = tree.find("fp"); it != tree.not_found()) apply_section(fp, it->second, "fp");
  if (auto it = tree.find("hp"); it != tree.not_found()) apply_section(hp, it->second, "hp");
  if (auto it = tree.find("fusion"); it != tree.not_found()) {
    apply_section(fusion, it->second, "fusion");
  }

  c.workdir = run["workdir"].get<std::string>();
  c.seed = run["seed"].get<std::uint64_t>();
  c.rates = run["rates"].get<std::vector<double>>();
  c.gt_fraction = run["gt_fraction"].get<double>();
  c.annotation_fraction = run["annotation_fraction"].get<double>();
  c.top_k = run["top_k"].get<std::size_t>();
  c.coverage_target = run["coverage_target"].get<double>();
  const std::string shortfall = run["shortfall"].get<std::string>();
  if (shortfall == "strict") {
    c.shortfall = ShortfallPolicy::kStrict;
  } else if (shortfall == "lenient") {
    c.shortfall = ShortfallPolicy::kLenient;
  } else {
    throw ConfigError("[run] shortfall must be strict or lenient");
  }

  c.paths.corpus = paths["corpus"].get<std::string>();
  c.paths.annotations = paths["annotations"].get<std::string>();
  c.paths.manifest = paths["manifest"].get<std::string>();
  c.paths.fp_checkpoint = paths["fp_checkpoint"].get<std::string>();
  c.paths.hp_checkpoint = paths["hp_checkpoint"].get<std::string>();
  c.paths.fp_log = paths["fp_log"].get<std::string>();
  c.paths.hp_log = paths["hp_log"].get<std::string>();
  c.paths.ground_truth = paths["ground_truth"].get<std::string>();
  c.paths.dev_ground_truth = paths["dev_ground_truth"].get<std::string>();
  c.paths.reports = paths["reports"].get<std::string>();

  generator["rates"] = rates;
  for (const auto& intent : segments) {
    Json r = rates;
    apply_section(r, tree.find("segment." + intent)->second, "segment." + intent);
    generator["segment_rates"][intent] = r;
  }
  generator["seed"] = c.seed;
  c.generator = generator_config_from_json(generator);

  fp["seed"] = derive_seed(c.seed, "model:FP");
  hp["seed"] = derive_seed(c.seed, "model:HP");
  c.fp_model = model_config_from_json(fp);
  c.hp_model = model_config_from_json(hp);

  c.fusion.tau = fusion["tau"].get<double>();
  c.tau_grid = fusion["tau_grid"].get<std::vector<double>>();
  c.fusion.decision_cutoff = fusion["decision_cutoff"].get<double>();
  c.fusion.fp_requires_eligible_turn = fusion["fp_requires_eligible_turn"].get<bool>();
  validate(c);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_file(path));
}

std::string default_run_config_ini() {
  const RunConfig c = parse_run_config("");
  const Json j = to_json(c);
  std::ostringstream out;
  const auto scalar = [](const Json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return "auto";
    if (v.is_array()) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i].dump();
      return s;
    }
    return v.dump();
  };
  const auto section = [&](const std::string& name, const Json& obj,
                           const std::set<std::string>& skip) {
    out << "[" << name << "]\n";
    for (const auto& [k, v] : obj.items()) {
      if (skip.count(k) || v.is_object()) continue;
      out << k << " = " << scalar(v) << "\n";
    }
    out << "\n";
  };
  section("run", j["run"], {});
  section("paths", j["paths"], {});
  section("generator", j["generator"], {"seed", "segment_rates", "rates"});
  section("rates", j["generator"]["rates"], {});
  section("model", j["fp_model"], {"seed"});
  section("fusion", j["fusion"], {"fp_whitelist"});
  return out.str();
}

Json to_json(const RunConfig& c) {
  Json fusion{{"tau", c.fusion.tau},
              {"tau_grid", c.tau_grid},
              {"decision_cutoff", c.fusion.decision_cutoff},
              {"fp_requires_eligible_turn", c.fusion.fp_requires_eligible_turn}};
  return Json{{"run",
               {{"workdir", c.workdir.string()},
                {"seed", c.seed},
                {"rates", c.rates},
                {"gt_fraction", c.gt_fraction},
                {"annotation_fraction", c.annotation_fraction},
                {"top_k", c.top_k},
                {"coverage_target", c.coverage_target},
                {"shortfall", c.shortfall == ShortfallPolicy::kStrict ? "strict" : "lenient"}}},
              {"paths",
               {{"corpus", c.paths.corpus.string()},
                {"annotations", c.paths.annotations.string()},
                {"manifest", c.paths.manifest.string()},
                {"fp_checkpoint", c.paths.fp_checkpoint.string()},
                {"hp_checkpoint", c.paths.hp_checkpoint.string()},
                {"fp_log", c.paths.fp_log.string()},
                {"hp_log", c.paths.hp_log.string()},
                {"ground_truth", c.paths.ground_truth.string()},
                {"dev_ground_truth", c.paths.dev_ground_truth.string()},
                {"reports", c.paths.reports.string()}}},
              {"generator", to_json(c.generator)},
              {"fp_model", to_json(c.fp_model)},
              {"hp_model", to_json(c.hp_model)},
              {"fusion", fusion}};
}

std::string config_hash(const RunConfig& c) {
  Json j = to_json(c);
  // Where artifacts live does not change what they contain.
  j["run"].erase("workdir");
  std::ostringstream out;
  out << std::hex << fnv1a(j.dump());
  return out.str();
}

}  // namespace satfusion
