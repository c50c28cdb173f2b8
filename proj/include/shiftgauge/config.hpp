#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "shiftgauge/dir_trainer.hpp"
#include "shiftgauge/errors.hpp"
#include "shiftgauge/hypothesis.hpp"

// Experiment configuration: a single key-value text file with dotted block
// prefixes (dataset., model., train., proxy., output.), '#' comments, and
// strict unknown-key rejection.

namespace shiftgauge {

struct ExperimentConfig {
  // dataset block
  std::string generator = "toy2d";  // toy2d | moons | gauss | csv
  double epsilon = 0.05;
  double rotation_deg = 30.0;
  double noise = 0.1;
  double mean_shift = 0.5;
  int n = 500;
  std::uint64_t data_seed = 1;
  std::string source_path;
  std::string target_path;
  std::string target_hidden_path;
  int label_column = -1;
  bool has_header = false;

  // model block (the candidate / first-level hypothesis class)
  MlpSpec model{2, {8, 8}, 2, 1, 0.0};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  // train block
  DirConfig train;

  // proxy block
  std::vector<int> check_widths;  // empty = same as model widths
  int check_division = 0;         // 0 = same as model division
  std::vector<int> second_level_divisions;
  std::vector<int> candidate_divisions;

  // output block
  std::string out_dir = "out";
  bool emit_plots = false;

  bool standardize_was_set = false;

  MlpSpec check_spec() const {
    MlpSpec spec = model;
    if (!check_widths.empty()) spec.widths = check_widths;
    if (check_division > 0) spec.division_index = check_division;
    if (spec.division_index > static_cast<int>(spec.widths.size()))
      spec.division_index = static_cast<int>(spec.widths.size());
    return spec;
  }

  std::string task_name() const {
    if (generator == "toy2d") return str_cat("toy2d_eps", epsilon);
    if (generator == "moons") return str_cat("moons_rot", rotation_deg);
    if (generator == "gauss") return str_cat("gauss_shift", mean_shift);
    return "csv_task";
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(str_cat("bad boolean '", v, "' for key '", key, "'"));
}

inline double parse_num(const std::string& v, const std::string& key) {
  char* end = nullptr;
  double d = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError(str_cat("bad number '", v, "' for key '", key, "'"));
  return d;
}

inline int parse_int(const std::string& v, const std::string& key) {
  double d = parse_num(v, key);
  return static_cast<int>(d);
}

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& in,
                                     const std::string& origin) {
  ExperimentConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string stripped = detail::trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(str_cat(origin, ":", line_no,
                                ": expected 'key = value', got '", stripped,
                                "'"));
    std::string key = detail::trim(stripped.substr(0, eq));
    std::string value = detail::trim(stripped.substr(eq + 1));

    if (key == "dataset.generator") {
      if (value != "toy2d" && value != "moons" && value != "gauss" &&
          value != "csv")
        throw ConfigError(str_cat("unknown generator '", value, "'"));
      cfg.generator = value;
    } else if (key == "dataset.epsilon") {
      cfg.epsilon = detail::parse_num(value, key);
    } else if (key == "dataset.rotation_deg") {
      cfg.rotation_deg = detail::parse_num(value, key);
    } else if (key == "dataset.noise") {
      cfg.noise = detail::parse_num(value, key);
    } else if (key == "dataset.mean_shift") {
      cfg.mean_shift = detail::parse_num(value, key);
    } else if (key == "dataset.n") {
      cfg.n = detail::parse_int(value, key);
    } else if (key == "dataset.seed") {
      cfg.data_seed = static_cast<std::uint64_t>(detail::parse_num(value, key));
    } else if (key == "dataset.source_path") {
      cfg.source_path = value;
    } else if (key == "dataset.target_path") {
      cfg.target_path = value;
    } else if (key == "dataset.target_hidden_path") {
      cfg.target_hidden_path = value;
    } else if (key == "dataset.label_column") {
      cfg.label_column = detail::parse_int(value, key);
    } else if (key == "dataset.has_header") {
      cfg.has_header = detail::parse_bool(value, key);
    } else if (key == "model.input_dim") {
      cfg.model.input_dim = detail::parse_int(value, key);
    } else if (key == "model.widths") {
      cfg.model.widths.clear();
      for (const auto& w : detail::split_list(value))
        cfg.model.widths.push_back(detail::parse_int(w, key));
    } else if (key == "model.num_classes") {
      cfg.model.num_classes = detail::parse_int(value, key);
    } else if (key == "model.division_index") {
      cfg.model.division_index = detail::parse_int(value, key);
    } else if (key == "model.dropout_rate") {
      cfg.model.dropout_rate = detail::parse_num(value, key);
    } else if (key == "model.seeds") {
      cfg.seeds.clear();
      for (const auto& s : detail::split_list(value))
        cfg.seeds.push_back(
            static_cast<std::uint64_t>(detail::parse_num(s, key)));
    } else if (key == "train.alpha_max") {
      cfg.train.alpha_max = detail::parse_num(value, key);
    } else if (key == "train.lr") {
      cfg.train.lr = detail::parse_num(value, key);
    } else if (key == "train.epochs_t1") {
      cfg.train.epochs_t1 = detail::parse_int(value, key);
    } else if (key == "train.epochs_t2") {
      cfg.train.epochs_t2 = detail::parse_int(value, key);
    } else if (key == "train.lambda_penalty") {
      cfg.train.lambda_penalty = detail::parse_num(value, key);
    } else if (key == "train.epsilon_slack") {
      cfg.train.epsilon_slack = detail::parse_num(value, key);
    } else if (key == "train.batch_size") {
      cfg.train.batch_size = detail::parse_int(value, key);
    } else if (key == "train.seed") {
      cfg.train.seed = static_cast<std::uint64_t>(detail::parse_num(value, key));
    } else if (key == "train.divergence_method") {
      cfg.train.divergence_method = parse_divergence_method(value);
    } else if (key == "train.grl") {
      cfg.train.grl = detail::parse_bool(value, key);
    } else if (key == "train.val_fraction") {
      cfg.train.val_fraction = detail::parse_num(value, key);
    } else if (key == "train.audit_epochs") {
      cfg.train.audit_epochs = detail::parse_int(value, key);
    } else if (key == "train.snapshot_every") {
      cfg.train.snapshot_every = detail::parse_int(value, key);
    } else if (key == "train.standardize") {
      cfg.train.standardize = detail::parse_bool(value, key);
      cfg.standardize_was_set = true;
    } else if (key == "proxy.check_widths") {
      cfg.check_widths.clear();
      for (const auto& w : detail::split_list(value))
        cfg.check_widths.push_back(detail::parse_int(w, key));
    } else if (key == "proxy.check_division") {
      cfg.check_division = detail::parse_int(value, key);
    } else if (key == "proxy.second_level_divisions") {
      cfg.second_level_divisions.clear();
      for (const auto& d : detail::split_list(value))
        cfg.second_level_divisions.push_back(detail::parse_int(d, key));
    } else if (key == "proxy.candidate_divisions") {
      cfg.candidate_divisions.clear();
      for (const auto& d : detail::split_list(value))
        cfg.candidate_divisions.push_back(detail::parse_int(d, key));
    } else if (key == "output.dir") {
      cfg.out_dir = value;
    } else if (key == "output.emit_plots") {
      cfg.emit_plots = detail::parse_bool(value, key);
    } else {
      throw ConfigError(str_cat(origin, ":", line_no, ": unknown key '", key,
                                "'"));
    }
  }

  // The toy's band geometry is generated at unit scale; a source-only
  // scaler would push the target band tens of sigmas away. Explicit setting
  // wins.
  if (!cfg.standardize_was_set && cfg.generator == "toy2d")
    cfg.train.standardize = false;

  cfg.model.check();
  for (int d : cfg.candidate_divisions)
    if (d < 1 || d > static_cast<int>(cfg.model.widths.size()))
      throw ConfigError(str_cat("candidate division ", d,
                                " invalid for depth ",
                                cfg.model.widths.size() + 1));
  for (int d : cfg.second_level_divisions)
    if (d < 1 || d > static_cast<int>(cfg.model.widths.size()))
      throw ConfigError(str_cat("second-level division ", d,
                                " invalid for depth ",
                                cfg.model.widths.size() + 1));
  if (cfg.seeds.empty()) throw ConfigError("model.seeds must be non-empty");
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(str_cat("cannot open config: ", path));
  return parse_config(in, path);
}

}  // namespace shiftgauge
