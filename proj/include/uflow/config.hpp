#pragma once

// Flat key-value configuration: one `key = value` per line, `#` comments.
// Typed getters fall back to built-in defaults, so a config file only needs
// the keys it wants to override.

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "uflow/adam.hpp"
#include "uflow/data.hpp"
#include "uflow/error.hpp"
#include "uflow/losses.hpp"
#include "uflow/variational.hpp"

namespace uflow {

class Config {
 public:
  Config() = default;

  static Config from_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      size_t eq = trimmed.find('=');
      require(eq != std::string::npos, ErrorCode::BadConfig,
              "config line " + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(trimmed.substr(0, eq));
      std::string value = trim(trimmed.substr(eq + 1));
      require(!key.empty(), ErrorCode::BadConfig,
              "config line " + std::to_string(lineno) + ": empty key");
      cfg.kv_[key] = value;
    }
    return cfg;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::MissingFile, "cannot open config " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback = "") const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    char* end = nullptr;
    double v = std::strtod(it->second.c_str(), &end);
    require(end && *end == '\0' && end != it->second.c_str(), ErrorCode::BadConfig,
            "config: bad number for " + key + ": '" + it->second + "'");
    return v;
  }

  int64_t get_int(const std::string& key, int64_t fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    // allow scientific notation for large iteration counts
    double v = get_double(key, 0.0);
    return int64_t(v);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    const std::string& s = it->second;
    if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "off" || s == "no") return false;
    throw Error(ErrorCode::BadConfig, "config: bad boolean for " + key + ": '" + s + "'");
  }

  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::vector<double> out;
    std::istringstream ss(it->second);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = trim(tok);
      if (tok.empty()) continue;
      char* end = nullptr;
      out.push_back(std::strtod(tok.c_str(), &end));
      require(end && *end == '\0', ErrorCode::BadConfig, "config: bad list entry for " + key);
    }
    return out;
  }

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  static std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }

  std::map<std::string, std::string> kv_;
};

// ---------------------------------------------------------------------------
// Typed views over the shared key set.

inline LossConfig loss_config_from(const Config& cfg) {
  LossConfig lc;
  lc.photo_params.alpha = cfg.get_double("penalty.alpha_photo", 0.25);
  lc.smooth_params.alpha = cfg.get_double("penalty.alpha_smooth", 0.37);
  lc.photo_params.epsilon = cfg.get_double("penalty.epsilon", 1e-3);
  lc.smooth_params.epsilon = lc.photo_params.epsilon;
  lc.lambda = cfg.get_double("loss.lambda", 1.0);
  lc.mask_out_of_bounds = cfg.get_bool("loss.mask_oob", true);
  lc.normalize_by_pixel_count = cfg.get_bool("loss.normalize", true);
  lc.validate();
  return lc;
}

inline std::vector<double> level_weights_from(const Config& cfg) {
  return cfg.get_double_list("loss.level_weights", {1.0, 1.0, 1.0});
}

inline PyramidConfig solver_config_from(const Config& cfg) {
  PyramidConfig pc;
  pc.levels = int(cfg.get_int("solver.levels", pc.levels));
  pc.iterations_per_level = int(cfg.get_int("solver.iterations_per_level", pc.iterations_per_level));
  pc.optimizer.lr = cfg.get_double("solver.lr", pc.optimizer.lr);
  pc.optimizer.beta1 = cfg.get_double("solver.beta1", 0.9);
  pc.optimizer.beta2 = cfg.get_double("solver.beta2", 0.999);
  pc.optimizer.eps_hat = cfg.get_double("solver.eps_hat", 1e-8);
  pc.lr_decay = cfg.get_double("solver.lr_decay", pc.lr_decay);
  pc.optimizer.validate();
  return pc;
}

inline AugmentConfig augment_config_from(const Config& cfg) {
  AugmentConfig ac;
  ac.noise_sigma = cfg.get_double("aug.noise_sigma", ac.noise_sigma);
  ac.contrast_lo = cfg.get_double("aug.contrast_lo", ac.contrast_lo);
  ac.contrast_hi = cfg.get_double("aug.contrast_hi", ac.contrast_hi);
  ac.color_lo = cfg.get_double("aug.color_lo", ac.color_lo);
  ac.color_hi = cfg.get_double("aug.color_hi", ac.color_hi);
  ac.gamma_lo = cfg.get_double("aug.gamma_lo", ac.gamma_lo);
  ac.gamma_hi = cfg.get_double("aug.gamma_hi", ac.gamma_hi);
  ac.brightness_lo = cfg.get_double("aug.brightness_lo", ac.brightness_lo);
  ac.brightness_hi = cfg.get_double("aug.brightness_hi", ac.brightness_hi);
  ac.translation_range = cfg.get_double("aug.translation_range", ac.translation_range);
  ac.allow_flip = cfg.get_bool("aug.allow_flip", ac.allow_flip);
  ac.rotation_range_deg = cfg.get_double("aug.rotation_range_deg", ac.rotation_range_deg);
  ac.scale_lo = cfg.get_double("aug.scale_lo", ac.scale_lo);
  ac.scale_hi = cfg.get_double("aug.scale_hi", ac.scale_hi);
  ac.relative_translation = cfg.get_double("aug.relative_translation", ac.relative_translation);
  ac.validate();
  return ac;
}

}  // namespace uflow
