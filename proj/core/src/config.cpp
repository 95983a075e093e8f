#include "workstat/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "workstat/errors.hpp"
#include "workstat/numeric_format.hpp"

namespace workstat::exp {
namespace {

using json = nlohmann::json;

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void reject_unknown(const json& obj, const std::string& prefix, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + join(prefix, key) + "'", join(prefix, key));
  }
}

const json* find(const json& obj, const std::string& key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const json& require(const json& obj, const std::string& prefix, const std::string& key) {
  const json* v = find(obj, key);
  if (!v) throw ConfigError("missing required key '" + join(prefix, key) + "'", join(prefix, key));
  return *v;
}

double as_real(const json& v, const std::string& name) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf" || s == "-inf") return parse_double(s);
  }
  throw ConfigError("'" + name + "' must be a number", name);
}

double as_finite(const json& v, const std::string& name) {
  const double x = as_real(v, name);
  if (!std::isfinite(x)) throw ConfigError("'" + name + "' must be finite", name);
  return x;
}

std::int64_t as_integer(const json& v, const std::string& name) {
  if (!v.is_number_integer()) throw ConfigError("'" + name + "' must be an integer", name);
  return v.get<std::int64_t>();
}

bool as_bool(const json& v, const std::string& name) {
  if (!v.is_boolean()) throw ConfigError("'" + name + "' must be true or false", name);
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& name) {
  if (!v.is_string()) throw ConfigError("'" + name + "' must be a string", name);
  return v.get<std::string>();
}

const json& as_object(const json& v, const std::string& name) {
  if (!v.is_object()) throw ConfigError("'" + name + "' must be an object", name);
  return v;
}

json real_value(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

std::string fidelity_name(spectral::FidelityConvention c) {
  return c == spectral::FidelityConvention::one_minus_F ? "one_minus_F" : "one_minus_sqrtF";
}

std::string zero_mode_name(pert::ZeroModePolicy p) {
  return p == pert::ZeroModePolicy::regularize ? "regularize" : "exclude";
}

void line_column(const std::string& text, std::size_t byte, int& line, int& column) {
  line = 1;
  column = 0;
  const std::size_t end = std::min(byte, text.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 0;
    } else {
      ++column;
    }
  }
  if (column == 0) column = 1;
}

ProtocolParams read_protocol(const json& obj) {
  const std::string prefix = "protocol";
  as_object(obj, prefix);
  reject_unknown(obj, prefix, {"kind", "velocity", "t_total", "allow_partial", "samples"});
  ProtocolParams p;
  if (const json* v = find(obj, "kind")) {
    const auto s = as_string(*v, "protocol.kind");
    if (s == "ramp_hold") p.kind = drive::ProtocolKind::ramp_hold;
    else if (s == "quench") p.kind = drive::ProtocolKind::quench;
    else if (s == "sampled") p.kind = drive::ProtocolKind::sampled;
    else throw ConfigError("protocol.kind must be ramp_hold, quench or sampled", "protocol.kind");
  }
  if (const json* v = find(obj, "velocity")) p.velocity = as_real(*v, "protocol.velocity");
  if (const json* v = find(obj, "t_total")) p.t_total = as_finite(*v, "protocol.t_total");
  if (const json* v = find(obj, "allow_partial")) p.allow_partial = as_bool(*v, "protocol.allow_partial");
  if (const json* v = find(obj, "samples")) {
    if (!v->is_array()) throw ConfigError("'protocol.samples' must be a list of [t, lambda] pairs", "protocol.samples");
    for (const auto& s : *v) {
      if (!s.is_array() || s.size() != 2) {
        throw ConfigError("'protocol.samples' entries must be [t, lambda] pairs", "protocol.samples");
      }
      p.samples.emplace_back(as_finite(s[0], "protocol.samples"), as_finite(s[1], "protocol.samples"));
    }
  }
  return p;
}

void read_numerics(const json& obj, RunConfig& cfg) {
  const std::string prefix = "numerics";
  as_object(obj, prefix);
  reject_unknown(obj, prefix,
                 {"method", "threads", "sector_blocks", "certify", "record_timing", "zero_mode", "max_sites",
                  "u_points", "u_half_width", "quadrature_check"});
  if (const json* v = find(obj, "method")) {
    const auto s = as_string(*v, "numerics.method");
    if (s == "strang") cfg.method = drive::Method::strang;
    else if (s == "midpoint_exact") cfg.method = drive::Method::midpoint_exact;
    else if (s == "magnus4") cfg.method = drive::Method::magnus4;
    else if (s == "yoshida4") cfg.method = drive::Method::yoshida4;
    else throw ConfigError("numerics.method must be strang, midpoint_exact, magnus4 or yoshida4", "numerics.method");
  }
  if (const json* v = find(obj, "threads")) cfg.threads = static_cast<int>(as_integer(*v, "numerics.threads"));
  if (const json* v = find(obj, "sector_blocks")) cfg.sector_blocks = as_bool(*v, "numerics.sector_blocks");
  if (const json* v = find(obj, "certify")) cfg.certify = as_bool(*v, "numerics.certify");
  if (const json* v = find(obj, "record_timing")) cfg.record_timing = as_bool(*v, "numerics.record_timing");
  if (const json* v = find(obj, "zero_mode")) {
    const auto s = as_string(*v, "numerics.zero_mode");
    if (s == "regularize") cfg.zero_mode = pert::ZeroModePolicy::regularize;
    else if (s == "exclude") cfg.zero_mode = pert::ZeroModePolicy::exclude;
    else throw ConfigError("numerics.zero_mode must be regularize or exclude", "numerics.zero_mode");
  }
  if (const json* v = find(obj, "max_sites")) cfg.max_sites = static_cast<int>(as_integer(*v, "numerics.max_sites"));
  if (const json* v = find(obj, "u_points")) cfg.u_points = static_cast<int>(as_integer(*v, "numerics.u_points"));
  if (const json* v = find(obj, "u_half_width")) cfg.u_half_width = as_finite(*v, "numerics.u_half_width");
  if (const json* v = find(obj, "quadrature_check")) cfg.quadrature_check = as_bool(*v, "numerics.quadrature_check");
}

}  // namespace

std::string to_string(ScanKind kind) {
  switch (kind) {
    case ScanKind::velocity: return "velocity";
    case ScanKind::size: return "size";
    case ScanKind::lambda_scaling: return "lambda_scaling";
    case ScanKind::pert_compare: return "pert_compare";
    case ScanKind::single: return "single";
  }
  return "unknown";
}

ScanKind parse_scan_kind(const std::string& text) {
  for (ScanKind k : {ScanKind::velocity, ScanKind::size, ScanKind::lambda_scaling, ScanKind::pert_compare,
                     ScanKind::single}) {
    if (to_string(k) == text) return k;
  }
  throw ConfigError("scan must be one of velocity, size, lambda_scaling, pert_compare, single", "scan");
}

void validate(const RunConfig& cfg) {
  if (cfg.model.n_sites < 2) throw ConfigError("model.n_sites must be >= 2", "model.n_sites");
  if (cfg.model.n_sites > cfg.max_sites) {
    throw ConfigError("model.n_sites exceeds numerics.max_sites", "model.n_sites");
  }
  if (!std::isfinite(cfg.model.coupling)) throw ConfigError("model.coupling must be finite", "model.coupling");
  if (!(cfg.beta > 0.0) || !std::isfinite(cfg.beta)) throw ConfigError("beta must be > 0", "beta");
  if (!std::isfinite(cfg.lambda1) || cfg.lambda1 < 0.0) throw ConfigError("lambda1 must be >= 0", "lambda1");
  if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw ConfigError("dt must be > 0", "dt");
  if (cfg.threads < 0) throw ConfigError("numerics.threads must be >= 0", "numerics.threads");
  if (cfg.u_points < 3) throw ConfigError("numerics.u_points must be >= 3", "numerics.u_points");
  if (!(cfg.u_half_width > 0.0)) throw ConfigError("numerics.u_half_width must be > 0", "numerics.u_half_width");
  if (cfg.protocol.velocity < 0.0 || std::isnan(cfg.protocol.velocity)) {
    throw ConfigError("protocol.velocity must be >= 0", "protocol.velocity");
  }
  if (cfg.protocol.t_total < 0.0) throw ConfigError("protocol.t_total must be >= 0", "protocol.t_total");
  if (cfg.protocol.kind == drive::ProtocolKind::sampled && cfg.protocol.samples.size() < 2) {
    throw ConfigError("protocol.samples needs at least two points for the sampled kind", "protocol.samples");
  }
  for (double g : cfg.grid) {
    if (std::isnan(g)) throw ConfigError("grid values must be numbers", "grid");
  }
  switch (cfg.scan) {
    case ScanKind::velocity:
      for (double g : cfg.grid) {
        if (!(g > 0.0)) throw ConfigError("velocity grid values must be > 0 (use \"inf\" for the quench)", "grid");
      }
      break;
    case ScanKind::size:
      if (cfg.grid.empty()) throw ConfigError("size scan needs a grid of chain lengths", "grid");
      for (double g : cfg.grid) {
        if (g != std::floor(g) || g < 2 || g > cfg.max_sites) {
          throw ConfigError("size grid values must be integers in [2, numerics.max_sites]", "grid");
        }
      }
      break;
    case ScanKind::lambda_scaling:
    case ScanKind::pert_compare:
      for (double g : cfg.grid) {
        if (!(g >= 0.0) || !std::isfinite(g)) throw ConfigError("lambda grid values must be finite and >= 0", "grid");
      }
      break;
    case ScanKind::single: break;
  }
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 0, column = 0;
    line_column(text, e.byte, line, column);
    throw ConfigError("syntax error at line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                          e.what(),
                      "", line, column);
  }
  as_object(root, "config");
  reject_unknown(root, "",
                 {"model", "beta", "lambda1", "protocol", "scan", "grid", "dt", "fidelity_convention", "seed",
                  "output_dir", "numerics"});
  RunConfig cfg;

  const json& model = as_object(require(root, "", "model"), "model");
  reject_unknown(model, "model", {"n_sites", "coupling", "boundary"});
  cfg.model.n_sites = static_cast<int>(as_integer(require(model, "model", "n_sites"), "model.n_sites"));
  cfg.model.coupling = as_finite(require(model, "model", "coupling"), "model.coupling");
  if (const json* v = find(model, "boundary")) {
    if (as_string(*v, "model.boundary") != "open") throw ConfigError("model.boundary must be \"open\"", "model.boundary");
  }

  cfg.beta = as_finite(require(root, "", "beta"), "beta");
  cfg.lambda1 = as_finite(require(root, "", "lambda1"), "lambda1");
  cfg.scan = parse_scan_kind(as_string(require(root, "", "scan"), "scan"));
  cfg.dt = as_finite(require(root, "", "dt"), "dt");
  if (const json* v = find(root, "protocol")) cfg.protocol = read_protocol(*v);
  if (const json* v = find(root, "grid")) {
    if (!v->is_array()) throw ConfigError("'grid' must be a list", "grid");
    if (v->empty()) throw ConfigError("'grid' must not be empty", "grid");
    for (const auto& g : *v) cfg.grid.push_back(as_real(g, "grid"));
  }
  if (const json* v = find(root, "fidelity_convention")) {
    const auto s = as_string(*v, "fidelity_convention");
    if (s == "one_minus_F") cfg.fidelity_convention = spectral::FidelityConvention::one_minus_F;
    else if (s == "one_minus_sqrtF") cfg.fidelity_convention = spectral::FidelityConvention::one_minus_sqrtF;
    else throw ConfigError("fidelity_convention must be one_minus_F or one_minus_sqrtF", "fidelity_convention");
  }
  if (const json* v = find(root, "seed")) {
    if (!v->is_number_unsigned()) throw ConfigError("'seed' must be a non-negative integer", "seed");
    cfg.seed = v->get<std::uint64_t>();
  }
  if (const json* v = find(root, "output_dir")) cfg.output_dir = as_string(*v, "output_dir");
  if (const json* v = find(root, "numerics")) read_numerics(*v, cfg);
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_config(ss.str());
  if (const char* dir = std::getenv("WORKSTAT_OUTPUT_DIR"); dir && *dir) cfg.output_dir = dir;
  return cfg;
}

std::string dump_config(const RunConfig& cfg) {
  json root = json::object();
  root["model"] = {{"n_sites", cfg.model.n_sites}, {"coupling", cfg.model.coupling}, {"boundary", "open"}};
  root["beta"] = cfg.beta;
  root["lambda1"] = cfg.lambda1;
  json proto = json::object();
  proto["kind"] = drive::to_string(cfg.protocol.kind);
  proto["velocity"] = real_value(cfg.protocol.velocity);
  proto["t_total"] = cfg.protocol.t_total;
  proto["allow_partial"] = cfg.protocol.allow_partial;
  json samples = json::array();
  for (const auto& [t, l] : cfg.protocol.samples) samples.push_back({t, l});
  proto["samples"] = samples;
  root["protocol"] = proto;
  root["scan"] = to_string(cfg.scan);
  if (!cfg.grid.empty()) {
    json grid = json::array();
    for (double g : cfg.grid) grid.push_back(real_value(g));
    root["grid"] = grid;
  }
  root["dt"] = cfg.dt;
  root["fidelity_convention"] = fidelity_name(cfg.fidelity_convention);
  root["seed"] = cfg.seed;
  root["output_dir"] = cfg.output_dir;
  root["numerics"] = {{"method", drive::to_string(cfg.method)},
                      {"threads", cfg.threads},
                      {"sector_blocks", cfg.sector_blocks},
                      {"certify", cfg.certify},
                      {"record_timing", cfg.record_timing},
                      {"zero_mode", zero_mode_name(cfg.zero_mode)},
                      {"max_sites", cfg.max_sites},
                      {"u_points", cfg.u_points},
                      {"u_half_width", cfg.u_half_width},
                      {"quadrature_check", cfg.quadrature_check}};
  return root.dump(2) + "\n";
}

}  // namespace workstat::exp
