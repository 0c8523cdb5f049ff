#pragma once

// JSON specifications for processes, channels, sources and experiments.
// Unknown keys are rejected at every level.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uqc/channel.hpp"
#include "uqc/classical_process.hpp"
#include "uqc/error.hpp"
#include "uqc/quantum_source.hpp"
#include "uqc/universal_projector.hpp"

namespace uqc {

using Json = nlohmann::json;

namespace config_detail {

inline void require_object(const Json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
}

inline void allow_keys(const Json& j, std::initializer_list<const char*> keys,
                       const std::string& where) {
  require_object(j, where);
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError(where + ": unknown field \"" + key + "\"");
}

inline const Json& field(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing field \"" + key + "\"");
  return j.at(key);
}

inline double number(const Json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

inline std::size_t count(const Json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<long long>() < 0)
    throw ConfigError(where + ": expected a non-negative integer");
  return static_cast<std::size_t>(j.get<long long>());
}

inline std::vector<double> numbers(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : j) out.push_back(number(x, where));
  return out;
}

inline Complex complex_entry(const Json& j, const std::string& where) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  throw ConfigError(where + ": matrix entries are numbers or [re, im] pairs");
}

}  // namespace config_detail

/// Row-major nested array; entries are numbers or [re, im].
inline Matrix parse_matrix(const Json& j, const std::string& where = "matrix") {
  using namespace config_detail;
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ConfigError(where + ": expected a non-empty array of rows");
  const auto rows = j.size();
  const auto cols = j[0].size();
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ConfigError(where + ": ragged rows");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = complex_entry(j[r][c], where);
  }
  return m;
}

inline Vector parse_vector(const Json& j, const std::string& where = "vector") {
  using namespace config_detail;
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a non-empty array");
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = complex_entry(j[i], where);
  return v;
}

inline ClassicalProcess parse_process(const Json& j, const std::string& where = "process") {
  using namespace config_detail;
  require_object(j, where);
  const std::string type = field(j, "type", where).get<std::string>();
  try {
    if (type == "iid") {
      allow_keys(j, {"type", "probs"}, where);
      return ClassicalProcess::iid(numbers(field(j, "probs", where), where + ".probs"));
    }
    if (type == "markov") {
      allow_keys(j, {"type", "transition", "initial"}, where);
      const Matrix t = parse_matrix(field(j, "transition", where), where + ".transition");
      if (max_abs(t.imag()) > 0.0) throw ConfigError(where + ": transition must be real");
      RealMatrix real = t.real();
      if (j.contains("initial"))
        return ClassicalProcess::markov(std::move(real),
                                        numbers(j.at("initial"), where + ".initial"));
      return ClassicalProcess::markov(std::move(real));
    }
    if (type == "periodic") {
      allow_keys(j, {"type", "cycle", "alphabet"}, where);
      Sequence cycle;
      const auto& c = field(j, "cycle", where);
      if (!c.is_array()) throw ConfigError(where + ".cycle: expected an array");
      for (const auto& x : c) cycle.push_back(count(x, where + ".cycle"));
      const std::size_t L = j.contains("alphabet") ? count(j.at("alphabet"), where) : 0;
      return ClassicalProcess::periodic(std::move(cycle), L);
    }
    if (type == "mixture") {
      allow_keys(j, {"type", "weights", "components"}, where);
      const auto& comps = field(j, "components", where);
      if (!comps.is_array() || comps.empty())
        throw ConfigError(where + ".components: expected a non-empty array");
      std::vector<ClassicalProcess> parsed;
      for (std::size_t i = 0; i < comps.size(); ++i)
        parsed.push_back(parse_process(comps[i], where + ".components[" + std::to_string(i) + "]"));
      return ClassicalProcess::mixture(numbers(field(j, "weights", where), where + ".weights"),
                                       std::move(parsed));
    }
  } catch (const ValidationError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  throw ConfigError(where + ": unknown process type \"" + type + "\"");
}

inline KrausChannel parse_channel(const Json& j, const std::string& where = "channel") {
  using namespace config_detail;
  require_object(j, where);
  const std::string type = field(j, "type", where).get<std::string>();
  try {
    if (type == "identity") {
      allow_keys(j, {"type", "d"}, where);
      return KrausChannel::identity(j.contains("d") ? count(j.at("d"), where) : 2);
    }
    if (type == "depolarizing") {
      allow_keys(j, {"type", "p"}, where);
      return KrausChannel::depolarizing(number(field(j, "p", where), where + ".p"));
    }
    if (type == "dephasing") {
      allow_keys(j, {"type", "p"}, where);
      return KrausChannel::dephasing(number(field(j, "p", where), where + ".p"));
    }
    if (type == "amplitude_damping") {
      allow_keys(j, {"type", "gamma"}, where);
      return KrausChannel::amplitude_damping(number(field(j, "gamma", where), where + ".gamma"));
    }
    if (type == "custom") {
      allow_keys(j, {"type", "kraus"}, where);
      const auto& ks = field(j, "kraus", where);
      if (!ks.is_array() || ks.empty()) throw ConfigError(where + ".kraus: expected matrices");
      std::vector<Matrix> kraus;
      for (const auto& k : ks) kraus.push_back(parse_matrix(k, where + ".kraus"));
      return KrausChannel::checked(std::move(kraus));
    }
  } catch (const ValidationError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  throw ConfigError(where + ": unknown channel type \"" + type + "\"");
}

/// Source spec; the optional "id" key is accepted and ignored here.
inline QuantumSource parse_source(const Json& j, const std::string& where = "source") {
  using namespace config_detail;
  require_object(j, where);
  const std::string type = field(j, "type", where).get<std::string>();
  try {
    if (type == "iid") {
      allow_keys(j, {"id", "type", "rho", "diag"}, where);
      if (j.contains("rho") == j.contains("diag"))
        throw ConfigError(where + ": give exactly one of \"rho\" and \"diag\"");
      if (j.contains("diag")) {
        const auto probs = numbers(j.at("diag"), where + ".diag");
        return QuantumSource::iid(DensityOperator::diagonal(probs));
      }
      return QuantumSource::iid(DensityOperator::from_matrix(parse_matrix(j.at("rho"), where)));
    }
    if (type == "classical") {
      allow_keys(j, {"id", "type", "process", "alphabet"}, where);
      auto process = parse_process(field(j, "process", where), where + ".process");
      const std::size_t d = process.alphabet_size();
      if (!j.contains("alphabet") ||
          (j.at("alphabet").is_string() && j.at("alphabet").get<std::string>() == "computational"))
        return QuantumSource::classical(std::move(process), QuantumAlphabet::computational(d));
      const auto& vs = j.at("alphabet");
      if (!vs.is_array()) throw ConfigError(where + ".alphabet: expected vectors");
      Matrix cols(vs.size(), vs.size());
      for (std::size_t c = 0; c < vs.size(); ++c) {
        const Vector v = parse_vector(vs[c], where + ".alphabet");
        if (static_cast<std::size_t>(v.size()) != vs.size())
          throw ConfigError(where + ".alphabet: need d vectors of length d");
        cols.col(c) = v;
      }
      return QuantumSource::classical(std::move(process), QuantumAlphabet::from_columns(cols));
    }
    if (type == "channel") {
      allow_keys(j, {"id", "type", "source", "channel"}, where);
      return QuantumSource::transformed(parse_source(field(j, "source", where), where + ".source"),
                                        parse_channel(field(j, "channel", where), where + ".channel"));
    }
  } catch (const ValidationError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  throw ConfigError(where + ": unknown source type \"" + type + "\"");
}

enum class Scheme { C1, C2 };

inline std::string scheme_name(Scheme s) { return s == Scheme::C1 ? "c1" : "c2"; }

inline Scheme parse_scheme(const std::string& s) {
  if (s == "c1" || s == "C1") return Scheme::C1;
  if (s == "c2" || s == "C2") return Scheme::C2;
  throw ConfigError("scheme must be \"c1\" or \"c2\"");
}

struct NamedSource {
  std::string id;
  QuantumSource source;
  Json spec;
};

struct ExperimentConfig {
  std::vector<NamedSource> sources;
  std::vector<std::pair<std::string, KrausChannel>> channels;
  double r = 0.0;
  std::vector<std::size_t> n_values;
  Scheme scheme = Scheme::C1;
  std::uint64_t seed = 0;
  std::string output;
  std::optional<std::size_t> override_l;
  std::optional<double> override_R;
  std::size_t context_order = 0;
  JoinOptions join;
  bool timing = false;
  Json raw;
};

inline ExperimentConfig parse_experiment(const Json& j) {
  using namespace config_detail;
  const std::string where = "config";
  allow_keys(j,
             {"sources", "channels", "r", "n_range", "scheme", "seed", "output", "override",
              "context_order", "join", "timing"},
             where);
  ExperimentConfig cfg;
  cfg.raw = j;
  const auto& sources = field(j, "sources", where);
  if (!sources.is_array()) throw ConfigError("config.sources: expected an array");
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const std::string w = "config.sources[" + std::to_string(i) + "]";
    require_object(sources[i], w);
    const std::string id = sources[i].contains("id") ? sources[i].at("id").get<std::string>()
                                                     : "source" + std::to_string(i);
    cfg.sources.push_back({id, parse_source(sources[i], w), sources[i]});
  }
  if (j.contains("channels")) {
    const auto& chans = j.at("channels");
    if (!chans.is_array()) throw ConfigError("config.channels: expected an array");
    for (std::size_t i = 0; i < chans.size(); ++i) {
      const std::string w = "config.channels[" + std::to_string(i) + "]";
      Json spec = chans[i];
      require_object(spec, w);
      std::string id = spec.value("id", spec.value("type", std::string("channel")));
      spec.erase("id");
      cfg.channels.emplace_back(id, parse_channel(spec, w));
    }
  }
  cfg.r = number(field(j, "r", where), "config.r");
  if (!(cfg.r > 0.0)) throw ConfigError("config.r must be positive");
  const auto& nr = field(j, "n_range", where);
  if (nr.is_array()) {
    for (const auto& x : nr) cfg.n_values.push_back(count(x, "config.n_range"));
  } else {
    allow_keys(nr, {"min", "max", "step"}, "config.n_range");
    const auto lo = count(field(nr, "min", "config.n_range"), "config.n_range.min");
    const auto hi = count(field(nr, "max", "config.n_range"), "config.n_range.max");
    const auto step = nr.contains("step") ? count(nr.at("step"), "config.n_range.step") : 1;
    if (step == 0 || lo > hi) throw ConfigError("config.n_range: invalid range");
    for (auto n = lo; n <= hi; n += step) cfg.n_values.push_back(n);
  }
  for (auto n : cfg.n_values)
    if (n == 0) throw ConfigError("config.n_range: n must be positive");
  if (j.contains("scheme")) cfg.scheme = parse_scheme(j.at("scheme").get<std::string>());
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
      throw ConfigError("config.seed: expected an integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("output")) cfg.output = j.at("output").get<std::string>();
  if (j.contains("override")) {
    const auto& o = j.at("override");
    allow_keys(o, {"l", "R"}, "config.override");
    cfg.override_l = count(field(o, "l", "config.override"), "config.override.l");
    if (*cfg.override_l == 0) throw ConfigError("config.override.l must be positive");
    if (o.contains("R")) cfg.override_R = number(o.at("R"), "config.override.R");
  }
  if (j.contains("context_order"))
    cfg.context_order = count(j.at("context_order"), "config.context_order");
  if (j.contains("join")) {
    const auto& jo = j.at("join");
    allow_keys(jo, {"tolerance", "budget"}, "config.join");
    if (jo.contains("tolerance")) cfg.join.tolerance = number(jo.at("tolerance"), "config.join");
    if (jo.contains("budget")) cfg.join.budget = count(jo.at("budget"), "config.join.budget");
  }
  if (j.contains("timing")) {
    if (!j.at("timing").is_boolean()) throw ConfigError("config.timing: expected a boolean");
    cfg.timing = j.at("timing").get<bool>();
  }
  for (const auto& s : cfg.sources)
    if (cfg.r > std::log2(static_cast<double>(s.source.dim())) + 1e-12)
      throw ConfigError("config.r exceeds log2 d for source " + s.id);
  return cfg;
}

/// Inline JSON text, or "@path" for a file.
inline Json load_json_argument(const std::string& arg) {
  std::string text = arg;
  if (!arg.empty() && arg.front() == '@') {
    std::ifstream in(arg.substr(1));
    if (!in) throw ConfigError("cannot open " + arg.substr(1));
    std::ostringstream os;
    os << in.rdbuf();
    text = os.str();
  }
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

inline Json load_json_file(const std::string& path) { return load_json_argument("@" + path); }

}  // namespace uqc
