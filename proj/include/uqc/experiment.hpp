#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "uqc/compression.hpp"
#include "uqc/config.hpp"
#include "uqc/io.hpp"
#include "uqc/quantum_source.hpp"
#include "uqc/universal_projector.hpp"

namespace uqc {

struct ReportRow {
  std::string source;
  std::size_t n = 0;
  double r = 0.0;
  std::optional<double> accept_prob;
  std::optional<double> entanglement_fidelity;
  std::optional<double> achieved_rate;
  std::optional<double> wall_ms;
  std::string error;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  nlohmann::ordered_json projectors = nlohmann::ordered_json::array();
};

namespace detail {

struct ProjectorEntry {
  std::optional<UniversalProjector> projector;
  std::string error;
};

inline AssembleOptions assemble_options(const ExperimentConfig& cfg, std::size_t n,
                                        std::size_t d) {
  AssembleOptions opt;
  opt.context_order = cfg.context_order;
  opt.join = cfg.join;
  opt.join.seed = derive_seed(cfg.seed, n * 64 + d);
  if (cfg.override_l) {
    const std::size_t l = *cfg.override_l;
    opt.override_schedule = ScheduleOverride{l, n / l, cfg.override_R};
  }
  return opt;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

inline std::string optional_number(const std::optional<double>& x) {
  return x ? format_number(*x) : std::string();
}

}  // namespace detail

/// Evaluates every (source, n) pair. Projectors are built once per (d, n) and
/// seeded from (master seed, n, d), so rows are reproducible and independent
/// of source order. Row failures are recorded and the run continues.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  ExperimentReport report;
  std::vector<std::pair<std::string, QuantumSource>> sources;
  for (const auto& s : cfg.sources) {
    sources.emplace_back(s.id, s.source);
    for (const auto& [cid, ch] : cfg.channels) {
      if (ch.dim() != s.source.dim()) continue;
      sources.emplace_back(s.id + "+" + cid, QuantumSource::transformed(s.source, ch));
    }
  }
  std::map<std::pair<std::size_t, std::size_t>, detail::ProjectorEntry> cache;
  auto projector_for = [&](std::size_t d, std::size_t n) -> detail::ProjectorEntry& {
    auto key = std::make_pair(d, n);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    detail::ProjectorEntry entry;
    nlohmann::ordered_json meta;
    meta["d"] = d;
    meta["n"] = n;
    try {
      entry.projector = assemble_q(n, d, cfg.r, detail::assemble_options(cfg, n, d));
      const auto& up = *entry.projector;
      meta["l"] = up.l;
      meta["blocks"] = up.n;
      meta["R"] = up.R;
      meta["override"] = up.overridden;
      meta["code_size"] = up.code_size;
      meta["rank"] = up.q.rank();
      meta["trace_log_rate"] = up.trace_log_rate();
      meta["rate_bound"] = up.rate_bound();
      meta["seed"] = up.seed;
      meta["samples"] = up.samples;
      meta["invariance_residual"] = up.invariance_residual;
    } catch (const std::exception& e) {
      entry.error = e.what();
      meta["error"] = entry.error;
    }
    report.projectors.push_back(meta);
    return cache.emplace(key, std::move(entry)).first->second;
  };

  for (const auto& [id, source] : sources) {
    for (auto n : cfg.n_values) {
      ReportRow row;
      row.source = id;
      row.n = n;
      row.r = cfg.r;
      const auto start = std::chrono::steady_clock::now();
      try {
        const auto& entry = projector_for(source.dim(), n);
        if (!entry.projector) throw Error(entry.error);
        const auto& up = *entry.projector;
        row.accept_prob = acceptance_probability(up.q, source);
        if (cfg.scheme == Scheme::C1) {
          if (source.is_diagonal()) {
            row.entanglement_fidelity =
                c1_entanglement_fidelity_diagonal(up.q, diagonal_marginal(source, n));
          } else {
            row.entanglement_fidelity =
                c1_entanglement_fidelity(up.q, source_marginal(source, n));
          }
        } else {
          if (*row.accept_prob <= 1e-12) throw ZeroOverlapError("C2: tr(qρ) is numerically zero");
          row.entanglement_fidelity = *row.accept_prob;
        }
        row.achieved_rate = up.trace_log_rate();
      } catch (const std::exception& e) {
        row.accept_prob.reset();
        row.entanglement_fidelity.reset();
        row.achieved_rate.reset();
        row.error = e.what();
      }
      if (cfg.timing)
        row.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - start)
                          .count();
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

inline std::string report_csv(const ExperimentReport& report) {
  std::string out = "source,n,r,accept_prob,entanglement_fidelity,achieved_rate,wall_ms,error\n";
  for (const auto& row : report.rows) {
    out += detail::csv_field(row.source) + ',' + std::to_string(row.n) + ',' +
           format_number(row.r) + ',' + detail::optional_number(row.accept_prob) + ',' +
           detail::optional_number(row.entanglement_fidelity) + ',' +
           detail::optional_number(row.achieved_rate) + ',' + detail::optional_number(row.wall_ms) +
           ',' + detail::csv_field(row.error) + '\n';
  }
  return out;
}

inline nlohmann::ordered_json report_json(const ExperimentConfig& cfg,
                                          const ExperimentReport& report) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["r"] = cfg.r;
  j["scheme"] = scheme_name(cfg.scheme);
  j["context_order"] = cfg.context_order;
  j["tolerances"] = {{"join_invariance", cfg.join.tolerance},
                     {"join_budget", cfg.join.budget},
                     {"span_rank", tol::kSpan},
                     {"projector_leq", tol::kLeq}};
  j["config"] = cfg.raw;
  j["projectors"] = report.projectors;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : report.rows) {
    nlohmann::ordered_json r;
    r["source"] = row.source;
    r["n"] = row.n;
    r["r"] = row.r;
    r["accept_prob"] = row.accept_prob ? nlohmann::ordered_json(*row.accept_prob) : nullptr;
    r["entanglement_fidelity"] =
        row.entanglement_fidelity ? nlohmann::ordered_json(*row.entanglement_fidelity) : nullptr;
    r["achieved_rate"] = row.achieved_rate ? nlohmann::ordered_json(*row.achieved_rate) : nullptr;
    r["wall_ms"] = row.wall_ms ? nlohmann::ordered_json(*row.wall_ms) : nullptr;
    r["error"] = row.error;
    rows.push_back(r);
  }
  j["rows"] = rows;
  j["build"] = {{"compiler", __VERSION__}, {"cxx_standard", __cplusplus}};
  return j;
}

/// Output paths: `<output>` for the CSV (".csv" appended when missing) and the
/// same stem with ".json" for the metadata mirror.
inline std::pair<std::string, std::string> report_paths(const std::string& output) {
  std::filesystem::path csv = output.empty() ? std::string("report.csv") : output;
  if (csv.extension() != ".csv") csv += ".csv";
  auto json = csv;
  json.replace_extension(".json");
  return {csv.string(), json.string()};
}

inline std::pair<std::string, std::string> write_report(const ExperimentConfig& cfg,
                                                        const ExperimentReport& report) {
  const auto paths = report_paths(cfg.output);
  const auto parent = std::filesystem::path(paths.first).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  write_text_file(paths.first, report_csv(report));
  write_text_file(paths.second, report_json(cfg, report).dump(2) + "\n");
  return paths;
}

}  // namespace uqc
