#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "uqc/compression.hpp"
#include "uqc/config.hpp"
#include "uqc/experiment.hpp"
#include "uqc/info_measures.hpp"
#include "uqc/invariance.hpp"
#include "uqc/io.hpp"
#include "uqc/universal_projector.hpp"

namespace {

using uqc::Json;
using OJson = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNonConvergence = 2;

void print(const OJson& j) { std::cout << j.dump(2) << "\n"; }

int cmd_entropy(const std::string& spec, std::size_t n_max) {
  const auto source = uqc::parse_source(uqc::load_json_argument(spec));
  std::vector<std::size_t> ns;
  for (std::size_t n = 1; n <= n_max; ++n) ns.push_back(n);
  const auto est = uqc::mean_entropy(source, ns);
  OJson out;
  out["kind"] = source.kind_name();
  out["d"] = source.dim();
  auto values = OJson::array();
  for (const auto& [n, v] : est.values) values.push_back({{"n", n}, {"entropy_per_site", v}});
  out["values"] = values;
  out["increment"] = est.extrapolated;
  out["analytic"] = est.analytic ? OJson(*est.analytic) : OJson(nullptr);
  print(out);
  return kExitOk;
}

int cmd_check_ergodic(const std::string& spec, const std::optional<std::string>& channel_spec,
                      std::size_t N, std::size_t m, std::size_t m_max, std::uint64_t seed) {
  const auto source = uqc::parse_source(uqc::load_json_argument(spec));
  const auto channel = channel_spec ? uqc::parse_channel(uqc::load_json_argument(*channel_spec))
                                    : uqc::KrausChannel::identity(source.dim());
  if (channel.dim() != source.dim()) throw uqc::ConfigError("channel and source dimensions differ");
  uqc::InvarianceOptions opt;
  opt.observable_sites = m;
  opt.seed = seed;
  const auto rep = uqc::verify_invariance(source, channel, m_max, N, opt);
  OJson out;
  out["source"] = source.kind_name();
  out["channel"] = channel.name();
  out["channel_valid"] = uqc::validate_channel(channel).valid();
  out["m_max"] = m_max;
  out["consistency"] = rep.consistency;
  out["stationarity"] = rep.stationarity;
  out["duality"] = rep.duality;
  const auto& g = rep.ergodicity;
  out["ergodicity"] = {{"m", g.m},
                       {"N", g.N},
                       {"cesaro", g.cesaro},
                       {"product", g.product},
                       {"gap", g.gap()},
                       {"weak_mixing", g.weak_mixing},
                       {"tail", g.tail},
                       {"slope", g.slope_defined ? OJson(g.slope) : OJson(nullptr)}};
  print(out);
  return kExitOk;
}

int cmd_build_projector(std::size_t d, std::size_t l, std::size_t n, double R, std::uint64_t seed,
                        const std::string& out_prefix, std::size_t k, double tolerance) {
  if (d < 2 || l == 0 || n == 0) throw uqc::ConfigError("need d ≥ 2, l ≥ 1, n ≥ 1");
  const double r = R / static_cast<double>(l);
  if (!(r > 0.0) || r > std::log2(static_cast<double>(d)) + 1e-12)
    throw uqc::ConfigError("R/l must lie in (0, log2 d]");
  uqc::AssembleOptions opt;
  opt.override_schedule = uqc::ScheduleOverride{l, n, R};
  opt.context_order = k;
  opt.join.seed = seed;
  opt.join.tolerance = tolerance;
  const auto up = uqc::assemble_q(l * n, d, r, opt);
  print(uqc::write_projector(up, out_prefix));
  return kExitOk;
}

int cmd_compress(const std::string& scheme_text, const std::string& projector_path,
                 const std::string& spec) {
  const auto scheme = uqc::parse_scheme(scheme_text);
  const auto loaded = uqc::load_projector(projector_path);
  const auto source = uqc::parse_source(uqc::load_json_argument(spec));
  const auto& p = loaded.projector;
  const auto n = uqc::exact_log(p.dim(), source.dim());
  if (!n) throw uqc::ConfigError("projector dimension is not a power of the source dimension");
  OJson out;
  out["scheme"] = uqc::scheme_name(scheme);
  out["n"] = *n;
  out["rank"] = p.rank();
  out["achieved_rate"] = std::log2(static_cast<double>(p.rank())) / static_cast<double>(*n);
  const double accept = uqc::acceptance_probability(p, source);
  out["accept_prob"] = accept;
  if (scheme == uqc::Scheme::C1) {
    out["entanglement_fidelity"] =
        source.is_diagonal()
            ? uqc::c1_entanglement_fidelity_diagonal(p, uqc::diagonal_marginal(source, *n))
            : uqc::c1_entanglement_fidelity(p, uqc::source_marginal(source, *n));
  } else {
    if (accept <= 1e-12) throw uqc::ZeroOverlapError("C2: tr(pρ) is numerically zero");
    out["entanglement_fidelity"] = accept;
  }
  print(out);
  return kExitOk;
}

int cmd_experiment_run(const std::string& path, const std::optional<std::string>& output) {
  auto cfg = uqc::parse_experiment(uqc::load_json_file(path));
  if (output) cfg.output = *output;
  const auto report = uqc::run_experiment(cfg);
  const auto [csv, json] = uqc::write_report(cfg, report);
  std::size_t failed = 0;
  for (const auto& row : report.rows)
    if (!row.error.empty()) ++failed;
  std::cerr << "wrote " << csv << " and " << json << " (" << report.rows.size() << " rows, "
            << failed << " with errors)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Universal quantum compression laboratory"};
  app.require_subcommand(1);

  std::string source_spec;
  std::size_t n_max = 4;
  auto* entropy = app.add_subcommand("entropy", "Mean entropy of a source");
  entropy->add_option("source", source_spec, "Source spec: inline JSON or @file")->required();
  entropy->add_option("--nmax", n_max, "Largest block length")->capture_default_str();

  std::optional<std::string> channel_spec;
  std::size_t N = 2000, obs_sites = 1, m_max = 8;
  std::uint64_t check_seed = 7;
  auto* ergodic = app.add_subcommand("check-ergodic", "Invariance diagnostics under a channel");
  ergodic->add_option("source", source_spec, "Source spec: inline JSON or @file")->required();
  ergodic->add_option("--channel", channel_spec, "Channel spec: inline JSON or @file");
  ergodic->add_option("--N", N, "Cesàro horizon")->capture_default_str();
  ergodic->add_option("--m", obs_sites, "Observable support in sites")->capture_default_str();
  ergodic->add_option("--mmax", m_max, "Largest m + i for the marginal checks")
      ->capture_default_str();
  ergodic->add_option("--seed", check_seed, "Seed for random test operators")
      ->capture_default_str();

  std::size_t d = 2, l = 1, n = 1, k = 0;
  double R = 0.0;
  std::uint64_t seed = 0x5eed;
  std::string out_prefix;
  auto* build = app.add_subcommand("build-projector", "Assemble and export a universal projector");
  build->add_option("--d", d, "Site dimension")->capture_default_str();
  build->add_option("--l", l, "Sites per block")->capture_default_str();
  build->add_option("--n", n, "Number of blocks")->required();
  build->add_option("--R", R, "Code rate per block")->required();
  build->add_option("--seed", seed, "Join seed")->capture_default_str();
  build->add_option("--out", out_prefix, "Output prefix")->required();
  build->add_option("--k", k, "Context order of the block code")->capture_default_str();
  double join_tolerance = uqc::JoinOptions{}.tolerance;
  build->add_option("--tolerance", join_tolerance, "Join invariance threshold")
      ->capture_default_str();

  std::string scheme = "c1", projector_path;
  auto* compress = app.add_subcommand("compress", "Evaluate a scheme on a source");
  compress->add_option("--scheme", scheme, "c1 or c2")->capture_default_str();
  compress->add_option("--projector", projector_path, "Projector sidecar JSON")->required();
  compress->add_option("--source", source_spec, "Source spec: inline JSON or @file")->required();

  std::string config_path;
  std::optional<std::string> output;
  auto* experiment = app.add_subcommand("experiment", "Experiment runs");
  experiment->require_subcommand(1);
  auto* run = experiment->add_subcommand("run", "Run an experiment config");
  run->add_option("config", config_path, "Config JSON file")->required();
  run->add_option("--output", output, "Override the output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*entropy) return cmd_entropy(source_spec, n_max);
    if (*ergodic) return cmd_check_ergodic(source_spec, channel_spec, N, obs_sites, m_max, check_seed);
    if (*build) return cmd_build_projector(d, l, n, R, seed, out_prefix, k, join_tolerance);
    if (*compress) return cmd_compress(scheme, projector_path, source_spec);
    if (*run) return cmd_experiment_run(config_path, output);
  } catch (const uqc::NonConvergenceError& e) {
    std::cerr << "non-convergence: " << e.what() << "\n";
    return kExitNonConvergence;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
