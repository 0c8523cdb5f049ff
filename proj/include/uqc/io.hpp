#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uqc/error.hpp"
#include "uqc/operator.hpp"
#include "uqc/universal_projector.hpp"

namespace uqc {

/// Shortest round-trip-stable text used by every report (%.12g).
inline std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline std::string format_exact(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
  if (!out) throw ConfigError("write failed for " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Writes `<prefix>.re.csv` and `<prefix>.im.csv`.
inline void write_matrix_csv(const Matrix& m, const std::string& prefix) {
  std::ostringstream re, im;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) {
        re << ',';
        im << ',';
      }
      re << format_exact(m(r, c).real());
      im << format_exact(m(r, c).imag());
    }
    re << '\n';
    im << '\n';
  }
  write_text_file(prefix + ".re.csv", re.str());
  write_text_file(prefix + ".im.csv", im.str());
}

inline RealMatrix read_real_csv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError(path + ": malformed number \"" + cell + "\"");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw ConfigError(path + ": ragged rows");
    rows.push_back(std::move(row));
  }
  RealMatrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  return m;
}

inline Matrix read_matrix_csv(const std::string& prefix) {
  const RealMatrix re = read_real_csv(prefix + ".re.csv");
  const RealMatrix im = read_real_csv(prefix + ".im.csv");
  if (re.rows() != im.rows() || re.cols() != im.cols())
    throw ConfigError(prefix + ": real and imaginary grids differ in shape");
  Matrix m(re.rows(), re.cols());
  m.real() = re;
  m.imag() = im;
  return m;
}

/// Density operator grids plus a small sidecar.
inline void write_density_csv(const DensityOperator& rho, const std::string& prefix) {
  write_matrix_csv(rho.matrix(), prefix);
  nlohmann::ordered_json meta;
  meta["kind"] = "density";
  meta["dim"] = rho.dim();
  meta["re"] = std::filesystem::path(prefix + ".re.csv").filename().string();
  meta["im"] = std::filesystem::path(prefix + ".im.csv").filename().string();
  write_text_file(prefix + ".json", meta.dump(2) + "\n");
}

/// Range-basis grids of q (dim × rank) and the reproducibility sidecar.
inline nlohmann::ordered_json write_projector(const UniversalProjector& up,
                                              const std::string& prefix) {
  write_matrix_csv(up.q.basis(), prefix + ".basis");
  nlohmann::ordered_json meta;
  meta["kind"] = "projector";
  meta["m"] = up.m;
  meta["d"] = up.d;
  meta["r"] = up.r;
  meta["schedule"] = {{"l", up.l}, {"n", up.n}, {"R", up.R}, {"override", up.overridden}};
  meta["context_order"] = up.context_order;
  meta["trace"] = up.q.rank();
  meta["rank"] = up.q.rank();
  meta["trace_log_rate"] = up.trace_log_rate();
  meta["code_size"] = up.code_size;
  meta["join_rank"] = up.join_rank;
  meta["seed"] = up.seed;
  meta["samples"] = up.samples;
  meta["invariance_residual"] = up.invariance_residual;
  meta["grid"] = "range_basis";
  meta["re"] = std::filesystem::path(prefix + ".basis.re.csv").filename().string();
  meta["im"] = std::filesystem::path(prefix + ".basis.im.csv").filename().string();
  write_text_file(prefix + ".json", meta.dump(2) + "\n");
  return meta;
}

struct LoadedProjector {
  Projector projector;
  nlohmann::json meta;
};

/// Reads a sidecar written by write_projector; grid paths are relative to it.
inline LoadedProjector load_projector(const std::string& sidecar) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text_file(sidecar));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(sidecar + ": " + e.what());
  }
  if (!meta.is_object() || meta.value("kind", "") != "projector")
    throw ConfigError(sidecar + ": not a projector sidecar");
  const auto dir = std::filesystem::path(sidecar).parent_path();
  const std::string re = (dir / meta.at("re").get<std::string>()).string();
  const std::string base = re.substr(0, re.size() - std::string(".re.csv").size());
  Matrix basis = read_matrix_csv(base);
  try {
    return {Projector::from_orthonormal_basis(std::move(basis)), meta};
  } catch (const ValidationError& e) {
    throw ConfigError(sidecar + ": " + e.what());
  }
}

}  // namespace uqc
