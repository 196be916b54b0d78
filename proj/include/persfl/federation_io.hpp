#pragma once

// On-disk layout of a federation:
//   <dir>/manifest.txt       key = value lines (generator settings, seed, clusters, truth)
//   <dir>/device_<i>.csv     header x0,...,x{d-1},y then one row per sample
// Numbers are written with 17 significant digits so reading back is exact.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "persfl/synthdata.hpp"

namespace persfl {

namespace detail {

inline std::string format_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename Range, typename Fmt>
std::string join(const Range& values, Fmt fmt, char sep = ',') {
  std::string out;
  bool first = true;
  for (const auto& v : values) {
    if (!first) out += sep;
    out += fmt(v);
    first = false;
  }
  return out;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string device_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "device_%04zu.csv", i);
  return buf;
}

}  // namespace detail

inline void write_federation(const Federation& fed, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto& s = fed.spec;
  std::ofstream m(dir / "manifest.txt");
  if (!m) throw std::runtime_error("cannot write " + (dir / "manifest.txt").string());
  auto num = [](double v) { return detail::format_exact(v); };
  auto idx = [](std::size_t v) { return std::to_string(v); };
  m << "format = persfl-federation-1\n";
  m << "n_devices = " << s.n_devices << "\n";
  m << "samples_per_device = " << s.samples_per_device << "\n";
  m << "dim = " << s.dim << "\n";
  m << "noise_std = " << num(s.noise_std) << "\n";
  m << "n_clusters = " << s.n_clusters() << "\n";
  m << "cluster_sizes = " << detail::join(s.cluster_sizes, idx) << "\n";
  m << "param_range = " << num(s.param_range.first) << "," << num(s.param_range.second) << "\n";
  m << "seed = " << s.seed << "\n";
  m << "device_to_cluster = " << detail::join(fed.truth.device_to_cluster, idx) << "\n";
  for (std::size_t c = 0; c < fed.truth.cluster_params.size(); ++c) {
    const auto& w = fed.truth.cluster_params[c];
    m << "cluster_param_" << c << " = "
      << detail::join(std::vector<double>(w.data(), w.data() + w.size()), num) << "\n";
  }

  for (std::size_t i = 0; i < fed.datasets.size(); ++i) {
    const auto& ds = fed.datasets[i];
    std::ofstream f(dir / detail::device_file_name(i));
    if (!f) throw std::runtime_error("cannot write device file for device " + std::to_string(i));
    for (std::size_t j = 0; j < ds.dim(); ++j) f << "x" << j << ",";
    f << "y\n";
    for (Eigen::Index r = 0; r < ds.features.rows(); ++r) {
      for (Eigen::Index j = 0; j < ds.features.cols(); ++j) f << num(ds.features(r, j)) << ",";
      f << num(ds.labels(r)) << "\n";
    }
  }
}

inline Federation read_federation(const std::filesystem::path& dir) {
  std::ifstream m(dir / "manifest.txt");
  if (!m) throw ConfigError("no manifest.txt in " + dir.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(m, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("manifest is missing key '" + key + "'");
    return it->second;
  };
  auto to_doubles = [](const std::string& s) {
    std::vector<double> out;
    for (const auto& t : detail::split(s, ',')) out.push_back(std::stod(t));
    return out;
  };
  auto to_indices = [](const std::string& s) {
    std::vector<std::size_t> out;
    for (const auto& t : detail::split(s, ',')) out.push_back(std::stoull(t));
    return out;
  };

  Federation fed;
  auto& s = fed.spec;
  s.n_devices = std::stoull(get("n_devices"));
  s.samples_per_device = std::stoull(get("samples_per_device"));
  s.dim = std::stoull(get("dim"));
  s.noise_std = std::stod(get("noise_std"));
  s.cluster_sizes = to_indices(get("cluster_sizes"));
  const auto range = to_doubles(get("param_range"));
  if (range.size() != 2) throw ConfigError("param_range must have two entries");
  s.param_range = {range[0], range[1]};
  s.seed = std::stoull(get("seed"));
  s.validate();

  fed.truth.device_to_cluster = to_indices(get("device_to_cluster"));
  if (fed.truth.device_to_cluster.size() != s.n_devices) {
    throw ConfigError("device_to_cluster length does not match n_devices");
  }
  for (std::size_t c = 0; c < s.n_clusters(); ++c) {
    const auto w = to_doubles(get("cluster_param_" + std::to_string(c)));
    if (w.size() != s.dim) throw ConfigError("cluster parameter has wrong dimension");
    fed.truth.cluster_params.push_back(Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size())));
  }

  for (std::size_t i = 0; i < s.n_devices; ++i) {
    std::ifstream f(dir / detail::device_file_name(i));
    if (!f) throw ConfigError("missing device file for device " + std::to_string(i));
    std::getline(f, line);  // header
    std::vector<std::vector<double>> rows;
    while (std::getline(f, line)) {
      if (detail::trim(line).empty()) continue;
      rows.push_back(to_doubles(line));
      if (rows.back().size() != s.dim + 1) throw ConfigError("malformed row in device file");
    }
    Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(s.dim));
    Vector y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t j = 0; j < s.dim; ++j) x(r, j) = rows[r][j];
      y(r) = rows[r][s.dim];
    }
    fed.datasets.emplace_back(std::move(x), std::move(y));
  }
  return fed;
}

}  // namespace persfl
