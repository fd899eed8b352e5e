#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "thetafbsde/coupling.hpp"
#include "thetafbsde/errors.hpp"
#include "thetafbsde/pde.hpp"
#include "thetafbsde/problem.hpp"

namespace thetafbsde {

namespace detail {

inline void append_number(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw UsageError("cannot write '" + path.string() + "'");
  return out;
}

} // namespace detail

/// Columns t,particle,X1..Xk,Y,Z1..Zd,A; one row per (node, particle).
inline void write_paths_csv(const std::filesystem::path& path, const SolutionPaths& paths,
                            const TimeGrid& grid) {
  auto out = detail::open_output(path);
  std::string line = "t,particle";
  for (int j = 1; j <= paths.k(); ++j)
    line += ",X" + std::to_string(j);
  line += ",Y";
  for (int j = 1; j <= paths.d(); ++j)
    line += ",Z" + std::to_string(j);
  line += ",A\n";
  out << line;
  for (std::size_t i = 0; i < paths.nodes(); ++i) {
    for (std::size_t p = 0; p < paths.particles(); ++p) {
      line.clear();
      detail::append_number(line, grid.time(i));
      line += ',' + std::to_string(p);
      for (double v : paths.x(i, p)) {
        line += ',';
        detail::append_number(line, v);
      }
      line += ',';
      detail::append_number(line, paths.y(i, p));
      for (double v : paths.z(i, p)) {
        line += ',';
        detail::append_number(line, v);
      }
      line += ',';
      detail::append_number(line, paths.a(i, p));
      line += '\n';
      out << line;
    }
  }
}

/// Columns t,x,v.
inline void write_surface_csv(const std::filesystem::path& path, const ValueSurface& surface) {
  auto out = detail::open_output(path);
  out << "t,x,v\n";
  std::string line;
  for (std::size_t n = 0; n <= surface.grid.nt; ++n) {
    for (std::size_t j = 0; j < surface.grid.nx; ++j) {
      line.clear();
      detail::append_number(line, surface.grid.t(n));
      line += ',';
      detail::append_number(line, surface.grid.x(j));
      line += ',';
      detail::append_number(line, surface.at(n, j));
      line += '\n';
      out << line;
    }
  }
}

inline nlohmann::json to_json(const PicardReport& r) {
  return {{"iterations", r.iterations}, {"deltas", r.deltas},       {"ratios", r.ratios},
          {"beta", r.beta},             {"converged", r.converged}, {"tie_events", r.tie_events}};
}

inline nlohmann::json summary_json(double y0, const PicardReport& r, std::uint64_t seed,
                                   double wall_time_s) {
  return {{"Y0", y0},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"seed", seed},
          {"wall_time_s", wall_time_s}};
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto out = detail::open_output(path);
  out << j.dump(2) << '\n';
}

} // namespace thetafbsde
