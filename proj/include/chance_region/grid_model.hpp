#pragma once

// Linearized (LinDistFlow) voltage model of a radial feeder: v = R p + X q + eps,
// with v measured as deviation from the reference-bus voltage.

#include "chance_region/common.hpp"
#include "chance_region/io.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace chance_region {

struct Line {
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;  // p.u.
  double x = 0.0;  // p.u.
};

/// Sensitivities of a feeder with buses 0..d, bus 0 being the reference.
/// Row/column k of R and X belongs to bus k + 1.
struct NetworkModel {
  Matrix R;
  Matrix X;
  Vector p;

  Eigen::Index dim() const { return p.size(); }
  Vector base_voltage() const { return R * p; }
};

namespace detail {

// Parent of every bus, validated as a tree rooted at 0.
inline std::vector<int> parents_of(std::span<const Line> lines) {
  const int d = static_cast<int>(lines.size());
  std::vector<int> parent(static_cast<std::size_t>(d + 1), -1);
  for (const auto& ln : lines) {
    if (ln.from_bus < 0 || ln.from_bus > d || ln.to_bus < 1 || ln.to_bus > d) {
      throw Error(ErrorCode::NotATree, "line " + std::to_string(ln.from_bus) + "->" +
                                           std::to_string(ln.to_bus) + " references a bus outside 0.." +
                                           std::to_string(d) + " or targets the reference bus");
    }
    if (!(ln.r >= 0.0) || !(ln.x >= 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "negative impedance on line to bus " + std::to_string(ln.to_bus));
    }
    auto& slot = parent[static_cast<std::size_t>(ln.to_bus)];
    if (slot != -1) {
      throw Error(ErrorCode::NotATree, "bus " + std::to_string(ln.to_bus) + " has two incoming lines");
    }
    slot = ln.from_bus;
  }
  // Every bus must reach the root without revisiting a bus.
  for (int b = 1; b <= d; ++b) {
    int cur = b;
    for (int steps = 0; cur != 0; ++steps) {
      if (steps > d || cur < 0) {
        throw Error(ErrorCode::NotATree, "bus " + std::to_string(b) + " is not connected to bus 0");
      }
      cur = parent[static_cast<std::size_t>(cur)];
    }
  }
  return parent;
}

}  // namespace detail

/// Builds R and X by the path-intersection rule R_ij = 2 * sum of r over lines
/// shared by the paths from bus 0 to buses i and j.
inline NetworkModel build_network(std::span<const Line> lines, const Vector& p) {
  const auto d = static_cast<Eigen::Index>(lines.size());
  const auto parent = detail::parents_of(lines);
  require_size(p.size(), d, "injection vector p");

  // Impedance of the line entering each bus.
  Vector r_in = Vector::Zero(d + 1), x_in = Vector::Zero(d + 1);
  for (const auto& ln : lines) {
    r_in(ln.to_bus) = ln.r;
    x_in(ln.to_bus) = ln.x;
  }

  // path[b] = buses on the path root->b (excluding root), as a membership mask.
  std::vector<std::vector<bool>> on_path(static_cast<std::size_t>(d + 1),
                                         std::vector<bool>(static_cast<std::size_t>(d + 1), false));
  for (Eigen::Index b = 1; b <= d; ++b) {
    for (int cur = static_cast<int>(b); cur != 0; cur = parent[static_cast<std::size_t>(cur)]) {
      on_path[static_cast<std::size_t>(b)][static_cast<std::size_t>(cur)] = true;
    }
  }

  NetworkModel net{Matrix::Zero(d, d), Matrix::Zero(d, d), p};
  for (Eigen::Index i = 1; i <= d; ++i) {
    for (Eigen::Index j = i; j <= d; ++j) {
      double rs = 0.0, xs = 0.0;
      for (Eigen::Index e = 1; e <= d; ++e) {
        if (on_path[static_cast<std::size_t>(i)][static_cast<std::size_t>(e)] &&
            on_path[static_cast<std::size_t>(j)][static_cast<std::size_t>(e)]) {
          rs += r_in(e);
          xs += x_in(e);
        }
      }
      net.R(i - 1, j - 1) = net.R(j - 1, i - 1) = 2.0 * rs;
      net.X(i - 1, j - 1) = net.X(j - 1, i - 1) = 2.0 * xs;
    }
  }
  return net;
}

inline Vector voltage(const NetworkModel& net, const Vector& q, const Vector& eps) {
  require_size(q.size(), net.dim(), "reactive injection q");
  require_size(eps.size(), net.dim(), "noise vector");
  return net.R * net.p + net.X * q + eps;
}

// --- file formats -----------------------------------------------------------

/// Network CSV with header `from,to,r,x`.
inline std::vector<Line> read_lines_csv(const std::filesystem::path& path) {
  const auto rows = io::read_csv(path, {"from", "to", "r", "x"});
  std::vector<Line> lines;
  lines.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string where = path.string() + ":" + std::to_string(i + 2);
    if (rows[i].size() != 4) throw Error(ErrorCode::ParseError, where + ": expected 4 columns");
    lines.push_back(Line{static_cast<int>(io::parse_double(rows[i][0], where)),
                         static_cast<int>(io::parse_double(rows[i][1], where)),
                         io::parse_double(rows[i][2], where), io::parse_double(rows[i][3], where)});
  }
  return lines;
}

/// Injection CSV with header `bus,p`; one row per non-reference bus 1..d.
inline Vector read_injections_csv(const std::filesystem::path& path, Eigen::Index d) {
  const auto rows = io::read_csv(path, {"bus", "p"});
  Vector p = Vector::Zero(d);
  std::vector<bool> seen(static_cast<std::size_t>(d), false);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string where = path.string() + ":" + std::to_string(i + 2);
    if (rows[i].size() != 2) throw Error(ErrorCode::ParseError, where + ": expected 2 columns");
    const auto bus = static_cast<Eigen::Index>(io::parse_double(rows[i][0], where));
    if (bus < 1 || bus > d) throw Error(ErrorCode::DimensionMismatch, where + ": bus out of range 1..d");
    p(bus - 1) = io::parse_double(rows[i][1], where);
    seen[static_cast<std::size_t>(bus - 1)] = true;
  }
  for (Eigen::Index b = 0; b < d; ++b) {
    if (!seen[static_cast<std::size_t>(b)]) {
      throw Error(ErrorCode::DimensionMismatch, path.string() + ": no injection for bus " + std::to_string(b + 1));
    }
  }
  return p;
}

inline NetworkModel load_network(const std::filesystem::path& lines_csv, const std::filesystem::path& injections_csv) {
  const auto lines = read_lines_csv(lines_csv);
  const auto p = read_injections_csv(injections_csv, static_cast<Eigen::Index>(lines.size()));
  return build_network(lines, p);
}

}  // namespace chance_region
