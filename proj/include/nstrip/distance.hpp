#pragma once

// Intrinsic (in-domain) distance for planar strips (d = 1): Dijkstra on an
// 8-neighbour grid restricted to D, followed by line-of-sight shortcutting of
// the resulting polyline.

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "nstrip/geometry.hpp"

namespace nstrip {

namespace detail {

inline bool segment_inside(const StripDomain& dom, const Vec& a, const Vec& b, double step) {
  const double len = (b - a).norm();
  const int n = std::max(2, static_cast<int>(std::ceil(len / step)) + 1);
  for (int k = 0; k <= n; ++k) {
    const double s = static_cast<double>(k) / n;
    if (!dom.contains(a + s * (b - a), 1e-12)) return false;
  }
  return true;
}

}  // namespace detail

inline double intrinsic_distance(const StripDomain& dom, const Vec& a, const Vec& b,
                                 double grid_res) {
  if (dom.dim() != 1) throw DomainError("intrinsic distance is implemented for d = 1 only");
  if (!(grid_res > 0.0)) throw DomainError("grid resolution must be positive");
  if (!dom.contains(a, 1e-12) || !dom.contains(b, 1e-12))
    throw DomainError("intrinsic distance: endpoint outside the domain");
  if ((a - b).norm() == 0.0) return 0.0;
  const double check = grid_res / 8.0;
  if (detail::segment_inside(dom, a, b, check)) return (a - b).norm();

  const double span = (a - b).norm();
  const double x_lo = std::min(a(0), b(0)) - span - 1.0;
  const double x_hi = std::max(a(0), b(0)) + span + 1.0;
  const int nx = static_cast<int>(std::ceil((x_hi - x_lo) / grid_res)) + 1;
  double y_lo = std::numeric_limits<double>::infinity();
  double y_hi = -y_lo;
  for (int i = 0; i < nx; ++i) {
    Vec x(1);
    x(0) = x_lo + i * grid_res;
    y_lo = std::min(y_lo, dom.surface(1).value(x));
    y_hi = std::max(y_hi, dom.surface(2).value(x));
  }
  const int ny = static_cast<int>(std::ceil((y_hi - y_lo) / grid_res)) + 1;
  const std::size_t total = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
  if (total > 20'000'000) throw DomainError("intrinsic distance grid too large");

  auto node = [&](int i, int j) {
    Vec p(2);
    p(0) = x_lo + i * grid_res;
    p(1) = y_lo + j * grid_res;
    return p;
  };
  std::vector<char> inside(total, 0);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      inside[static_cast<std::size_t>(i) * ny + j] = dom.contains(node(i, j)) ? 1 : 0;

  // Graph: grid nodes plus two terminal nodes (a = total, b = total + 1).
  const std::size_t ia = total, ib = total + 1;
  std::vector<double> dist(total + 2, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> prev(total + 2, std::numeric_limits<std::size_t>::max());
  auto pos = [&](std::size_t k) -> Vec {
    if (k == ia) return a;
    if (k == ib) return b;
    return node(static_cast<int>(k / ny), static_cast<int>(k % ny));
  };
  auto edge_ok = [&](const Vec& p, const Vec& q) { return dom.contains(0.5 * (p + q)); };
  // Terminal links: grid nodes within two cells that are visible.
  auto terminal_links = [&](const Vec& t) {
    std::vector<std::size_t> out;
    const int ci = static_cast<int>(std::round((t(0) - x_lo) / grid_res));
    const int cj = static_cast<int>(std::round((t(1) - y_lo) / grid_res));
    for (int i = ci - 2; i <= ci + 2; ++i)
      for (int j = cj - 2; j <= cj + 2; ++j) {
        if (i < 0 || j < 0 || i >= nx || j >= ny) continue;
        const std::size_t k = static_cast<std::size_t>(i) * ny + j;
        if (inside[k] && detail::segment_inside(dom, t, node(i, j), check)) out.push_back(k);
      }
    return out;
  };
  const auto links_a = terminal_links(a);
  const auto links_b = terminal_links(b);
  if (links_a.empty() || links_b.empty())
    throw DomainError("intrinsic distance: endpoint not connected to the grid; refine grid_res");

  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[ia] = 0.0;
  pq.push({0.0, ia});
  while (!pq.empty()) {
    const auto [du, u] = pq.top();
    pq.pop();
    if (du > dist[u]) continue;
    if (u == ib) break;
    const Vec pu = pos(u);
    auto relax = [&](std::size_t v) {
      const double nd = du + (pos(v) - pu).norm();
      if (nd < dist[v]) {
        dist[v] = nd;
        prev[v] = u;
        pq.push({nd, v});
      }
    };
    if (u == ia) {
      for (std::size_t k : links_a) relax(k);
      continue;
    }
    const int i = static_cast<int>(u / ny), j = static_cast<int>(u % ny);
    for (int di = -1; di <= 1; ++di)
      for (int dj = -1; dj <= 1; ++dj) {
        if (!di && !dj) continue;
        const int ii = i + di, jj = j + dj;
        if (ii < 0 || jj < 0 || ii >= nx || jj >= ny) continue;
        const std::size_t v = static_cast<std::size_t>(ii) * ny + jj;
        if (inside[v] && edge_ok(pu, pos(v))) relax(v);
      }
    if (std::find(links_b.begin(), links_b.end(), u) != links_b.end()) relax(ib);
  }
  if (!std::isfinite(dist[ib]))
    throw DomainError("intrinsic distance: endpoints lie in disconnected grid components");

  std::vector<Vec> path;
  for (std::size_t k = ib; k != std::numeric_limits<std::size_t>::max(); k = prev[k])
    path.push_back(pos(k));
  std::reverse(path.begin(), path.end());

  // Greedy shortcut: jump to the farthest visible vertex.
  double length = 0.0;
  std::size_t cur = 0;
  while (cur + 1 < path.size()) {
    std::size_t next = cur + 1;
    for (std::size_t k = path.size() - 1; k > cur + 1; --k) {
      if (detail::segment_inside(dom, path[cur], path[k], check)) {
        next = k;
        break;
      }
    }
    length += (path[next] - path[cur]).norm();
    cur = next;
  }
  return length;
}

}  // namespace nstrip
