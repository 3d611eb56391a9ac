#include "droplet/contour.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace droplet {
namespace {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  int find(int x) {
    int root = x;
    while (parent_[static_cast<std::size_t>(root)] != root) root = parent_[static_cast<std::size_t>(root)];
    while (parent_[static_cast<std::size_t>(x)] != root) {
      const int next = parent_[static_cast<std::size_t>(x)];
      parent_[static_cast<std::size_t>(x)] = root;
      x = next;
    }
    return root;
  }

  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    auto& ra = rank_[static_cast<std::size_t>(a)];
    auto& rb = rank_[static_cast<std::size_t>(b)];
    if (ra < rb) std::swap(a, b);
    parent_[static_cast<std::size_t>(b)] = a;
    if (ra == rb) ++rank_[static_cast<std::size_t>(a)];
  }

 private:
  std::vector<int> parent_;
  std::vector<std::uint8_t> rank_;
};

// Edge numbering: horizontal edge (i, j), 0 <= i <= L, 0 <= j < L, is
// i * L + j; vertical edge (i, j), 0 <= i < L, 0 <= j <= L, follows at
// (L + 1) * L + i * (L + 1) + j.
struct EdgeIndex {
  int L;
  int horizontal(int i, int j) const { return i * L + j; }
  int vertical(int i, int j) const { return (L + 1) * L + i * (L + 1) + j; }
  int count() const { return 2 * (L + 1) * L; }
  DualEdge decode(int id) const {
    const int split = (L + 1) * L;
    if (id < split) return {id / L, id % L, true};
    id -= split;
    return {id / (L + 1), id % (L + 1), false};
  }
};

// Interior runs [from, to) per row from the sorted vertical crossings.
void for_each_interior_run(const Contour& contour, int /*L*/, auto&& visit) {
  std::vector<std::pair<int, int>> crossings;
  crossings.reserve(contour.edges.size() / 2);
  for (const auto& e : contour.edges)
    if (!e.horizontal) crossings.emplace_back(e.i, e.j);
  std::sort(crossings.begin(), crossings.end());
  for (std::size_t k = 0; k + 1 < crossings.size(); k += 2)
    visit(crossings[k].first, crossings[k].second, crossings[k + 1].second);
}

}  // namespace

std::vector<Contour> extract_contours(const SpinConfig& config) {
  const int L = config.L();
  const EdgeIndex index{L};
  auto sign = [&](int r, int c) {
    return (r < 0 || r >= L || c < 0 || c >= L) ? 1 : config.spin(r, c);
  };
  std::vector<std::uint8_t> active(static_cast<std::size_t>(index.count()), 0);
  bool any = false;
  for (int i = 0; i <= L; ++i)
    for (int j = 0; j < L; ++j)
      if (sign(i - 1, j) != sign(i, j)) {
        active[static_cast<std::size_t>(index.horizontal(i, j))] = 1;
        any = true;
      }
  for (int i = 0; i < L; ++i)
    for (int j = 0; j <= L; ++j)
      if (sign(i, j - 1) != sign(i, j)) active[static_cast<std::size_t>(index.vertical(i, j))] = 1;
  if (!any) return {};

  DisjointSet sets(active.size());
  auto on = [&](int id) { return id >= 0 && active[static_cast<std::size_t>(id)] != 0; };
  for (int i = 0; i <= L; ++i) {
    for (int j = 0; j <= L; ++j) {
      const int north = i > 0 ? index.vertical(i - 1, j) : -1;
      const int south = i < L ? index.vertical(i, j) : -1;
      const int west = j > 0 ? index.horizontal(i, j - 1) : -1;
      const int east = j < L ? index.horizontal(i, j) : -1;
      const bool n = on(north), s = on(south), w = on(west), e = on(east);
      const int degree = n + s + w + e;
      if (degree == 4) {
        sets.unite(north, west);
        sets.unite(south, east);
      } else if (degree == 2) {
        int pair[2];
        int k = 0;
        for (int id : {north, south, west, east})
          if (on(id)) pair[k++] = id;
        sets.unite(pair[0], pair[1]);
      }
    }
  }

  std::unordered_map<int, std::size_t> slot;
  std::vector<Contour> contours;
  for (int id = 0; id < index.count(); ++id) {
    if (!on(id)) continue;
    const int root = sets.find(id);
    auto [it, inserted] = slot.emplace(root, contours.size());
    if (inserted) contours.emplace_back();
    contours[it->second].edges.push_back(index.decode(id));
  }

  std::vector<int> cover(static_cast<std::size_t>(L) * static_cast<std::size_t>(L), 0);
  for (auto& c : contours) {
    c.length = static_cast<int>(c.edges.size());
    int imin = L, imax = 0, jmin = L, jmax = 0;
    for (const auto& e : c.edges) {
      const int i2 = e.horizontal ? e.i : e.i + 1;
      const int j2 = e.horizontal ? e.j + 1 : e.j;
      imin = std::min(imin, e.i);
      imax = std::max(imax, i2);
      jmin = std::min(jmin, e.j);
      jmax = std::max(jmax, j2);
    }
    c.extent_y = imax - imin;
    c.extent_x = jmax - jmin;
    c.diameter = std::max(c.extent_x, c.extent_y);
    for_each_interior_run(c, L, [&](int r, int from, int to) {
      c.volume += to - from;
      for (int col = from; col < to; ++col) ++cover[static_cast<std::size_t>(r * L + col)];
    });
  }

  auto cover_at = [&](int r, int col) {
    return (r < 0 || r >= L || col < 0 || col >= L) ? 0 : cover[static_cast<std::size_t>(r * L + col)];
  };
  for (auto& c : contours) {
    const auto& e = c.edges.front();
    c.depth = e.horizontal ? std::min(cover_at(e.i - 1, e.j), cover_at(e.i, e.j))
                           : std::min(cover_at(e.i, e.j - 1), cover_at(e.i, e.j));
    for_each_interior_run(c, L, [&](int r, int from, int to) {
      for (int col = from; col < to; ++col) c.net_volume += cover_at(r, col) == c.depth + 1;
    });
  }
  return contours;
}

std::vector<int> interior_sites(const Contour& contour, int L) {
  std::vector<int> sites;
  for_each_interior_run(contour, L, [&](int r, int from, int to) {
    for (int col = from; col < to; ++col) sites.push_back(r * L + col);
  });
  return sites;
}

std::vector<std::int8_t> render_contours(std::span<const Contour> contours, int L) {
  std::vector<std::int8_t> spins(static_cast<std::size_t>(L) * static_cast<std::size_t>(L), 1);
  for (const auto& c : contours)
    for_each_interior_run(c, L, [&](int r, int from, int to) {
      for (int col = from; col < to; ++col) {
        auto& s = spins[static_cast<std::size_t>(r * L + col)];
        s = static_cast<std::int8_t>(-s);
      }
    });
  return spins;
}

ContourClass classify_diameter(double diameter, double lo, double hi) {
  if (diameter > hi) return ContourClass::large;
  if (diameter < lo) return ContourClass::small;
  return ContourClass::intermediate;
}

ContourCensus classify(std::span<const Contour> contours, int L, double K) {
  if (L < 2) throw std::domain_error("census needs L >= 2");
  if (!(K > 0.0)) throw std::domain_error("census constant K must be positive");
  ContourCensus census;
  census.L = L;
  census.K = K;
  census.lo = K * std::log(static_cast<double>(L));
  census.hi = std::cbrt(static_cast<double>(L) * L) / K;
  census.window_valid = census.lo < census.hi;
  for (std::size_t k = 0; k < contours.size(); ++k) {
    const auto& c = contours[k];
    switch (classify_diameter(c.diameter, census.lo, census.hi)) {
      case ContourClass::small: ++census.n_small; break;
      case ContourClass::intermediate: ++census.n_intermediate; break;
      case ContourClass::large:
        ++census.n_large;
        census.total_large_volume += c.volume;
        if (c.volume > census.largest_large_volume ||
            (c.volume == census.largest_large_volume && c.net_volume > census.largest_large_net_volume)) {
          census.largest_large_volume = c.volume;
          census.largest_large_net_volume = c.net_volume;
        }
        break;
    }
    if (!census.largest || c.diameter > census.largest_diameter) {
      census.largest = k;
      census.largest_diameter = c.diameter;
    }
  }
  return census;
}

double droplet_fraction(const ContourCensus& census, const CanonicalConstraint& constraint) {
  if (!(constraint.v_L > 0.0)) throw std::domain_error("droplet fraction needs v_L > 0");
  if (census.n_large == 0) return 0.0;
  return static_cast<double>(census.largest_large_volume) / constraint.v_L;
}

double droplet_fraction_net(const ContourCensus& census, const CanonicalConstraint& constraint) {
  if (!(constraint.v_L > 0.0)) throw std::domain_error("droplet fraction needs v_L > 0");
  if (census.n_large == 0) return 0.0;
  return static_cast<double>(census.largest_large_net_volume) / constraint.v_L;
}

Frequency binomial_frequency(long hits, long n) {
  if (n <= 0) throw std::invalid_argument("frequency needs at least one sample");
  Frequency f;
  f.p = static_cast<double>(hits) / static_cast<double>(n);
  f.error = std::sqrt(f.p * (1.0 - f.p) / static_cast<double>(n));
  return f;
}

CensusSummary census_frequencies(std::span<const CensusSample> records) {
  if (records.empty()) throw std::invalid_argument("census summary needs at least one record");
  CensusSummary out;
  out.samples = static_cast<long>(records.size());
  long a = 0, b = 0, c = 0, intermediates = 0;
  double sum = 0.0, sum_sq = 0.0, sum_c = 0.0;
  for (const auto& r : records) {
    out.window_valid = out.window_valid && r.census.window_valid;
    a += r.census.no_intermediate();
    b += r.census.no_beyond_log_scale();
    if (r.census.single_large()) {
      ++c;
      sum_c += r.lambda_hat;
    }
    intermediates += r.census.n_intermediate;
    sum += r.lambda_hat;
    sum_sq += r.lambda_hat * r.lambda_hat;
    out.lambda_values.push_back(r.lambda_hat);
  }
  const auto n = static_cast<double>(out.samples);
  out.A = binomial_frequency(a, out.samples);
  out.B = binomial_frequency(b, out.samples);
  out.C = binomial_frequency(c, out.samples);
  out.mean_lambda = sum / n;
  const double var = out.samples > 1 ? std::max(0.0, (sum_sq - n * out.mean_lambda * out.mean_lambda) / (n - 1.0)) : 0.0;
  out.lambda_error = std::sqrt(var / n);
  out.samples_in_C = c;
  out.mean_lambda_given_C = c > 0 ? sum_c / static_cast<double>(c) : 0.0;
  out.intermediate_rate = static_cast<double>(intermediates) / n;
  std::sort(out.lambda_values.begin(), out.lambda_values.end());
  return out;
}

}  // namespace droplet
