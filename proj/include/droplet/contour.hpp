#pragma once

// Peierls contours: closed loops on the dual lattice separating plus from
// minus spins, with the region outside the box treated as plus.
//
// Dual vertex (i, j), 0 <= i, j <= L, is the lattice corner above-left of site
// (row i, col j).  At a corner where four contour edges meet, the edges are
// paired north-with-west and south-with-east, so the loops cut off the NW and
// SE sites while the NE and SW sites stay connected across the corner.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "droplet/lattice.hpp"

namespace droplet {

struct DualEdge {
  int i = 0;  // row line (horizontal edge) or starting row (vertical edge)
  int j = 0;  // starting column (horizontal edge) or column line (vertical edge)
  bool horizontal = false;
};

struct Contour {
  std::vector<DualEdge> edges;
  int length = 0;
  int extent_x = 0;  // column span of its dual vertices
  int extent_y = 0;  // row span
  int diameter = 0;  // max(extent_x, extent_y)
  long volume = 0;   // enclosed sites, nested islands included
  long net_volume = 0;  // enclosed sites not inside a nested contour
  int depth = 0;     // number of contours enclosing this one
  bool exterior() const { return depth == 0; }
};

std::vector<Contour> extract_contours(const SpinConfig& config);

/// Sites enclosed by one contour (even-odd rule), row-major indices.
std::vector<int> interior_sites(const Contour& contour, int L);

/// Spins obtained from all-plus by flipping every contour interior.
std::vector<std::int8_t> render_contours(std::span<const Contour> contours, int L);

enum class ContourClass { small, intermediate, large };

struct ContourCensus {
  int L = 0;
  double K = 0.0;
  double lo = 0.0;  // K ln L
  double hi = 0.0;  // L^{2/3} / K
  // lo < hi.  When false the intermediate band is empty: contours with
  // diameter above hi are large, everything else small.
  bool window_valid = false;
  int n_small = 0;
  int n_intermediate = 0;
  int n_large = 0;
  std::optional<std::size_t> largest;  // index of a maximal-diameter contour
  int largest_diameter = 0;
  long largest_large_volume = 0;       // max volume over large contours
  long largest_large_net_volume = 0;   // net volume of that contour
  long total_large_volume = 0;

  int total() const { return n_small + n_intermediate + n_large; }
  bool no_intermediate() const { return n_intermediate == 0; }             // A_L
  bool no_beyond_log_scale() const { return n_intermediate == 0 && n_large == 0; }  // B_{L,K}
  bool single_large() const { return n_intermediate == 0 && n_large == 1; }         // C_{L,K}
};

ContourClass classify_diameter(double diameter, double lo, double hi);
ContourCensus classify(std::span<const Contour> contours, int L, double K);

/// Volume of the largest large contour over v_L; zero without a large contour.
double droplet_fraction(const ContourCensus& census, const CanonicalConstraint& constraint);
/// Same with nested islands removed from the volume (systematic check).
double droplet_fraction_net(const ContourCensus& census, const CanonicalConstraint& constraint);

struct Frequency {
  double p = 0.0;
  double error = 0.0;  // sqrt(p (1 - p) / n)
};
Frequency binomial_frequency(long hits, long n);

struct CensusSample {
  ContourCensus census;
  double lambda_hat = 0.0;
  double lambda_hat_net = 0.0;
};

struct CensusSummary {
  long samples = 0;
  bool window_valid = true;  // every sample had a valid window
  Frequency A;               // no intermediate contour
  Frequency B;               // nothing beyond the logarithmic scale
  Frequency C;               // exactly one large contour, no intermediate
  double mean_lambda = 0.0;
  double lambda_error = 0.0;
  double mean_lambda_given_C = 0.0;
  long samples_in_C = 0;
  std::vector<double> lambda_values;  // sorted
  double intermediate_rate = 0.0;     // mean intermediate contours per sample
};

CensusSummary census_frequencies(std::span<const CensusSample> records);

}  // namespace droplet
