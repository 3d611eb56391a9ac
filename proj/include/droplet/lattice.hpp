#pragma once

// 2D Ising model on an L x L box with fixed plus (or, for tests, free)
// boundary: configuration storage and the elementary Metropolis moves.
//
// Sites are indexed row-major, site = row * L + col.  The configuration keeps
// the total magnetization and the lists of plus and minus sites current after
// every accepted move, so nonlocal spin exchange picks a random opposite pair
// in O(1).

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "droplet/rng.hpp"

namespace droplet {

enum class Boundary : std::uint8_t { plus = 0, free = 1 };
enum class ExchangeMode : std::uint8_t { local = 0, nonlocal = 1 };
enum class InitMode { random, block };

class SpinConfig {
 public:
  SpinConfig(int L, double beta, Boundary boundary = Boundary::plus);

  /// Pattern of '+' / '-' characters, one row per line; blank lines ignored.
  static SpinConfig from_text(std::string_view grid, double beta,
                              Boundary boundary = Boundary::plus);

  /// All plus except (L^2 - M) / 2 minus spins, placed uniformly at random or
  /// as a centred square-ish block.
  static SpinConfig with_magnetization(int L, double beta, long target_M, InitMode mode,
                                       RngStream& rng, Boundary boundary = Boundary::plus);

  int L() const { return L_; }
  int sites() const { return L_ * L_; }
  double beta() const { return beta_; }
  Boundary boundary() const { return boundary_; }

  int spin(int site) const { return spins_[static_cast<std::size_t>(site)]; }
  int spin(int row, int col) const { return spin(row * L_ + col); }
  std::span<const std::int8_t> spins() const { return spins_; }

  long magnetization() const { return magnetization_; }
  long recompute_magnetization() const;
  int minus_count() const { return static_cast<int>(minus_sites_.size()); }

  /// Sum of the four neighbours, counting external boundary spins.
  int local_field(int site) const;
  int flip_cost(int site) const { return 2 * spin(site) * local_field(site); }

  /// Energy change of exchanging two opposite spins a and b.
  int exchange_cost(int a, int b) const;
  bool adjacent(int a, int b) const;

  void set_spin(int site, int value);
  void flip(int site) { set_spin(site, -spin(site)); }
  void exchange(int a, int b);

  /// Metropolis decisions with an explicit uniform draw u in [0, 1).
  bool try_flip(int site, double u);
  bool try_exchange(int a, int b, double u);

  int random_minus_site(RngStream& rng) const;
  int random_plus_site(RngStream& rng) const;

  /// exp(-beta * dE) for dE >= 0 in steps of 2 (covers flips and exchanges).
  double boltzmann(int dE) const;

  bool operator==(const SpinConfig& other) const;

 private:
  void place(int site, int value);
  void unlink(int site);

  int L_;
  double beta_;
  Boundary boundary_;
  std::vector<std::int8_t> spins_;
  long magnetization_ = 0;
  std::vector<int> minus_sites_;
  std::vector<int> plus_sites_;
  std::vector<int> slot_;  // position of each site inside its sign list
  std::array<double, 17> boltzmann_{};
};

/// -sum over nearest-neighbour bonds, including bonds to the fixed boundary.
long energy(const SpinConfig& config);

struct CanonicalConstraint {
  double v_L = 0.0;   // realized excess volume, (m* |Lambda| - M) / (2 m*)
  long target_M = 0;

  /// Nearest allowed magnetization (parity of L^2) to m*|Lambda| - 2 m* v_L.
  static CanonicalConstraint from_excess(double v_L_requested, double m_star, int L);
};

/// One spin-exchange proposal at fixed magnetization; returns acceptance.
bool canonical_step(SpinConfig& config, const CanonicalConstraint& constraint, RngStream& rng,
                    ExchangeMode mode);

/// One single-site Metropolis flip at a uniformly chosen site.
bool glauber_step(SpinConfig& config, RngStream& rng);

void glauber_sweep(SpinConfig& config, RngStream& rng);

// Checkpoint: "DRPLCKPT" magic, format version, L, beta, boundary, exchange
// mode, rng seed / stream / state, then spins packed one bit per site
// (1 = minus), row-major, least significant bit first.
inline constexpr std::array<char, 8> kCheckpointMagic{'D', 'R', 'P', 'L', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  SpinConfig config;
  ExchangeMode mode;
  RngStream rng;
};

void write_checkpoint(std::ostream& out, const SpinConfig& config, ExchangeMode mode,
                      const RngStream& rng);
Checkpoint read_checkpoint(std::istream& in);

}  // namespace droplet
