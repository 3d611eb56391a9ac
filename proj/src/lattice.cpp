#include "droplet/lattice.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace droplet {

SpinConfig::SpinConfig(int L, double beta, Boundary boundary)
    : L_(L), beta_(beta), boundary_(boundary) {
  if (L < 1) throw std::invalid_argument("lattice side must be >= 1");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be finite and >= 0");
  const auto n = static_cast<std::size_t>(L) * static_cast<std::size_t>(L);
  spins_.assign(n, 1);
  magnetization_ = static_cast<long>(n);
  plus_sites_.resize(n);
  slot_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    plus_sites_[i] = static_cast<int>(i);
    slot_[i] = static_cast<int>(i);
  }
  for (std::size_t k = 0; k < boltzmann_.size(); ++k)
    boltzmann_[k] = std::exp(-beta * 2.0 * static_cast<double>(k));
}

SpinConfig SpinConfig::from_text(std::string_view grid, double beta, Boundary boundary) {
  std::vector<std::string> rows;
  std::size_t pos = 0;
  while (pos <= grid.size()) {
    auto end = grid.find('\n', pos);
    if (end == std::string_view::npos) end = grid.size();
    std::string row;
    for (char ch : grid.substr(pos, end - pos))
      if (ch == '+' || ch == '-') row.push_back(ch);
      else if (ch != ' ' && ch != '\t' && ch != '\r')
        throw std::invalid_argument(std::string("unexpected character in spin grid: ") + ch);
    if (!row.empty()) rows.push_back(std::move(row));
    pos = end + 1;
  }
  const int L = static_cast<int>(rows.size());
  if (L == 0) throw std::invalid_argument("empty spin grid");
  SpinConfig config(L, beta, boundary);
  for (int r = 0; r < L; ++r) {
    if (static_cast<int>(rows[static_cast<std::size_t>(r)].size()) != L)
      throw std::invalid_argument("spin grid must be square");
    for (int c = 0; c < L; ++c)
      if (rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] == '-') config.set_spin(r * L + c, -1);
  }
  return config;
}

SpinConfig SpinConfig::with_magnetization(int L, double beta, long target_M, InitMode mode,
                                          RngStream& rng, Boundary boundary) {
  SpinConfig config(L, beta, boundary);
  const long n = config.sites();
  if (target_M > n || target_M < -n || (n - target_M) % 2 != 0)
    throw std::invalid_argument("magnetization " + std::to_string(target_M) +
                                " is not achievable on " + std::to_string(L) + "x" + std::to_string(L));
  const int minus = static_cast<int>((n - target_M) / 2);
  if (mode == InitMode::random) {
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < minus; ++i) {
      const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
      config.set_spin(order[static_cast<std::size_t>(i)], -1);
    }
  } else {
    const int side = std::min(L, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(minus)))));
    const int rows = side == 0 ? 0 : (minus + side - 1) / side;
    const int r0 = (L - rows) / 2;
    const int c0 = (L - side) / 2;
    int placed = 0;
    for (int r = 0; r < L && placed < minus; ++r)
      for (int c = 0; c < side && placed < minus; ++c, ++placed)
        config.set_spin(((r0 + r) % L) * L + c0 + c, -1);
  }
  return config;
}

long SpinConfig::recompute_magnetization() const {
  long m = 0;
  for (auto s : spins_) m += s;
  return m;
}

int SpinConfig::local_field(int site) const {
  const int r = site / L_;
  const int c = site % L_;
  const int outside = boundary_ == Boundary::plus ? 1 : 0;
  int h = 0;
  h += r > 0 ? spin(site - L_) : outside;
  h += r + 1 < L_ ? spin(site + L_) : outside;
  h += c > 0 ? spin(site - 1) : outside;
  h += c + 1 < L_ ? spin(site + 1) : outside;
  return h;
}

bool SpinConfig::adjacent(int a, int b) const {
  const int ra = a / L_, ca = a % L_, rb = b / L_, cb = b % L_;
  return std::abs(ra - rb) + std::abs(ca - cb) == 1;
}

int SpinConfig::exchange_cost(int a, int b) const {
  // flip a, then flip b in the field updated by a's flip
  const int sa = spin(a);
  const int sb = spin(b);
  int cost = 2 * sa * local_field(a);
  int hb = local_field(b);
  if (adjacent(a, b)) hb -= 2 * sa;
  cost += 2 * sb * hb;
  return cost;
}

void SpinConfig::unlink(int site) {
  auto& list = spin(site) < 0 ? minus_sites_ : plus_sites_;
  const int pos = slot_[static_cast<std::size_t>(site)];
  const int last = list.back();
  list[static_cast<std::size_t>(pos)] = last;
  slot_[static_cast<std::size_t>(last)] = pos;
  list.pop_back();
}

void SpinConfig::place(int site, int value) {
  auto& list = value < 0 ? minus_sites_ : plus_sites_;
  slot_[static_cast<std::size_t>(site)] = static_cast<int>(list.size());
  list.push_back(site);
  spins_[static_cast<std::size_t>(site)] = static_cast<std::int8_t>(value);
}

void SpinConfig::set_spin(int site, int value) {
  if (value != 1 && value != -1) throw std::invalid_argument("spin must be +1 or -1");
  const int old = spin(site);
  if (old == value) return;
  unlink(site);
  place(site, value);
  magnetization_ += value - old;
}

void SpinConfig::exchange(int a, int b) {
  const int sa = spin(a);
  const int sb = spin(b);
  if (sa == sb) return;
  set_spin(a, sb);
  set_spin(b, sa);
}

double SpinConfig::boltzmann(int dE) const {
  if (dE <= 0) return 1.0;
  const auto k = static_cast<std::size_t>(dE / 2);
  return k < boltzmann_.size() ? boltzmann_[k] : std::exp(-beta_ * dE);
}

bool SpinConfig::try_flip(int site, double u) {
  const int dE = flip_cost(site);
  if (dE <= 0 || u < boltzmann(dE)) {
    flip(site);
    return true;
  }
  return false;
}

bool SpinConfig::try_exchange(int a, int b, double u) {
  if (spin(a) == spin(b)) return false;
  const int dE = exchange_cost(a, b);
  if (dE <= 0 || u < boltzmann(dE)) {
    exchange(a, b);
    return true;
  }
  return false;
}

int SpinConfig::random_minus_site(RngStream& rng) const {
  return minus_sites_[static_cast<std::size_t>(rng.below(minus_sites_.size()))];
}

int SpinConfig::random_plus_site(RngStream& rng) const {
  return plus_sites_[static_cast<std::size_t>(rng.below(plus_sites_.size()))];
}

bool SpinConfig::operator==(const SpinConfig& other) const {
  return L_ == other.L_ && beta_ == other.beta_ && boundary_ == other.boundary_ &&
         spins_ == other.spins_;
}

long energy(const SpinConfig& config) {
  const int L = config.L();
  const int outside = config.boundary() == Boundary::plus ? 1 : 0;
  long e = 0;
  for (int r = 0; r < L; ++r) {
    for (int c = 0; c < L; ++c) {
      const int s = config.spin(r, c);
      // each interior bond counted once via its lower / right end
      e -= s * (c + 1 < L ? config.spin(r, c + 1) : outside);
      e -= s * (r + 1 < L ? config.spin(r + 1, c) : outside);
      if (r == 0) e -= s * outside;
      if (c == 0) e -= s * outside;
    }
  }
  return e;
}

CanonicalConstraint CanonicalConstraint::from_excess(double v_L_requested, double m_star, int L) {
  if (!(m_star > 0.0)) throw std::domain_error("canonical constraint needs m* > 0");
  if (!(v_L_requested >= 0.0)) throw std::domain_error("excess volume must be >= 0");
  const long n = static_cast<long>(L) * L;
  const double ideal = m_star * static_cast<double>(n) - 2.0 * m_star * v_L_requested;
  // achievable values are n - 2k, k = 0..n
  long k = std::lround((static_cast<double>(n) - ideal) / 2.0);
  k = std::clamp(k, 0L, n);
  CanonicalConstraint out;
  out.target_M = n - 2 * k;
  out.v_L = (m_star * static_cast<double>(n) - static_cast<double>(out.target_M)) / (2.0 * m_star);
  return out;
}

bool canonical_step(SpinConfig& config, [[maybe_unused]] const CanonicalConstraint& constraint,
                    RngStream& rng, ExchangeMode mode) {
  assert(config.magnetization() == constraint.target_M);
  bool accepted = false;
  if (mode == ExchangeMode::nonlocal) {
    if (config.minus_count() == 0 || config.minus_count() == config.sites()) return false;
    const int a = config.random_minus_site(rng);
    const int b = config.random_plus_site(rng);
    accepted = config.try_exchange(a, b, rng.uniform());
  } else {
    const int L = config.L();
    const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(config.sites())));
    const int dir = static_cast<int>(rng.below(4));
    const int r = a / L, c = a % L;
    int b = -1;
    switch (dir) {
      case 0: if (r > 0) b = a - L; break;
      case 1: if (r + 1 < L) b = a + L; break;
      case 2: if (c > 0) b = a - 1; break;
      default: if (c + 1 < L) b = a + 1; break;
    }
    if (b < 0 || config.spin(a) == config.spin(b)) return false;
    accepted = config.try_exchange(a, b, rng.uniform());
  }
  assert(config.magnetization() == constraint.target_M);
  return accepted;
}

bool glauber_step(SpinConfig& config, RngStream& rng) {
  const int site = static_cast<int>(rng.below(static_cast<std::uint64_t>(config.sites())));
  return config.try_flip(site, rng.uniform());
}

void glauber_sweep(SpinConfig& config, RngStream& rng) {
  for (int i = 0, n = config.sites(); i < n; ++i) glauber_step(config, rng);
}

namespace {

template <typename T>
void put(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("truncated checkpoint");
  return value;
}

}  // namespace

void write_checkpoint(std::ostream& out, const SpinConfig& config, ExchangeMode mode,
                      const RngStream& rng) {
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  put(out, kCheckpointVersion);
  put(out, static_cast<std::uint32_t>(config.L()));
  put(out, config.beta());
  put(out, static_cast<std::uint8_t>(config.boundary()));
  put(out, static_cast<std::uint8_t>(mode));
  put(out, rng.seed());
  put(out, rng.stream_id());
  for (auto word : rng.state()) put(out, word);
  std::vector<std::uint8_t> packed((static_cast<std::size_t>(config.sites()) + 7) / 8, 0);
  for (int i = 0; i < config.sites(); ++i)
    if (config.spin(i) < 0) packed[static_cast<std::size_t>(i) / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  out.write(reinterpret_cast<const char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
  if (!out) throw std::runtime_error("checkpoint write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kCheckpointMagic) throw std::runtime_error("not a droplet checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const auto L = static_cast<int>(get<std::uint32_t>(in));
  const auto beta = get<double>(in);
  const auto boundary = get<std::uint8_t>(in);
  const auto mode = get<std::uint8_t>(in);
  if (boundary > 1 || mode > 1) throw std::runtime_error("corrupt checkpoint header");
  const auto seed = get<std::uint64_t>(in);
  const auto stream = get<std::uint64_t>(in);
  RngStream::State state{};
  for (auto& word : state) word = get<std::uint64_t>(in);
  SpinConfig config(L, beta, static_cast<Boundary>(boundary));
  std::vector<std::uint8_t> packed((static_cast<std::size_t>(config.sites()) + 7) / 8);
  in.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
  if (!in) throw std::runtime_error("truncated checkpoint");
  for (int i = 0; i < config.sites(); ++i)
    if (packed[static_cast<std::size_t>(i) / 8] & (1u << (i % 8))) config.set_spin(i, -1);
  RngStream rng(seed, stream);
  rng.set_state(state);
  return Checkpoint{std::move(config), static_cast<ExchangeMode>(mode), rng};
}

}  // namespace droplet
