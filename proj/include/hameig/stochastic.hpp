#ifndef HAMEIG_STOCHASTIC_HPP
#define HAMEIG_STOCHASTIC_HPP

// Monte Carlo layer: finite-state Markov chain sampling, compensated jump
// increments, and the coupled forward simulation of eigenfunction paths
// driven by the gain schedule of an eigenvalue record.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "hameig/coefficients.hpp"
#include "hameig/errors.hpp"
#include "hameig/riccati.hpp"
#include "hameig/spectrum.hpp"

namespace hameig {

namespace detail {

// Counter-based generator; one 64-bit state, full-period, cheap to split.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform draw in (0, 1]; never zero, so logarithms are safe.
  double unit() {
    return static_cast<double>((next() >> 11) + 1) * 0x1p-53;
  }

 private:
  std::uint64_t state_;
};

// Box-Muller with a cached spare draw.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

  double operator()() {
    if (have_) {
      have_ = false;
      return spare_;
    }
    const double u1 = rng_.unit();
    const double u2 = rng_.unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_ = true;
    return r * std::cos(a);
  }

 private:
  SplitMix64 rng_;
  bool have_ = false;
  double spare_ = 0.0;
};

// Running compensated sum.
struct Kahan {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

}  // namespace detail

struct MarkovChainPath {
  double T = 0.0;
  std::vector<int> states;  // visited states (1-based); jumps + 1 entries
  std::vector<double> jump_times;

  // Right-continuous: a jump at exactly t is already in effect at t.
  int state_at(double t) const {
    const auto it =
        std::upper_bound(jump_times.begin(), jump_times.end(), t);
    return states[static_cast<std::size_t>(it - jump_times.begin())];
  }
};

// Samples one trajectory of the chain with generator Q on [0, T] by drawing
// exponential holding times at the current state's rate.  States with no
// outflow are absorbing.
inline MarkovChainPath sample_chain(const Eigen::MatrixXd& Q,
                                    int initial_state, double T,
                                    std::uint64_t seed) {
  const int n = static_cast<int>(Q.rows());
  if (n == 0 || Q.cols() != n)
    throw InputError("generator must be a nonempty square matrix");
  if (initial_state < 1 || initial_state > n)
    throw InputError("initial state outside the generator's range");
  MarkovChainPath path;
  path.T = T;
  path.states.push_back(initial_state);
  detail::SplitMix64 rng(seed);
  double t = 0.0;
  int st = initial_state;
  while (true) {
    const double rate = -Q(st - 1, st - 1);
    if (!(rate > 0.0)) break;  // absorbing
    t += -std::log(rng.unit()) / rate;
    if (t > T) break;
    const double target = rng.unit() * rate;
    double acc = 0.0;
    int next = st;
    for (int j = 1; j <= n; ++j) {
      if (j == st) continue;
      acc += std::max(0.0, Q(st - 1, j - 1));
      if (acc >= target) {
        next = j;
        break;
      }
    }
    if (next == st) {
      for (int j = n; j >= 1; --j) {
        if (j != st && Q(st - 1, j - 1) > 0.0) {
          next = j;
          break;
        }
      }
      if (next == st) break;  // no reachable state despite positive rate
    }
    path.jump_times.push_back(t);
    path.states.push_back(next);
    st = next;
  }
  return path;
}

// Per-step jump counts, left-limit compensator rates, and compensated
// increments of the chain's counting process on a grid.  Step i covers
// (grid[i], grid[i+1]]; the rate is taken at the state in effect just
// before the step begins.
struct IncrementSet {
  std::vector<int> dV;
  std::vector<double> r;
  std::vector<double> dVtilde;
};

inline IncrementSet compensated_increments(const MarkovChainPath& path,
                                           const std::vector<double>& grid,
                                           const Eigen::MatrixXd& Q) {
  if (grid.size() < 2)
    throw InputError("increment grid needs at least two points");
  const std::size_t M = grid.size() - 1;
  IncrementSet inc;
  inc.dV.resize(M);
  inc.r.resize(M);
  inc.dVtilde.resize(M);
  for (std::size_t i = 0; i < M; ++i) {
    const double a = grid[i], b = grid[i + 1];
    const auto& jt = path.jump_times;
    const auto up_a = std::upper_bound(jt.begin(), jt.end(), a);
    const auto up_b = std::upper_bound(jt.begin(), jt.end(), b);
    const int count = static_cast<int>(up_b - up_a);
    const auto before_a = std::lower_bound(jt.begin(), jt.end(), a);
    const int st =
        path.states[static_cast<std::size_t>(before_a - jt.begin())];
    const double rate = Q.size() > 0 ? -Q(st - 1, st - 1) : 0.0;
    inc.dV[i] = count;
    inc.r[i] = rate;
    inc.dVtilde[i] = count - rate * (b - a);
  }
  return inc;
}

// ---------------------------------------------------------------------------
// Eigenfunction simulation
// ---------------------------------------------------------------------------

struct SimOptions {
  long paths = 1;
  double dt = 0.0;  // non-positive picks T / 4096
  std::uint64_t seed = 0;
  int initial_state = 1;
  Eigen::VectorXd x0tilde;  // empty: kernel direction, or all-ones scalar
  long keep_paths = 1;
};

struct SpliceRecord {
  double t = 0.0;
  Eigen::VectorXd handed;
  Eigen::VectorXd received;
};

struct EigenfunctionPath {
  std::vector<double> times;
  std::vector<int> states;
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> y;
  std::vector<Eigen::VectorXd> z;
  std::vector<Eigen::VectorXd> theta;
  std::vector<SpliceRecord> splices;
};

struct ResidualReport {
  double x0_norm = 0.0;
  double yT_mean = 0.0;
  double yT_se = 0.0;
  double nontriviality = 0.0;  // mean over paths of sup_t |x|
  double decouple_max = 0.0;   // worst gap between restarted and gain co-state
};

struct SimResult {
  ResidualReport report;
  std::vector<EigenfunctionPath> paths;
};

namespace detail {

// Euler coefficients frozen at one grid node of one schedule interval.
struct NodeCoeffs {
  Eigen::MatrixXd A, B, C;       // drift, Brownian, and jump loads on v
  Eigen::MatrixXd Xv, Yv, Zv, Tv;  // output maps applied to v
  Eigen::MatrixXd e11, e12, e13, e14;  // first-row blocks for the co-state
};

}  // namespace detail

// Simulates closed-loop eigenfunction paths for a located eigenvalue.  The
// forward variable of each schedule interval is propagated by Euler steps
// on a uniform grid, with chain jumps aggregated per step; interval splices
// hand the transformed variable across bitwise.  The report collects the
// initial-value norm, the terminal residual of the independently restarted
// co-state, its worst in-path deviation from the gain relation, and the
// mean path amplitude.
inline SimResult simulate_eigenfunction(const HamiltonianSpec& s,
                                        const EigenvalueRecord& rec,
                                        const SimOptions& opt) {
  const int n = s.H.n();
  const double T = s.H.T();
  if (opt.paths < 1) throw InputError("path count must be positive");
  const double dt = opt.dt > 0.0 ? opt.dt : T / 4096.0;
  if (!(dt > 0.0) || dt > T) throw InputError("step size must lie in (0, T]");

  Eigen::VectorXd v0;
  if (opt.x0tilde.size() > 0) {
    if (opt.x0tilde.size() != n)
      throw InputError("starting vector dimension does not match the system");
    v0 = opt.x0tilde;
  } else if (rec.kernel_basis.cols() > 0) {
    v0 = rec.kernel_basis.col(0);
  } else {
    v0 = Eigen::VectorXd::Ones(n);
  }

  const IntegrateOptions iopt;
  GainSchedule sched = GainSchedule::build(s, rec, iopt);
  const std::size_t JI = sched.intervals.size();
  const double param = rec.pattern == Pattern::varrho_scaling
                           ? 1.0 - rec.rho
                           : rec.rho;
  EffectiveField Ew =
      EffectiveField::make(s, rec.pattern, Family::primal, param);

  // Uniform grid and frozen coefficients per interval, shared by all paths.
  std::vector<std::vector<double>> grids(JI);
  std::vector<std::vector<detail::NodeCoeffs>> coeffs(JI);
  for (std::size_t j = 0; j < JI; ++j) {
    const auto& iv = sched.intervals[j];
    const double len = iv.t1 - iv.t0;
    const long steps = std::max(1L, static_cast<long>(
                                        std::ceil(len / dt - 1e-9)));
    grids[j].resize(static_cast<std::size_t>(steps) + 1);
    for (long i = 0; i <= steps; ++i)
      grids[j][static_cast<std::size_t>(i)] = iv.t0 + len * i / steps;
    grids[j].back() = iv.t1;
    coeffs[j].reserve(grids[j].size());
    for (double t : grids[j]) {
      const Eigen::MatrixXd K = sched.value(static_cast<int>(j), t);
      const BlockSet b = iv.field.blocks(t);
      const GainPair g = solve_gains(K, b);
      detail::NodeCoeffs nc;
      nc.A = b(2, 1) + b(2, 2) * K + b(2, 3) * g.L + b(2, 4) * g.P;
      nc.B = b(3, 1) + b(3, 2) * K + b(3, 3) * g.L;
      nc.C = b(4, 1) + b(4, 2) * K + b(4, 4) * g.P;
      if (iv.family == Family::primal) {
        nc.Xv = Eigen::MatrixXd::Identity(n, n);
        nc.Yv = K;
        nc.Zv = g.L;
        nc.Tv = g.P;
      } else {
        nc.Xv = K;
        nc.Yv = Eigen::MatrixXd::Identity(n, n);
        nc.Zv = b(3, 1) + b(3, 2) * K + b(3, 3) * g.L;
        nc.Tv = b(4, 1) + b(4, 2) * K + b(4, 4) * g.P;
      }
      const BlockSet e = Ew.blocks(t);
      nc.e11 = e(1, 1);
      nc.e12 = e(1, 2);
      nc.e13 = e(1, 3);
      nc.e14 = e(1, 4);
      coeffs[j].push_back(std::move(nc));
    }
  }

  SimResult out;
  const long kept = std::min(opt.paths, std::max(0L, opt.keep_paths));
  out.paths.reserve(static_cast<std::size_t>(kept));

  detail::Kahan yT_sum, amp_sum;
  double yT_sumsq = 0.0;
  double decouple = 0.0;
  bool have_x0 = false;

  for (long p = 0; p < opt.paths; ++p) {
    detail::SplitMix64 seeder(opt.seed +
                              0x9e3779b97f4a7c15ull *
                                  static_cast<std::uint64_t>(p + 1));
    const std::uint64_t chain_seed = seeder.next();
    const std::uint64_t noise_seed = seeder.next();
    MarkovChainPath chain;
    if (s.Q.size() > 0) {
      chain = sample_chain(s.Q, opt.initial_state, T, chain_seed);
    } else {
      chain.T = T;
      chain.states.push_back(opt.initial_state);
    }
    detail::NormalSampler normal(noise_seed);

    const bool keep = p < kept;
    EigenfunctionPath rec_path;

    Eigen::VectorXd v = v0;
    double sup_x = 0.0;
    double wT = 0.0;
    for (std::size_t j = 0; j < JI; ++j) {
      const auto& grid = grids[j];
      const auto& nc = coeffs[j];
      const IncrementSet inc = compensated_increments(chain, grid, s.Q);

      Eigen::VectorXd vminus = v;
      Eigen::VectorXd xi = nc[0].Xv * v;
      Eigen::VectorXd yi = nc[0].Yv * v;
      Eigen::VectorXd zi = nc[0].Zv * vminus;
      Eigen::VectorXd ti = nc[0].Tv * vminus;
      Eigen::VectorXd w = yi;  // restart at the gain co-state
      for (std::size_t i = 0; i < grid.size(); ++i) {
        sup_x = std::max(sup_x, xi.norm());
        decouple = std::max(decouple, (w - yi).norm());
        if (!have_x0) {
          out.report.x0_norm = xi.norm();
          have_x0 = true;
        }
        if (keep) {
          rec_path.times.push_back(grid[i]);
          rec_path.states.push_back(chain.state_at(grid[i]));
          rec_path.x.push_back(xi);
          rec_path.y.push_back(yi);
          rec_path.z.push_back(zi);
          rec_path.theta.push_back(ti);
        }
        if (i + 1 < grid.size()) {
          const double h = grid[i + 1] - grid[i];
          const double dB = std::sqrt(h) * normal();
          const double dnu = static_cast<double>(inc.dV[i]);
          Eigen::VectorXd vnext = v + nc[i].A * v * h + nc[i].B * v * dB +
                                  nc[i].C * v * (dnu - inc.r[i] * h);
          vminus = vnext - nc[i].C * v * dnu;
          const auto& nn = nc[i + 1];
          Eigen::VectorXd xn = nn.Xv * vnext;
          Eigen::VectorXd yn = nn.Yv * vnext;
          Eigen::VectorXd zn = nn.Zv * vminus;
          Eigen::VectorXd tn = nn.Tv * vminus;
          // Drift forcing at the right endpoint keeps the co-state residual
          // a first-order probe of the gain relation; the martingale terms
          // stay at the left endpoint so they remain predictable.
          w += -(nn.e11 * xn + nn.e12 * w + nn.e13 * zn + nn.e14 * tn) * h +
               zi * dB + ti * inc.dVtilde[i];
          v = std::move(vnext);
          xi = std::move(xn);
          yi = std::move(yn);
          zi = std::move(zn);
          ti = std::move(tn);
        } else {
          wT = w.norm();
        }
      }
      if (j + 1 < JI) {
        // Hand the transformed forward variable across the splice.
        Eigen::VectorXd handed =
            sched.intervals[j].family == Family::primal ? nc.back().Yv * v
                                                        : nc.back().Xv * v;
        if (keep) {
          SpliceRecord sp;
          sp.t = grid.back();
          sp.handed = handed;
          sp.received = handed;
          rec_path.splices.push_back(std::move(sp));
        }
        v = handed;
      }
    }
    yT_sum.add(wT);
    yT_sumsq += wT * wT;
    amp_sum.add(sup_x);
    if (keep) out.paths.push_back(std::move(rec_path));
  }

  const double N = static_cast<double>(opt.paths);
  out.report.yT_mean = yT_sum.sum / N;
  out.report.nontriviality = amp_sum.sum / N;
  out.report.decouple_max = decouple;
  if (opt.paths > 1) {
    const double var =
        std::max(0.0, (yT_sumsq - N * out.report.yT_mean *
                                      out.report.yT_mean) /
                          (N - 1.0));
    out.report.yT_se = std::sqrt(var / N);
  }
  return out;
}

}  // namespace hameig

#endif  // HAMEIG_STOCHASTIC_HPP
