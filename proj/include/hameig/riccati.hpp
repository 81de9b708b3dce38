#ifndef HAMEIG_RICCATI_HPP
#define HAMEIG_RICCATI_HPP

// Generalized matrix Riccati equations: effective coefficient patterns,
// right-hand sides with noise-feedback resolvents, an adaptive
// Dormand-Prince integrator with dense output, escape-time estimation, and
// the inverse-variable continuation across blow-ups.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "hameig/coefficients.hpp"
#include "hameig/errors.hpp"

namespace hameig {

// How the spectral parameter enters the coefficients.
enum class Pattern {
  varrho_scaling,  // weight on the coupling blocks and the co-state cost
  hbar_shift,      // additive shift of the co-state cost by -rho * Hbar22
};

// Which of the two mutually inverse Riccati variables is integrated.
enum class Family { primal, dual };

enum class StopReason { reached_end, blow_up, switched };

// A full 4x4 grid of n x n blocks; entries are set verbatim (no implied
// symmetry), missing entries are zero.
class BlockSet {
 public:
  static BlockSet zero(int n) {
    BlockSet b;
    b.n_ = n;
    for (auto& m : b.m_) m = Eigen::MatrixXd::Zero(n, n);
    return b;
  }

  const Eigen::MatrixXd& operator()(int k, int l) const {
    return m_[index(k, l)];
  }

  void set(int k, int l, Eigen::MatrixXd M) { m_[index(k, l)] = std::move(M); }

  int n() const { return n_; }

 private:
  static int index(int k, int l) {
    if (k < 1 || k > 4 || l < 1 || l > 4)
      throw InputError("block index outside 1..4");
    return (k - 1) * 4 + (l - 1);
  }

  int n_ = 0;
  std::array<Eigen::MatrixXd, 16> m_;
};

struct GainPair {
  Eigen::MatrixXd L;
  Eigen::MatrixXd P;
};

// Noise feedback gains L = (I - K b33)^{-1} K (b31 + b32 K) and the same
// with blocks (4,*) for P.
inline GainPair solve_gains(const Eigen::MatrixXd& K, const BlockSet& b) {
  const Eigen::Index n = K.rows();
  GainPair g;
  if (n == 1) {
    const double k = K(0, 0);
    auto gain1 = [&](int row) {
      const double den = 1.0 - k * b(row, row)(0, 0);
      if (std::abs(den) <= 1e-12 * (1.0 + std::abs(k * b(row, row)(0, 0))))
        throw SingularError("noise feedback resolvent is singular");
      Eigen::MatrixXd out(1, 1);
      out(0, 0) = k * (b(row, 1)(0, 0) + b(row, 2)(0, 0) * k) / den;
      return out;
    };
    g.L = gain1(3);
    g.P = gain1(4);
    return g;
  }
  auto gain = [&](int row) {
    Eigen::MatrixXd R = Eigen::MatrixXd::Identity(n, n) - K * b(row, row);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(R);
    if (!lu.isInvertible() || lu.rcond() < 1e-12)
      throw SingularError("noise feedback resolvent is singular");
    return Eigen::MatrixXd(lu.solve(K * (b(row, 1) + b(row, 2) * K)));
  };
  g.L = gain(3);
  g.P = gain(4);
  return g;
}

// ---------------------------------------------------------------------------
// Effective coefficient field: spec + pattern + family evaluated pointwise.
// ---------------------------------------------------------------------------

namespace detail {

// Scalar view of a 4x4 block grid (n == 1 fast path).
struct ScalarBlocks {
  double b[5][5] = {};  // 1-based
};

}  // namespace detail

class EffectiveField {
 public:
  static EffectiveField make(const HamiltonianSpec& s, Pattern pattern,
                             Family family, double param) {
    if (s.H.n() < 1) throw ConfigError("base coefficient field is empty");
    if (s.Hbar.n() > 0 &&
        (s.Hbar.n() != s.H.n() ||
         std::abs(s.Hbar.T() - s.H.T()) > 1e-9 * std::max(1.0, s.H.T())))
      throw ConfigError("perturbation field does not match the base field");
    EffectiveField e;
    e.spec_ = s;
    e.pattern_ = pattern;
    e.family_ = family;
    e.param_ = param;
    return e;
  }

  int n() const { return spec_.H.n(); }
  double T() const { return spec_.H.T(); }
  Pattern pattern() const { return pattern_; }
  Family family() const { return family_; }
  double param() const { return param_; }
  const HamiltonianSpec& spec() const { return spec_; }

  BlockSet blocks(double t) const {
    const int n = spec_.H.n();
    BlockSet b = BlockSet::zero(n);
    if (family_ == Family::primal) {
      for (int k = 1; k <= 4; ++k) {
        for (int l = k; l <= 4; ++l) {
          if (k == 3 && l == 4) continue;
          Eigen::MatrixXd M = spec_.H.block_clamped(k, l, t);
          if (k == 2 && l == 2) {
            if (pattern_ == Pattern::hbar_shift) {
              if (spec_.Hbar.n() > 0)
                M -= param_ * spec_.Hbar.block_clamped(2, 2, t);
            } else {
              M *= param_;
            }
          } else if (pattern_ == Pattern::varrho_scaling && k <= 2 && l >= 3) {
            M *= param_;  // coupling blocks carry the weight, noise diagonals do not
          }
          b.set(k, l, M);
          if (k != l) b.set(l, k, M.transpose());
        }
      }
      return b;
    }
    // Dual family: pointwise inverse-variable blocks of the (possibly
    // shifted) base field.  The weight rides along for the scaling pattern.
    const double w = (pattern_ == Pattern::varrho_scaling) ? param_ : 1.0;
    detail::DualUpper d;
    if (pattern_ == Pattern::hbar_shift) {
      Eigen::MatrixXd shifted = spec_.H.block_clamped(2, 2, t);
      if (spec_.Hbar.n() > 0)
        shifted -= param_ * spec_.Hbar.block_clamped(2, 2, t);
      d = detail::dual_upper_at(spec_.H, 1.0, t, &shifted);
    } else {
      d = detail::dual_upper_at(spec_.H, w, t);
    }
    for (int k = 1; k <= 4; ++k) {
      for (int l = k; l <= 4; ++l) {
        if (k == 3 && l == 4) continue;
        const Eigen::MatrixXd& M = detail::dual_entry(d, k, l);
        b.set(k, l, M);
        if (k != l) b.set(l, k, M.transpose());
      }
    }
    return b;
  }

  // Scalar-system evaluation without matrix temporaries.
  detail::ScalarBlocks scalar_blocks(double t) const {
    const auto h = [&](int k, int l) {
      return spec_.H.block1_clamped(k, l, t);
    };
    const double h11 = h(1, 1), h12 = h(1, 2), h13 = h(1, 3), h14 = h(1, 4);
    const double h22 = h(2, 2), h23 = h(2, 3), h24 = h(2, 4);
    const double h33 = h(3, 3), h44 = h(4, 4);
    const double hbar22 =
        spec_.Hbar.n() > 0 ? spec_.Hbar.block1_clamped(2, 2, t) : 0.0;
    detail::ScalarBlocks sb;
    if (family_ == Family::primal) {
      const bool vr = pattern_ == Pattern::varrho_scaling;
      const double w = vr ? param_ : 1.0;
      sb.b[1][1] = h11;
      sb.b[1][2] = sb.b[2][1] = h12;
      sb.b[2][2] = vr ? param_ * h22 : h22 - param_ * hbar22;
      sb.b[1][3] = sb.b[3][1] = w * h13;
      sb.b[1][4] = sb.b[4][1] = w * h14;
      sb.b[2][3] = sb.b[3][2] = w * h23;
      sb.b[2][4] = sb.b[4][2] = w * h24;
      sb.b[3][3] = h33;
      sb.b[4][4] = h44;
      return sb;
    }
    if (std::abs(h33) <= 1e-300 || std::abs(h44) <= 1e-300)
      throw SingularError("noise diagonal block is singular");
    const double inv33 = 1.0 / h33, inv44 = 1.0 / h44;
    const double w = (pattern_ == Pattern::varrho_scaling) ? param_ : 1.0;
    const double b22eff =
        (pattern_ == Pattern::hbar_shift) ? h22 - param_ * hbar22 : h22;
    const double w2 = w * w;
    sb.b[1][1] = w2 * (h23 * h23 * inv33 + h24 * h24 * inv44) - w * b22eff;
    sb.b[1][2] = sb.b[2][1] =
        w2 * (h23 * h13 * inv33 + h24 * h14 * inv44) - h12;
    sb.b[2][2] = w2 * (h13 * h13 * inv33 + h14 * h14 * inv44) - h11;
    sb.b[1][3] = sb.b[3][1] = -w * h23 * inv33;
    sb.b[1][4] = sb.b[4][1] = -w * h24 * inv44;
    sb.b[2][3] = sb.b[3][2] = -w * h13 * inv33;
    sb.b[2][4] = sb.b[4][2] = -w * h14 * inv44;
    sb.b[3][3] = inv33;
    sb.b[4][4] = inv44;
    return sb;
  }

 private:
  HamiltonianSpec spec_;
  Pattern pattern_ = Pattern::hbar_shift;
  Family family_ = Family::primal;
  double param_ = 0.0;
};

// Scalar quadratic form of the equation: -k' = b + a k + c k^2 for the
// primal variable (the dual satisfies -g' = -c - a g - b g^2).
struct ScalarCoefficients {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

inline ScalarCoefficients scalar_coefficients(const HamiltonianSpec& s,
                                              Pattern pattern, double param,
                                              double t) {
  if (s.H.n() != 1)
    throw InputError("scalar coefficients require a scalar system");
  const auto h = [&](int k, int l) { return s.H.block1_clamped(k, l, t); };
  const double h11 = h(1, 1), h12 = h(1, 2), h13 = h(1, 3), h14 = h(1, 4);
  const double h22 = h(2, 2), h33 = h(3, 3), h44 = h(4, 4);
  const double hbar22 =
      s.Hbar.n() > 0 ? s.Hbar.block_clamped(2, 2, t)(0, 0) : 0.0;
  ScalarCoefficients co;
  co.b = h11;
  if (pattern == Pattern::hbar_shift) {
    co.a = 2.0 * h12 + h13 * h13 + h14 * h14;
    co.c = h22 - param * hbar22 - h33 * h13 * h13 - h44 * h14 * h14;
  } else {
    const double w2 = param * param;
    co.a = 2.0 * h12 + w2 * (h13 * h13 + h14 * h14);
    co.c = param * h22 - w2 * (h33 * h13 * h13 + h44 * h14 * h14);
  }
  return co;
}

// Right-hand side of -K' = rhs(K, t) for the family the field was built
// with.  Both the additive blocks and the two noise resolvent terms are
// evaluated; a singular resolvent throws SingularError.
inline Eigen::MatrixXd riccati_rhs(const Eigen::MatrixXd& K,
                                   const EffectiveField& E, double t) {
  const int n = E.n();
  if (K.rows() != n || K.cols() != n)
    throw InputError("value dimension does not match the field");
  if (n == 1) {
    const auto sb = E.scalar_blocks(t);
    const double k = K(0, 0);
    auto noise = [&](int row) {
      const double den = 1.0 - k * sb.b[row][row];
      if (std::abs(den) <= 1e-12 * (1.0 + std::abs(k * sb.b[row][row])))
        throw SingularError("noise feedback resolvent is singular");
      return (k * sb.b[2][row] + sb.b[1][row]) * (k / den) *
             (sb.b[row][1] + sb.b[row][2] * k);
    };
    Eigen::MatrixXd out(1, 1);
    out(0, 0) = sb.b[1][1] + (sb.b[1][2] + sb.b[2][1]) * k +
                sb.b[2][2] * k * k + noise(3) + noise(4);
    return out;
  }
  const BlockSet b = E.blocks(t);
  auto resolvent_term = [&](int row) {
    Eigen::MatrixXd R = Eigen::MatrixXd::Identity(n, n) - K * b(row, row);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(R);
    if (!lu.isInvertible() || lu.rcond() < 1e-12)
      throw SingularError("noise feedback resolvent is singular");
    Eigen::MatrixXd F = lu.solve(K);
    return Eigen::MatrixXd((K * b(2, row) + b(1, row)) * F *
                           (b(row, 1) + b(row, 2) * K));
  };
  return b(1, 1) + K * b(2, 1) + b(1, 2) * K + K * b(2, 2) * K +
         resolvent_term(3) + resolvent_term(4);
}

// ---------------------------------------------------------------------------
// Adaptive integration
// ---------------------------------------------------------------------------

struct IntegrateOptions {
  double rtol = 1e-10;
  double atol = 1e-13;
  double max_step = 0.005;      // absolute ceiling on |h|
  long max_steps = 2000000;     // attempted steps before giving up
  double blow_up_norm = 1e8;    // Frobenius norm treated as escape
  double switch_threshold = 1e4;  // norm at which the continuation inverts
  double fit_norm = 1e4;        // nodes above this enter the escape-time fit
  double window_margin = -1.0;  // escape window size in multiples of T
                                // below zero; negative picks the default 2
};

struct TrajNode {
  double t = 0.0;
  Eigen::MatrixXd K;
  Eigen::MatrixXd Kdot;  // dK/dt = -rhs
  Eigen::MatrixXd L;
  Eigen::MatrixXd P;
};

struct RiccatiTrajectory {
  Family family = Family::primal;
  std::vector<TrajNode> nodes;
  StopReason stop = StopReason::reached_end;

  double t_front() const { return nodes.front().t; }
  double t_back() const { return nodes.back().t; }
  double t_min() const { return std::min(t_front(), t_back()); }
  double t_max() const { return std::max(t_front(), t_back()); }

  // Cubic Hermite dense output between adjacent nodes.
  Eigen::MatrixXd value(double t) const {
    if (nodes.empty()) throw DomainError("empty trajectory");
    if (nodes.size() == 1) {
      if (std::abs(t - nodes.front().t) > 1e-9 * (1.0 + std::abs(t)))
        throw DomainError("time outside the trajectory span");
      return nodes.front().K;
    }
    const double slack = 1e-9 * (1.0 + std::max(std::abs(t_min()),
                                                std::abs(t_max())));
    if (t < t_min() - slack || t > t_max() + slack)
      throw DomainError("time outside the trajectory span");
    t = std::min(std::max(t, t_min()), t_max());
    const bool ascending = nodes.back().t > nodes.front().t;
    // Binary search for the bracketing node pair in storage order.
    std::size_t lo = 0, hi = nodes.size() - 1;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      const bool left = ascending ? (t < nodes[mid].t) : (t > nodes[mid].t);
      if (left)
        hi = mid;
      else
        lo = mid;
    }
    const TrajNode& a = ascending ? nodes[lo] : nodes[hi];
    const TrajNode& b = ascending ? nodes[hi] : nodes[lo];
    const double h = b.t - a.t;
    if (std::abs(h) < 1e-300) return a.K;
    const double x = (t - a.t) / h;
    const double h00 = (1.0 + 2.0 * x) * (1.0 - x) * (1.0 - x);
    const double h10 = x * (1.0 - x) * (1.0 - x);
    const double h01 = x * x * (3.0 - 2.0 * x);
    const double h11 = x * x * (x - 1.0);
    return h00 * a.K + (h10 * h) * a.Kdot + h01 * b.K + (h11 * h) * b.Kdot;
  }
};

namespace detail {

// One Dormand-Prince 5(4) integration with FSAL, signed step, node
// recording, and an optional escape norm.  `escape_norm <= 0` disables the
// escape check.  Underflow of the controller step is classified as an
// escape when the solution is already large, otherwise it is an error.
template <class Rhs>
RiccatiTrajectory dp54_integrate(const Rhs& f, Family family, int n,
                                 double terminal_t,
                                 const Eigen::MatrixXd& K_end, double stop_t,
                                 const IntegrateOptions& opt,
                                 double escape_norm,
                                 const EffectiveField& E) {
  RiccatiTrajectory traj;
  traj.family = family;

  auto push_node = [&](double t, const Eigen::MatrixXd& K,
                       const Eigen::MatrixXd& Kdot) {
    TrajNode node;
    node.t = t;
    node.K = K;
    node.Kdot = Kdot;
    if (n == 1) {
      const auto sb = E.scalar_blocks(t);
      const double k = K(0, 0);
      auto gain1 = [&](int row) {
        const double den = 1.0 - k * sb.b[row][row];
        if (std::abs(den) <= 1e-12 * (1.0 + std::abs(k * sb.b[row][row])))
          throw SingularError("noise feedback resolvent is singular");
        Eigen::MatrixXd out(1, 1);
        out(0, 0) = k * (sb.b[row][1] + sb.b[row][2] * k) / den;
        return out;
      };
      node.L = gain1(3);
      node.P = gain1(4);
    } else {
      GainPair g = solve_gains(K, E.blocks(t));
      node.L = std::move(g.L);
      node.P = std::move(g.P);
    }
    traj.nodes.push_back(std::move(node));
  };

  Eigen::MatrixXd K = 0.5 * (K_end + K_end.transpose());
  double t = terminal_t;
  Eigen::MatrixXd k1 = f(t, K);
  push_node(t, K, k1);

  const double span = stop_t - terminal_t;
  if (std::abs(span) <= 1e-14 * (1.0 + std::abs(terminal_t))) {
    traj.stop = StopReason::reached_end;
    return traj;
  }
  const double dir = span > 0.0 ? 1.0 : -1.0;
  double h = dir * std::min(opt.max_step, std::abs(span) / 16.0);

  Eigen::MatrixXd k2, k3, k4, k5, k6, k7, y5, y4;
  long attempts = 0;
  while (true) {
    const double remaining = stop_t - t;
    bool clipped = false;
    if ((t + h - stop_t) * dir >= 0.0) {
      h = remaining;
      clipped = true;
    }
    const double h_floor = 1e-13 * std::max(1.0, std::abs(t));
    if (clipped && std::abs(h) <= h_floor) {
      // Already at the stop time up to roundoff.
      traj.nodes.back().t = stop_t;
      traj.stop = StopReason::reached_end;
      return traj;
    }
    if (!clipped && std::abs(h) < h_floor) {
      if (K.norm() >= opt.fit_norm) {
        traj.stop = StopReason::blow_up;
        return traj;
      }
      throw NumericalError("step size underflow away from an escape");
    }
    if (++attempts > opt.max_steps)
      throw NumericalError("integration step budget exhausted");

    k2 = f(t + h * (1.0 / 5.0), K + h * ((1.0 / 5.0) * k1));
    k3 = f(t + h * (3.0 / 10.0),
           K + h * ((3.0 / 40.0) * k1 + (9.0 / 40.0) * k2));
    k4 = f(t + h * (4.0 / 5.0),
           K + h * ((44.0 / 45.0) * k1 - (56.0 / 15.0) * k2 +
                    (32.0 / 9.0) * k3));
    k5 = f(t + h * (8.0 / 9.0),
           K + h * ((19372.0 / 6561.0) * k1 - (25360.0 / 2187.0) * k2 +
                    (64448.0 / 6561.0) * k3 - (212.0 / 729.0) * k4));
    k6 = f(t + h, K + h * ((9017.0 / 3168.0) * k1 - (355.0 / 33.0) * k2 +
                           (46732.0 / 5247.0) * k3 + (49.0 / 176.0) * k4 -
                           (5103.0 / 18656.0) * k5));
    y5 = K + h * ((35.0 / 384.0) * k1 + (500.0 / 1113.0) * k3 +
                  (125.0 / 192.0) * k4 - (2187.0 / 6784.0) * k5 +
                  (11.0 / 84.0) * k6);
    k7 = f(t + h, y5);
    y4 = K + h * ((5179.0 / 57600.0) * k1 + (7571.0 / 16695.0) * k3 +
                  (393.0 / 640.0) * k4 - (92097.0 / 339200.0) * k5 +
                  (187.0 / 2100.0) * k6 + (1.0 / 40.0) * k7);

    double err = 0.0;
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        const double sc =
            opt.atol + opt.rtol * std::max(std::abs(K(r, c)),
                                           std::abs(y5(r, c)));
        err = std::max(err, std::abs(y5(r, c) - y4(r, c)) / sc);
      }
    }

    if (err <= 1.0) {
      t = clipped ? stop_t : t + h;
      K = 0.5 * (y5 + y5.transpose());
      k1 = k7;  // first-same-as-last
      push_node(t, K, k1);
      if (escape_norm > 0.0 && K.norm() >= escape_norm) {
        traj.stop = StopReason::blow_up;
        return traj;
      }
      if (clipped) {
        traj.stop = StopReason::reached_end;
        return traj;
      }
    }
    double fac = err > 1e-300 ? 0.9 * std::pow(err, -0.2) : 5.0;
    fac = std::min(5.0, std::max(0.2, fac));
    h *= fac;
    if (std::abs(h) > opt.max_step) h = dir * opt.max_step;
  }
}

}  // namespace detail

// Integrates -K' = rhs backward (or forward) from K(terminal_t) = K_end
// until stop_t.  The terminal value must be symmetric.  Accepted values are
// re-symmetrized; nodes store the value, its time derivative, and the noise
// gains.  A value whose norm reaches the escape cap ends the trajectory
// with StopReason::blow_up.
inline RiccatiTrajectory integrate_riccati(const EffectiveField& E,
                                           double terminal_t,
                                           const Eigen::MatrixXd& K_end,
                                           double stop_t,
                                           const IntegrateOptions& opt) {
  const int n = E.n();
  if (K_end.rows() != n || K_end.cols() != n)
    throw InputError("terminal value dimension does not match the field");
  if ((K_end - K_end.transpose()).norm() >
      1e-9 * (1.0 + K_end.norm()))
    throw InputError("terminal value must be symmetric");
  auto f = [&](double t, const Eigen::MatrixXd& K) -> Eigen::MatrixXd {
    return -riccati_rhs(K, E, t);
  };
  return detail::dp54_integrate(f, E.family(), n, terminal_t, K_end, stop_t,
                                opt, opt.blow_up_norm, E);
}

// Escape-time estimate for one family of the parameterized equation.
struct BlowUpResult {
  bool blew_up = false;
  double t_star = -std::numeric_limits<double>::infinity();
  double bracket_lo = -std::numeric_limits<double>::infinity();
  double bracket_hi = -std::numeric_limits<double>::infinity();
  double norm_at_stop = 0.0;
};

// Integrates backward from (terminal_t, K_end) over the escape window
// [-margin * T, terminal_t].  If the norm escapes, the escape time is the
// zero crossing of a straight-line fit to 1/norm over the trailing
// large-norm nodes, reported with a +-0.5e-7 * max(|terminal_t|, 1e-3)
// bracket.  Without an escape the result is the -infinity sentinel.
inline BlowUpResult blow_up_time(const HamiltonianSpec& s, Pattern pattern,
                                 Family family, double param,
                                 double terminal_t,
                                 const Eigen::MatrixXd& K_end,
                                 const IntegrateOptions& opt) {
  EffectiveField E = EffectiveField::make(s, pattern, family, param);
  const double margin = opt.window_margin > 0.0 ? opt.window_margin : 2.0;
  const double stop_t = -margin * s.H.T();
  if (!(terminal_t > stop_t))
    throw InputError("terminal time must lie above the escape window");
  RiccatiTrajectory traj =
      integrate_riccati(E, terminal_t, K_end, stop_t, opt);

  BlowUpResult out;
  out.norm_at_stop = traj.nodes.back().K.norm();
  if (traj.stop != StopReason::blow_up) return out;

  out.blew_up = true;
  // Trailing nodes with large norm carry the asymptote: 1/norm is close to
  // linear in t there.  The fit runs in coordinates shifted to the last
  // node; node times cluster so tightly near the pole that unshifted
  // moment sums would cancel catastrophically.
  std::size_t i0 = traj.nodes.size();
  while (i0 > 0 && traj.nodes[i0 - 1].K.norm() >= opt.fit_norm &&
         traj.nodes.size() - i0 < 12)
    --i0;
  if (traj.nodes.size() - i0 < 2)
    i0 = traj.nodes.size() >= 4 ? traj.nodes.size() - 4 : 0;
  const double t_last = traj.nodes.back().t;
  double su = 0.0, sy = 0.0, suu = 0.0, suy = 0.0;
  const double nfit = double(traj.nodes.size() - i0);
  for (std::size_t i = i0; i < traj.nodes.size(); ++i) {
    const double ui = traj.nodes[i].t - t_last;
    const double yi = 1.0 / traj.nodes[i].K.norm();
    su += ui;
    sy += yi;
    suu += ui * ui;
    suy += ui * yi;
  }
  const double ubar = su / nfit, ybar = sy / nfit;
  const double var = suu / nfit - ubar * ubar;
  const double cov = suy / nfit - ubar * ybar;
  double t_star = t_last;
  if (var > 0.0) {
    const double beta = cov / var;
    if (beta > 0.0) {
      const double alpha = ybar - beta * ubar;
      t_star = t_last + std::min(-alpha / beta, 0.0);
    }
  }
  out.t_star = t_star;
  const double half = 0.5e-7 * std::max(std::abs(terminal_t), 1e-3);
  out.bracket_lo = t_star - half;
  out.bracket_hi = std::min(t_star + half, terminal_t);
  return out;
}

// ---------------------------------------------------------------------------
// Closed-form growth bound for the weighted family
// ---------------------------------------------------------------------------

// Scalar comparison bound k1(t) with
//   A = sup||H11|| + (varrho^2/delta)(sup||H13||^2 + sup||H14||^2),
//   B = sup||H12|| + (varrho^2/delta)(sup||H13|| sup||H23|| +
//                                     sup||H14|| sup||H24||),
// giving k1(t) = (A/2B)(e^{2B(T-t)} - 1), degenerating to A (T - t) at B=0.
inline double closed_form_k1(const HamiltonianSpec& s, double varrho,
                             double t) {
  const auto knots = s.H.partition();
  auto supnorm = [&](int k, int l) {
    return detail::scan_max(
               [&](double u) { return s.H.block_clamped(k, l, u).norm(); },
               knots, 256)
        .first;
  };
  if (!(s.delta > 0.0))
    throw PreconditionError("delta must be positive for the growth bound");
  const double w2 = varrho * varrho;
  const double A =
      supnorm(1, 1) + (w2 / s.delta) * (std::pow(supnorm(1, 3), 2) +
                                        std::pow(supnorm(1, 4), 2));
  const double B =
      supnorm(1, 2) + (w2 / s.delta) * (supnorm(1, 3) * supnorm(2, 3) +
                                        supnorm(1, 4) * supnorm(2, 4));
  const double span = s.H.T() - t;
  if (B <= 1e-14) return A * span;
  return (A / (2.0 * B)) * std::expm1(2.0 * B * span);
}

// Pointwise resolvent dominance inequality along a trajectory:
//   (I - K Hrr)^T (I - K Hrr) >= c (H1r + K H2r)^T (H1r + K H2r), r in {3,4}.
inline bool check_weaker_condition(const RiccatiTrajectory& traj,
                                   const HamiltonianSpec& s, double c) {
  const int n = s.H.n();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  for (const auto& node : traj.nodes) {
    for (int r : {3, 4}) {
      Eigen::MatrixXd left = I - node.K * s.H.block_clamped(r, r, node.t);
      Eigen::MatrixXd right = s.H.block_clamped(1, r, node.t) +
                              node.K * s.H.block_clamped(2, r, node.t);
      Eigen::MatrixXd M =
          left.transpose() * left - c * right.transpose() * right;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
          0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < -1e-8) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Inverse-variable continuation across blow-ups
// ---------------------------------------------------------------------------

struct ContinuationPath {
  struct Eval {
    Eigen::MatrixXd K;
    Family family;
  };

  std::vector<RiccatiTrajectory> segments;

  Eval value(double t) const {
    for (const auto& seg : segments) {
      if (seg.nodes.empty()) continue;
      const double slack = 1e-9 * (1.0 + std::abs(t));
      if (t >= seg.t_min() - slack && t <= seg.t_max() + slack)
        return {seg.value(t), seg.family};
    }
    throw DomainError("time not covered by the continuation path");
  }
};

// Integrates the primal variable backward from (terminal_t, K_end); when
// the running norm reaches the switch threshold the variable is inverted
// and integration continues in the other family, gluing segments at the
// switch times until stop_t is reached.
inline ContinuationPath integrate_switched(const HamiltonianSpec& s,
                                           Pattern pattern, double param,
                                           double terminal_t,
                                           const Eigen::MatrixXd& K_end,
                                           double stop_t,
                                           const IntegrateOptions& opt) {
  const int n = s.H.n();
  if (K_end.rows() != n || K_end.cols() != n)
    throw InputError("terminal value dimension does not match the problem");
  ContinuationPath path;
  Family family = Family::primal;
  double t = terminal_t;
  Eigen::MatrixXd K = K_end;
  for (int seg = 0; seg < 64; ++seg) {
    EffectiveField E = EffectiveField::make(s, pattern, family, param);
    auto f = [&](double u, const Eigen::MatrixXd& X) -> Eigen::MatrixXd {
      return -riccati_rhs(X, E, u);
    };
    RiccatiTrajectory traj = detail::dp54_integrate(
        f, family, n, t, K, stop_t, opt, opt.switch_threshold, E);
    const bool reached = traj.stop == StopReason::reached_end;
    if (!reached) traj.stop = StopReason::switched;
    path.segments.push_back(traj);
    if (reached) return path;
    const TrajNode& last = path.segments.back().nodes.back();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(last.K);
    if (!lu.isInvertible() || lu.rcond() < 1e-12)
      throw SingularError("value is singular at a continuation switch");
    K = lu.inverse();
    K = 0.5 * (K + K.transpose());
    t = last.t;
    family = family == Family::primal ? Family::dual : Family::primal;
  }
  throw NumericalError("continuation exceeded the segment budget");
}

}  // namespace hameig

#endif  // HAMEIG_RICCATI_HPP
