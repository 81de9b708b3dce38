// Block-structured Hamiltonian coefficient fields and the structural and
// sign checks that gate the solvers.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hameig/errors.hpp"
#include "hameig/piecewise.hpp"

namespace hameig {

// Symmetric 4n x 4n coefficient matrix stored as upper-triangle blocks
// H(k,l), 1 <= k <= l <= 4, each an n x n piecewise polynomial on [0, T].
// The two noise blocks never couple: (3,4) is identically zero and cannot
// be assigned.  Lower blocks are transposes of the stored ones.
class CoefficientField {
 public:
  CoefficientField() = default;

  CoefficientField(int n, double T) : n_(n), T_(T) {
    if (n < 1) throw ConfigError("state dimension must be at least 1");
    if (!(T > 0.0)) throw ConfigError("time horizon must be positive");
  }

  int n() const { return n_; }
  double T() const { return T_; }

  void set_block(int k, int l, PiecewiseMatrix block) {
    require_ready();
    check_upper_indices(k, l);
    if (block.rows() != n_ || block.cols() != n_)
      throw ConfigError("block size does not match the state dimension");
    if (std::abs(block.t_begin()) > 1e-9 * std::max(1.0, T_) ||
        std::abs(block.t_end() - T_) > 1e-9 * std::max(1.0, T_))
      throw ConfigError("block pieces must cover exactly [0, T]");
    if (k == l) {
      for (const auto& p : block.pieces())
        for (const auto& c : p.coeffs) {
          const double scale = 1.0 + c.cwiseAbs().maxCoeff();
          if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw ConfigError("diagonal blocks must be symmetric");
        }
    }
    blocks_[slot(k, l)] = std::move(block);
  }

  bool has_block(int k, int l) const {
    if (k > l) std::swap(k, l);
    return k >= 1 && l <= 4 && !(k == 3 && l == 4) &&
           blocks_[slot(k, l)].has_value();
  }

  // Stored upper-triangle piece data; nullptr when the block was never set.
  const PiecewiseMatrix* stored(int k, int l) const {
    if (k > l) std::swap(k, l);
    if (k < 1 || l > 4 || (k == 3 && l == 4)) return nullptr;
    const auto& opt = blocks_[slot(k, l)];
    return opt ? &*opt : nullptr;
  }

  Eigen::MatrixXd block(int k, int l, double t) const {
    require_ready();
    if (t < 0.0 || t > T_)
      throw DomainError("time outside the field's interval");
    return block_at(k, l, t, false);
  }

  // Extends by endpoint values; used where integrators may poke a hair
  // outside [0, T].
  Eigen::MatrixXd block_clamped(int k, int l, double t) const {
    require_ready();
    return block_at(k, l, t, true);
  }

  // Clamped scalar-system evaluation (n == 1) without a matrix temporary.
  double block1_clamped(int k, int l, double t) const {
    const PiecewiseMatrix* p = stored(k, l);
    return p ? p->value1_clamped(t) : 0.0;
  }

  Eigen::MatrixXd evaluate(double t) const {
    require_ready();
    if (t < 0.0 || t > T_)
      throw DomainError("time outside the field's interval");
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(4 * n_, 4 * n_);
    for (int k = 1; k <= 4; ++k) {
      for (int l = k; l <= 4; ++l) {
        if (k == 3 && l == 4) continue;
        Eigen::MatrixXd B = block_at(k, l, t, false);
        G.block((k - 1) * n_, (l - 1) * n_, n_, n_) = B;
        if (k != l)
          G.block((l - 1) * n_, (k - 1) * n_, n_, n_) = B.transpose();
      }
    }
    return G;
  }

  // Sorted, deduplicated piece boundaries of all stored blocks plus {0, T}.
  std::vector<double> partition() const {
    require_ready();
    std::vector<double> knots{0.0, T_};
    for (const auto& opt : blocks_) {
      if (!opt) continue;
      for (const auto& p : opt->pieces()) {
        knots.push_back(p.t0);
        knots.push_back(p.t1);
      }
    }
    std::sort(knots.begin(), knots.end());
    std::vector<double> out;
    for (double v : knots) {
      if (v < -1e-12 || v > T_ + 1e-12 * std::max(1.0, T_)) continue;
      if (out.empty() || v - out.back() > 1e-12 * (1.0 + std::abs(v)))
        out.push_back(v);
    }
    return out;
  }

 private:
  void require_ready() const {
    if (n_ < 1) throw ConfigError("coefficient field is not initialized");
  }

  static void check_upper_indices(int k, int l) {
    if (k < 1 || k > 4 || l < 1 || l > 4)
      throw ConfigError("block indices must lie in 1..4");
    if (k > l)
      throw ConfigError("assign upper-triangle blocks only; lower blocks "
                        "mirror them");
    if (k == 3 && l == 4)
      throw ConfigError("block (3,4) is structurally zero");
  }

  static int slot(int k, int l) { return (k - 1) * 4 + (l - 1); }

  Eigen::MatrixXd block_at(int k, int l, double t, bool clamped) const {
    if (k > l) return block_at(l, k, t, clamped).transpose();
    if (k < 1 || l > 4) throw ConfigError("block indices must lie in 1..4");
    if (k == 3 && l == 4) return Eigen::MatrixXd::Zero(n_, n_);
    const auto& opt = blocks_[slot(k, l)];
    if (!opt) return Eigen::MatrixXd::Zero(n_, n_);
    return clamped ? opt->value_clamped(t) : opt->value(t);
  }

  int n_ = 0;
  double T_ = 0.0;
  std::array<std::optional<PiecewiseMatrix>, 16> blocks_;
};

// Full problem description: base field, perturbation direction, monotonicity
// threshold, noise-diagonal bracket [-delta1, -delta], and the generator of
// the modulating chain.
struct HamiltonianSpec {
  CoefficientField H;
  CoefficientField Hbar;
  double beta = 0.0;
  double delta = 0.0;
  double delta1 = 0.0;
  Eigen::MatrixXd Q;
};

// ---------------------------------------------------------------------------
// Scanning helpers: sampled extrema over the piece partition with
// golden-section refinement around the best sample.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> spec_knots(const HamiltonianSpec& s) {
  std::vector<double> knots = s.H.partition();
  if (s.Hbar.n() > 0) {
    auto more = s.Hbar.partition();
    knots.insert(knots.end(), more.begin(), more.end());
    std::sort(knots.begin(), knots.end());
    std::vector<double> out;
    for (double v : knots)
      if (out.empty() || v - out.back() > 1e-12 * (1.0 + std::abs(v)))
        out.push_back(v);
    return out;
  }
  return knots;
}

template <class F>
std::pair<double, double> scan_max(F&& f, const std::vector<double>& knots,
                                   int per_cell) {
  double best = -std::numeric_limits<double>::infinity();
  double best_t = knots.front();
  double best_lo = knots.front(), best_hi = knots.back();
  for (std::size_t c = 0; c + 1 < knots.size(); ++c) {
    const double a = knots[c], b = knots[c + 1];
    for (int i = 0; i <= per_cell; ++i) {
      const double t = a + (b - a) * i / per_cell;
      const double v = f(t);
      if (v > best) {
        best = v;
        best_t = t;
        const double h = (b - a) / per_cell;
        best_lo = std::max(a, t - h);
        best_hi = std::min(b, t + h);
      }
    }
  }
  // Golden-section polish inside the sample cell that held the best value.
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = best_lo, b = best_hi;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 90 && (b - a) > 1e-15 * (1.0 + std::abs(a)); ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(d);
    }
  }
  const double tm = 0.5 * (a + b);
  const double fm = f(tm);
  if (fm > best) {
    best = fm;
    best_t = tm;
  }
  return {best, best_t};
}

template <class F>
std::pair<double, double> scan_min(F&& f, const std::vector<double>& knots,
                                   int per_cell) {
  auto [v, t] = scan_max([&](double x) { return -f(x); }, knots, per_cell);
  return {-v, t};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Structural validation
// ---------------------------------------------------------------------------

inline std::vector<std::string> validate_generator(const Eigen::MatrixXd& Q) {
  std::vector<std::string> warnings;
  if (Q.rows() == 0 || Q.rows() != Q.cols())
    throw ConfigError("generator must be a nonempty square matrix");
  const double scale = 1.0 + Q.cwiseAbs().maxCoeff();
  for (int i = 0; i < Q.rows(); ++i) {
    double row = 0.0;
    for (int j = 0; j < Q.cols(); ++j) {
      if (i != j && Q(i, j) < -1e-12 * scale)
        throw ConfigError("generator has a negative off-diagonal rate");
      row += Q(i, j);
    }
    if (std::abs(row) > 1e-9 * scale)
      throw ConfigError("generator row does not sum to zero");
  }
  if (Q.cwiseAbs().maxCoeff() == 0.0)
    warnings.push_back("generator is identically zero; the chain never jumps");
  return warnings;
}

inline std::vector<std::string> validate_structure(const HamiltonianSpec& s) {
  std::vector<std::string> warnings;
  if (s.H.n() < 1) throw ConfigError("base coefficient field is empty");
  if (!(s.delta > 0.0)) throw ConfigError("delta must be positive");
  if (!(s.delta1 >= s.delta))
    throw ConfigError("delta1 must be at least delta");
  if (s.Hbar.n() > 0) {
    if (s.Hbar.n() != s.H.n() ||
        std::abs(s.Hbar.T() - s.H.T()) > 1e-9 * std::max(1.0, s.H.T()))
      throw ConfigError("perturbation field does not match the base field");
  } else {
    warnings.push_back("no perturbation blocks provided; the shifted family "
                       "reduces to the base field");
  }
  auto qw = validate_generator(s.Q);
  warnings.insert(warnings.end(), qw.begin(), qw.end());
  if (s.beta <= 0.0)
    warnings.push_back("monotonicity threshold beta is not positive");
  return warnings;
}

// Result of a pointwise-in-time inequality scan.
struct BracketReport {
  bool satisfied = false;
  double margin = 0.0;   // worst slack; negative when violated
  double worst_t = 0.0;  // time attaining the worst slack
};

// All eigenvalues of -H33(t) and -H44(t) must stay inside [delta, delta1].
inline BracketReport check_delta_bracket(const HamiltonianSpec& s) {
  const auto knots = s.H.partition();
  auto slack = [&](double t) {
    double m = std::numeric_limits<double>::infinity();
    for (int k : {3, 4}) {
      Eigen::MatrixXd B = -s.H.block_clamped(k, k, t);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B,
                                                        Eigen::EigenvaluesOnly);
      for (int i = 0; i < B.rows(); ++i) {
        const double lam = es.eigenvalues()(i);
        m = std::min(m, std::min(lam - s.delta, s.delta1 - lam));
      }
    }
    return m;
  };
  auto [margin, t] = detail::scan_min(slack, knots, 512);
  BracketReport rep;
  rep.margin = margin;
  rep.worst_t = t;
  rep.satisfied = margin >= -1e-12;
  return rep;
}

// Report for the signed-row negativity check of G = H + rho * Hbar.
struct ConditionReport {
  bool satisfied = false;
  double margin = 0.0;      // -beta - lambda_max
  double lambda_max = 0.0;  // largest eigenvalue of the symmetrized part
  double worst_t = 0.0;
  bool schur_state_ok = false;
  bool schur_costate_ok = false;
};

namespace detail {

inline Eigen::MatrixXd signed_symmetrized(const HamiltonianSpec& s, double rho,
                                          double t) {
  const int n = s.H.n();
  Eigen::MatrixXd G = s.H.evaluate(t);
  if (s.Hbar.n() > 0 && rho != 0.0) G += rho * s.Hbar.evaluate(t);
  Eigen::MatrixXd M = G;
  M.topRows(n) = -G.topRows(n);
  return 0.5 * (M + M.transpose());
}

}  // namespace detail

// Checks lambda_max((M + M^T)/2) <= -beta on [0, T], where M is
// G = H + rho*Hbar with its first block row negated.  The Schur flags report
// the necessary block conditions of -(S + beta I) >= 0 at the worst time;
// when the state block is numerically singular the complement test falls
// back to the overall verdict.
inline ConditionReport check_monotonicity(const HamiltonianSpec& s,
                                          double rho) {
  if (s.H.n() < 1) throw ConfigError("base coefficient field is empty");
  const int n = s.H.n();
  const auto knots = detail::spec_knots(s);
  auto lmax = [&](double t) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        detail::signed_symmetrized(s, rho, t), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
  };
  auto [lam, tw] = detail::scan_max(lmax, knots, 1024);
  ConditionReport rep;
  rep.lambda_max = lam;
  rep.worst_t = tw;
  rep.margin = -s.beta - lam;
  rep.satisfied = rep.margin >= -1e-12;

  Eigen::MatrixXd A = -(detail::signed_symmetrized(s, rho, tw) +
                        s.beta * Eigen::MatrixXd::Identity(4 * n, 4 * n));
  const double tol = 1e-10 * (1.0 + A.norm());
  Eigen::MatrixXd A11 = A.topLeftCorner(n, n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es11(A11);
  rep.schur_state_ok = es11.eigenvalues().minCoeff() >= -tol;
  if (es11.eigenvalues().minCoeff() > 1e-8 * (1.0 + A.norm())) {
    Eigen::MatrixXd A12 = A.topRightCorner(n, 3 * n);
    Eigen::MatrixXd A22 = A.bottomRightCorner(3 * n, 3 * n);
    Eigen::MatrixXd C = A22 - A12.transpose() * A11.ldlt().solve(A12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esc(
        C, Eigen::EigenvaluesOnly);
    rep.schur_costate_ok = esc.eigenvalues().minCoeff() >= -tol;
  } else {
    // State block too close to singular for a meaningful complement.
    rep.schur_costate_ok = rep.satisfied;
  }
  return rep;
}

// Structural coupling identities for scalar systems:
//   H23 = -H33 H13 and H24 = -H44 H14 pointwise, with a strictly negative
//   perturbation of the co-state cost.
struct H4Report {
  bool holds = false;
  double defect = 0.0;           // worst pointwise identity violation
  double first_violation_t = 0.0;
  ConditionReport mono_at_zero;  // informational companion check at rho = 0
};

inline H4Report check_H4(const HamiltonianSpec& s) {
  if (s.H.n() != 1)
    throw InputError("the coupling identity check applies to scalar systems");
  const auto knots = detail::spec_knots(s);
  auto defect = [&](double t) {
    const double d3 = s.H.block_clamped(2, 3, t)(0, 0) +
                      s.H.block_clamped(3, 3, t)(0, 0) *
                          s.H.block_clamped(1, 3, t)(0, 0);
    const double d4 = s.H.block_clamped(2, 4, t)(0, 0) +
                      s.H.block_clamped(4, 4, t)(0, 0) *
                          s.H.block_clamped(1, 4, t)(0, 0);
    return std::max(std::abs(d3), std::abs(d4));
  };
  H4Report rep;
  auto [worst, tw] = detail::scan_max(defect, knots, 512);
  rep.defect = worst;
  rep.first_violation_t = std::numeric_limits<double>::infinity();
  if (worst > 1e-9) {
    for (std::size_t c = 0; c + 1 < knots.size() &&
                            !std::isfinite(rep.first_violation_t);
         ++c) {
      for (int i = 0; i <= 512; ++i) {
        const double t = knots[c] + (knots[c + 1] - knots[c]) * i / 512.0;
        if (defect(t) > 1e-9) {
          rep.first_violation_t = t;
          break;
        }
      }
    }
    if (!std::isfinite(rep.first_violation_t)) rep.first_violation_t = tw;
  }
  auto hbar22 = [&](double t) {
    return s.Hbar.n() > 0 ? s.Hbar.block_clamped(2, 2, t)(0, 0) : 0.0;
  };
  auto [hb, hbt] = detail::scan_max(hbar22, knots, 512);
  (void)hbt;
  rep.holds = rep.defect <= 1e-9 && hb < 0.0;
  rep.mono_at_zero = check_monotonicity(s, 0.0);
  return rep;
}

// Threshold parameter for scalar systems:
//   rho_b = min_t [H22 - H33 H13^2 - H44 H14^2] / max_t Hbar22.
// Requires max_t Hbar22 < 0.
inline double compute_rho_b(const HamiltonianSpec& s) {
  if (s.H.n() != 1)
    throw InputError("the threshold parameter applies to scalar systems");
  const auto knots = detail::spec_knots(s);
  auto bracket = [&](double t) {
    const double h13 = s.H.block_clamped(1, 3, t)(0, 0);
    const double h14 = s.H.block_clamped(1, 4, t)(0, 0);
    return s.H.block_clamped(2, 2, t)(0, 0) -
           s.H.block_clamped(3, 3, t)(0, 0) * h13 * h13 -
           s.H.block_clamped(4, 4, t)(0, 0) * h14 * h14;
  };
  auto [num, tn] = detail::scan_min(bracket, knots, 512);
  (void)tn;
  auto hbar22 = [&](double t) {
    return s.Hbar.n() > 0 ? s.Hbar.block_clamped(2, 2, t)(0, 0) : 0.0;
  };
  auto [den, td] = detail::scan_max(hbar22, knots, 512);
  (void)td;
  if (!(den < 0.0))
    throw PreconditionError(
        "perturbation of the co-state cost must stay strictly negative");
  return num / den;
}

// ---------------------------------------------------------------------------
// Dual (inverse-variable) coefficient transform
// ---------------------------------------------------------------------------

namespace detail {

struct DualUpper {
  Eigen::MatrixXd d11, d12, d13, d14, d22, d23, d24, d33, d44;
};

inline Eigen::MatrixXd inverse_or_throw(const Eigen::MatrixXd& B) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
  if (!lu.isInvertible() || lu.rcond() < 1e-12)
    throw SingularError("noise diagonal block is singular");
  Eigen::MatrixXd inv = lu.inverse();
  return 0.5 * (inv + inv.transpose());
}

// Pointwise dual blocks of a base field whose co-state cost was already
// shifted if needed; w is the coupling weight.
inline DualUpper dual_upper_at(const CoefficientField& H, double w, double t,
                               const Eigen::MatrixXd* shifted22 = nullptr) {
  const Eigen::MatrixXd inv33 = inverse_or_throw(H.block_clamped(3, 3, t));
  const Eigen::MatrixXd inv44 = inverse_or_throw(H.block_clamped(4, 4, t));
  const Eigen::MatrixXd H11 = H.block_clamped(1, 1, t);
  const Eigen::MatrixXd H12 = H.block_clamped(1, 2, t);
  const Eigen::MatrixXd H13 = H.block_clamped(1, 3, t);
  const Eigen::MatrixXd H14 = H.block_clamped(1, 4, t);
  const Eigen::MatrixXd H22 =
      shifted22 ? *shifted22 : H.block_clamped(2, 2, t);
  const Eigen::MatrixXd H23 = H.block_clamped(2, 3, t);
  const Eigen::MatrixXd H24 = H.block_clamped(2, 4, t);
  const double w2 = w * w;
  DualUpper d;
  d.d11 = w2 * (H23 * inv33 * H23.transpose() + H24 * inv44 * H24.transpose()) -
          w * H22;
  d.d12 = w2 * (H23 * inv33 * H13.transpose() + H24 * inv44 * H14.transpose()) -
          H12.transpose();
  d.d13 = -w * (H23 * inv33);
  d.d14 = -w * (H24 * inv44);
  d.d22 = w2 * (H13 * inv33 * H13.transpose() + H14 * inv44 * H14.transpose()) -
          H11;
  d.d23 = -w * (H13 * inv33);
  d.d24 = -w * (H14 * inv44);
  d.d33 = inv33;
  d.d44 = inv44;
  d.d11 = (0.5 * (d.d11 + d.d11.transpose())).eval();
  d.d22 = (0.5 * (d.d22 + d.d22.transpose())).eval();
  return d;
}

inline const Eigen::MatrixXd& dual_entry(const DualUpper& d, int k, int l) {
  if (k == 1 && l == 1) return d.d11;
  if (k == 1 && l == 2) return d.d12;
  if (k == 1 && l == 3) return d.d13;
  if (k == 1 && l == 4) return d.d14;
  if (k == 2 && l == 2) return d.d22;
  if (k == 2 && l == 3) return d.d23;
  if (k == 2 && l == 4) return d.d24;
  if (k == 3 && l == 3) return d.d33;
  return d.d44;
}

}  // namespace detail

// Transformed coefficient field of the inverse-variable equation.  The noise
// diagonals are inverted pointwise and every transformed entry is refit as a
// piecewise polynomial on the source partition via degree-`degree`
// Chebyshev-Lobatto interpolation in a normalized local variable.  Throws
// SingularError when a noise diagonal is singular or changes determinant
// sign anywhere on [0, T].
inline CoefficientField dual_field(const CoefficientField& H, double varrho,
                                   int degree = 6) {
  if (H.n() < 1) throw ConfigError("coefficient field is not initialized");
  if (degree < 1) throw InputError("interpolation degree must be positive");
  const int n = H.n();
  const auto knots = H.partition();

  // Reject singular or sign-crossing noise diagonals before fitting.
  for (int k : {3, 4}) {
    double prev = 0.0;
    bool have_prev = false;
    for (std::size_t c = 0; c + 1 < knots.size(); ++c) {
      for (int i = 0; i <= 256; ++i) {
        const double t = knots[c] + (knots[c + 1] - knots[c]) * i / 256.0;
        Eigen::MatrixXd B = H.block_clamped(k, k, t);
        const double det = B.determinant();
        const double scale = std::pow(1.0 + B.cwiseAbs().maxCoeff(), n);
        if (std::abs(det) <= 1e-12 * scale)
          throw SingularError("noise diagonal block is singular on [0, T]");
        if (have_prev && det * prev < 0.0)
          throw SingularError(
              "noise diagonal block changes sign inside [0, T]");
        prev = det;
        have_prev = true;
      }
    }
  }

  // Chebyshev-Lobatto nodes and Vandermonde system on [0, 1].
  const int m = degree + 1;
  Eigen::VectorXd sn(m);
  for (int j = 0; j < m; ++j)
    sn(j) = 0.5 * (1.0 - std::cos(M_PI * j / degree));
  Eigen::MatrixXd V(m, m);
  for (int j = 0; j < m; ++j) {
    double p = 1.0;
    for (int i = 0; i < m; ++i) {
      V(j, i) = p;
      p *= sn(j);
    }
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> vlu(V);

  CoefficientField out(n, H.T());
  std::vector<std::vector<detail::DualUpper>> nodes(knots.size() - 1);
  for (std::size_t c = 0; c + 1 < knots.size(); ++c) {
    nodes[c].reserve(m);
    for (int j = 0; j < m; ++j) {
      const double t = knots[c] + (knots[c + 1] - knots[c]) * sn(j);
      nodes[c].push_back(detail::dual_upper_at(H, varrho, t));
    }
  }
  for (int k = 1; k <= 4; ++k) {
    for (int l = k; l <= 4; ++l) {
      if (k == 3 && l == 4) continue;
      std::vector<PolyPiece> pieces;
      for (std::size_t c = 0; c + 1 < knots.size(); ++c) {
        const double a = knots[c], b = knots[c + 1];
        std::vector<Eigen::MatrixXd> coeffs(m, Eigen::MatrixXd::Zero(n, n));
        Eigen::VectorXd rhs(m);
        for (int r = 0; r < n; ++r) {
          for (int cc = 0; cc < n; ++cc) {
            for (int j = 0; j < m; ++j)
              rhs(j) = detail::dual_entry(nodes[c][j], k, l)(r, cc);
            Eigen::VectorXd sol = vlu.solve(rhs);
            double scale = 1.0;
            for (int i = 0; i < m; ++i) {
              coeffs[i](r, cc) = sol(i) / scale;
              scale *= (b - a);
            }
          }
        }
        pieces.push_back(PolyPiece{a, b, std::move(coeffs)});
      }
      out.set_block(k, l, PiecewiseMatrix(std::move(pieces)));
    }
  }
  return out;
}

inline CoefficientField dual_transform(const HamiltonianSpec& s, double varrho,
                                       int degree = 6) {
  return dual_field(s.H, varrho, degree);
}

}  // namespace hameig
