#ifndef HAMEIG_SPECTRUM_HPP
#define HAMEIG_SPECTRUM_HPP

// Spectral solvers: chains of alternating escape times, eigenvalue location
// by bisection on the chain, the multidimensional first eigenvalue with its
// kernel directions, quiet-zone certification, growth-order fitting, and
// the piecewise gain schedule used by the eigenfunction simulation.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "hameig/coefficients.hpp"
#include "hameig/errors.hpp"
#include "hameig/riccati.hpp"

namespace hameig {

struct ChainLink {
  double t = 0.0;
  Family family = Family::primal;
};

// Alternating chain of escape times for the shifted scalar equation,
// starting with the primal variable at (T, 0) and re-anchoring the opposite
// family at each escape.  Stops at the first negative link, after
// max_links, or when a link fails to escape the largest search window.
inline std::vector<ChainLink> blowup_chain_1d(const HamiltonianSpec& s,
                                              double rho,
                                              const IntegrateOptions& opt,
                                              int max_links) {
  if (s.H.n() != 1)
    throw InputError("escape chains require a scalar system");
  if (max_links < 1) throw InputError("max_links must be positive");
  if (!check_H4(s).holds)
    throw PreconditionError("coupling-compatibility condition fails");
  const double rho_b = compute_rho_b(s);
  if (!(rho > rho_b))
    throw PreconditionError("parameter must exceed the critical threshold");

  std::vector<ChainLink> chain;
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(1, 1);
  const double base = opt.window_margin > 0.0 ? opt.window_margin : 2.0;
  double anchor = s.H.T();
  Family fam = Family::primal;
  while (static_cast<int>(chain.size()) < max_links) {
    BlowUpResult r;
    bool found = false;
    for (double margin : {base, 2.0 * base, 4.0 * base, 8.0 * base}) {
      IntegrateOptions o = opt;
      o.window_margin = margin;
      r = blow_up_time(s, Pattern::hbar_shift, fam, rho, anchor, Z, o);
      if (r.blew_up) {
        found = true;
        break;
      }
    }
    if (!found) break;  // no escape within the largest window: truncate
    chain.push_back({r.t_star, fam});
    if (r.t_star < 0.0) break;
    anchor = r.t_star;
    fam = fam == Family::primal ? Family::dual : Family::primal;
  }
  return chain;
}

struct EigenvalueRecord {
  int m = 0;
  double rho = 0.0;
  double tolerance = 0.0;  // final bracket width
  Pattern pattern = Pattern::hbar_shift;
  std::vector<ChainLink> chain;
  Eigen::MatrixXd K0tilde;       // dual value at t = 0 (weighted path)
  Eigen::MatrixXd kernel_basis;  // columns spanning ker K0tilde
};

// m-th eigenvalue of the scalar problem: the parameter at which the
// (2m-1)-th escape time crosses zero, located by bisection from the
// critical threshold upward.
inline EigenvalueRecord eigenvalue_1d(const HamiltonianSpec& s, int m,
                                      double tol,
                                      const IntegrateOptions& opt) {
  if (m < 1) throw InputError("eigenvalue index must be positive");
  if (!(tol > 0.0)) throw InputError("tolerance must be positive");
  const int J = 2 * m - 1;
  auto g = [&](double rho) -> double {
    auto chain = blowup_chain_1d(s, rho, opt, J);
    if (static_cast<int>(chain.size()) < J)
      return -std::numeric_limits<double>::infinity();
    return chain[J - 1].t;
  };
  const double rho_b = compute_rho_b(s);
  double lo = rho_b;  // below every eigenvalue: treated as a negative probe
  double hi = rho_b + 1.0;
  int expansions = 0;
  while (g(hi) < 0.0) {
    lo = hi;
    hi = rho_b + 2.0 * (hi - rho_b);
    if (++expansions > 60)
      throw BracketError("no sign change while expanding the bracket");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  EigenvalueRecord rec;
  rec.m = m;
  rec.rho = 0.5 * (lo + hi);
  rec.tolerance = hi - lo;
  rec.pattern = Pattern::hbar_shift;
  rec.chain = blowup_chain_1d(s, rec.rho, opt, J);
  if (static_cast<int>(rec.chain.size()) != J)
    throw NumericalError("chain is incomplete at the located eigenvalue");
  return rec;
}

// First eigenvalue of the weighted multidimensional problem on a supplied
// bracket: bisection on "the primal variable escapes before time zero",
// then the kernel of the dual value at zero.
inline EigenvalueRecord first_eigenvalue_multidim(const HamiltonianSpec& s,
                                                  double lo, double hi,
                                                  double tol,
                                                  const IntegrateOptions& opt) {
  if (!(lo < hi)) throw InputError("bracket endpoints must be ordered");
  if (!(tol > 0.0)) throw InputError("tolerance must be positive");
  const int n = s.H.n();
  const double T = s.H.T();
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, n);
  auto escapes = [&](double rho) {
    auto r = blow_up_time(s, Pattern::varrho_scaling, Family::primal,
                          1.0 - rho, T, Z, opt);
    return r.blew_up && r.t_star > 0.0;
  };
  if (escapes(lo))
    throw BracketError("lower endpoint already escapes inside the horizon");
  if (!escapes(hi))
    throw BracketError("upper endpoint does not escape inside the horizon");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    (escapes(mid) ? hi : lo) = mid;
  }
  EigenvalueRecord rec;
  rec.m = 1;
  rec.rho = 0.5 * (lo + hi);
  rec.tolerance = hi - lo;
  rec.pattern = Pattern::varrho_scaling;
  auto fin = blow_up_time(s, Pattern::varrho_scaling, Family::primal,
                          1.0 - rec.rho, T, Z, opt);
  rec.chain.push_back({fin.blew_up ? fin.t_star : 0.0, Family::primal});

  ContinuationPath path = integrate_switched(
      s, Pattern::varrho_scaling, 1.0 - rec.rho, T, Z, 0.0, opt);
  ContinuationPath::Eval ev = path.value(0.0);
  Eigen::MatrixXd Kt;
  if (ev.family == Family::dual) {
    Kt = ev.K;
  } else {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(ev.K);
    if (!lu.isInvertible() || lu.rcond() < 1e-12)
      throw SingularError("primal value at zero is not invertible");
    Kt = lu.inverse();
  }
  Kt = 0.5 * (Kt + Kt.transpose());
  rec.K0tilde = Kt;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Kt);
  // The bisection certifies a sign change, so the smallest eigenvalue of
  // the dual value has crossed zero; its direction is always kept.  A
  // purely relative cut would discard it when n = 1.
  const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  const double lmin = es.eigenvalues().cwiseAbs().minCoeff();
  const double cut = std::max(1e-6 * lmax, 10.0 * lmin);
  std::vector<int> keep;
  for (int i = 0; i < n; ++i)
    if (std::abs(es.eigenvalues()(i)) <= cut) keep.push_back(i);
  rec.kernel_basis.resize(n, static_cast<int>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c)
    rec.kernel_basis.col(static_cast<int>(c)) = es.eigenvectors().col(keep[c]);
  return rec;
}

// ---------------------------------------------------------------------------
// Quiet zone below the critical threshold
// ---------------------------------------------------------------------------

struct H5Report {
  bool holds = false;
  double lhs = 0.0;  // 4 sup|H11| sup|shifted co-state cost at threshold|
  double mid = 0.0;  // squared sup of the linear-term coefficient
  double rhs = 0.0;  // 4 / T^2
};

// Smallness conditions that make the scalar equation globally solvable for
// every parameter up to the critical threshold.
inline H5Report check_H5(const HamiltonianSpec& s) {
  if (s.H.n() != 1)
    throw InputError("the smallness check requires a scalar system");
  const double rho_b = compute_rho_b(s);
  const auto knots = detail::spec_knots(s);
  auto h = [&](int k, int l, double t) { return s.H.block1_clamped(k, l, t); };
  const double sup_b =
      detail::scan_max([&](double t) { return std::abs(h(1, 1, t)); }, knots,
                       512)
          .first;
  const double sup_c =
      detail::scan_max(
          [&](double t) {
            const double h13 = h(1, 3, t), h14 = h(1, 4, t);
            const double hbar22 =
                s.Hbar.n() > 0 ? s.Hbar.block1_clamped(2, 2, t) : 0.0;
            return std::abs(h(2, 2, t) - rho_b * hbar22 -
                            h(3, 3, t) * h13 * h13 - h(4, 4, t) * h14 * h14);
          },
          knots, 512)
          .first;
  const double sup_a =
      detail::scan_max(
          [&](double t) {
            const double h13 = h(1, 3, t), h14 = h(1, 4, t);
            return std::abs(2.0 * h(1, 2, t) + h13 * h13 + h14 * h14);
          },
          knots, 512)
          .first;
  H5Report rep;
  rep.lhs = 4.0 * sup_b * sup_c;
  rep.mid = sup_a * sup_a;
  rep.rhs = 4.0 / (s.H.T() * s.H.T());
  rep.holds = rep.lhs <= rep.mid && rep.mid < rep.rhs;
  return rep;
}

// Certifies by sampling that no parameter below the critical threshold
// produces an escape inside [0, T].  Gated on the smallness conditions.
inline bool no_eigenvalue_below_rho_b(const HamiltonianSpec& s, int samples,
                                      const IntegrateOptions& opt) {
  if (samples < 1) throw InputError("sample count must be positive");
  if (!check_H5(s).holds)
    throw PreconditionError("smallness conditions fail; zone not certified");
  const double rho_b = compute_rho_b(s);
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(1, 1);
  for (int i = 1; i <= samples; ++i) {
    const double rho = rho_b * i / samples;
    auto r = blow_up_time(s, Pattern::hbar_shift, Family::primal, rho,
                          s.H.T(), Z, opt);
    if (r.blew_up && r.t_star >= 0.0) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Growth order of an eigenvalue sequence
// ---------------------------------------------------------------------------

struct GrowthFit {
  double slope = 0.0;
  double r2 = 0.0;
};

// Fits values_m ~ a + b m^s (profiled least squares over s), then reports
// the log-log slope of (values - a) against m.
inline GrowthFit growth_order_fit_values(const std::vector<int>& ms,
                                         const std::vector<double>& values) {
  const std::size_t N = ms.size();
  if (N != values.size())
    throw InputError("index and value sequences differ in length");
  if (N < 5) throw InputError("need at least five points to fit");
  if (ms.front() < 1) throw InputError("indices must be positive");
  for (std::size_t i = 0; i + 1 < N; ++i) {
    if (ms[i + 1] != ms[i] + 1)
      throw InputError("indices must be consecutive integers");
    if (!(values[i + 1] > values[i]))
      throw InputError("values must increase strictly");
  }

  // Profiled sum of squares: for fixed s the (a, b) fit is linear.
  auto profile = [&](double sexp, double* a_out, double* b_out) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double x = std::pow(double(ms[i]), sexp);
      sx += x;
      sy += values[i];
      sxx += x * x;
      sxy += x * values[i];
    }
    const double det = double(N) * sxx - sx * sx;
    const double b = (double(N) * sxy - sx * sy) / det;
    const double a = (sy - b * sx) / double(N);
    double sse = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double r = values[i] - a - b * std::pow(double(ms[i]), sexp);
      sse += r * r;
    }
    if (a_out) *a_out = a;
    if (b_out) *b_out = b;
    return sse;
  };

  const double s_lo = 0.25, s_hi = 5.0;
  const int grid = 64;
  double best_s = s_lo;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int j = 0; j < grid; ++j) {
    const double sexp = s_lo + (s_hi - s_lo) * j / (grid - 1);
    const double sse = profile(sexp, nullptr, nullptr);
    if (sse < best_sse) {
      best_sse = sse;
      best_s = sexp;
    }
  }
  const double step = (s_hi - s_lo) / (grid - 1);
  double lo = std::max(s_lo, best_s - step);
  double hi = std::min(s_hi, best_s + step);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
  double fc = profile(c, nullptr, nullptr), fd = profile(d, nullptr, nullptr);
  for (int it = 0; it < 90; ++it) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - gr * (hi - lo);
      fc = profile(c, nullptr, nullptr);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + gr * (hi - lo);
      fd = profile(d, nullptr, nullptr);
    }
  }
  best_s = 0.5 * (lo + hi);
  double a = 0.0, b = 0.0;
  const double sse = profile(best_s, &a, &b);
  double vbar = 0.0;
  for (double v : values) vbar += v;
  vbar /= double(N);
  double sstot = 0.0;
  for (double v : values) sstot += (v - vbar) * (v - vbar);

  // The offset must stay below every value for the logarithms to exist.
  const double vmin = values.front();
  const double vmax = values.back();
  const double gap = 1e-9 * (vmax - vmin + 1.0);
  if (a > vmin - gap) a = vmin - gap;

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double x = std::log(double(ms[i]));
    const double y = std::log(values[i] - a);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double varx = sxx / double(N) - (sx / double(N)) * (sx / double(N));
  const double cov = sxy / double(N) - (sx / double(N)) * (sy / double(N));
  GrowthFit fit;
  fit.slope = cov / varx;
  fit.r2 = sstot > 0.0 ? 1.0 - sse / sstot : 1.0;
  return fit;
}

// ---------------------------------------------------------------------------
// Gain schedule for the eigenfunction construction
// ---------------------------------------------------------------------------

// Partition of [0, T] into J+1 intervals spliced at the midpoints between
// consecutive chain times.  Each interval carries the family whose variable
// stays finite there, anchored at zero value on its chain time (or at the
// recorded dual value for the leftmost interval of a weighted record).
class GainSchedule {
 public:
  struct Interval {
    double t0 = 0.0;
    double t1 = 0.0;
    Family family = Family::primal;
    double anchor_t = 0.0;
    EffectiveField field;
    RiccatiTrajectory down;  // anchor -> t0
    RiccatiTrajectory up;    // anchor -> t1
  };

  std::vector<Interval> intervals;

  static GainSchedule build(const HamiltonianSpec& s,
                            const EigenvalueRecord& rec,
                            const IntegrateOptions& opt) {
    const int J = static_cast<int>(rec.chain.size());
    if (J < 1) throw InputError("eigenvalue record has an empty chain");
    const int n = s.H.n();
    const double T = s.H.T();
    std::vector<double> a(J);
    for (int j = 0; j < J; ++j) a[j] = rec.chain[J - 1 - j].t;
    if (std::abs(a[0]) <= 1e-6) a[0] = 0.0;
    for (int j = 0; j + 1 < J; ++j)
      if (!(a[j] < a[j + 1]))
        throw ScheduleError("chain times must increase strictly");
    if (!(a[J - 1] < T))
      throw ScheduleError("chain times must stay below the horizon");
    std::vector<double> splice(J);
    for (int j = 0; j < J; ++j)
      splice[j] = 0.5 * (a[j] + (j + 1 < J ? a[j + 1] : T));
    const double param = rec.pattern == Pattern::varrho_scaling
                             ? 1.0 - rec.rho
                             : rec.rho;
    GainSchedule sched;
    for (int j = 0; j <= J; ++j) {
      Interval iv;
      iv.family = (J - j) % 2 == 0 ? Family::primal : Family::dual;
      iv.t0 = j == 0 ? a[0] : splice[j - 1];
      iv.t1 = j == J ? T : splice[j];
      iv.anchor_t = j == J ? T : a[j];
      iv.field = EffectiveField::make(s, rec.pattern, iv.family, param);
      Eigen::MatrixXd K0 = Eigen::MatrixXd::Zero(n, n);
      if (j == 0 && rec.K0tilde.size() > 0) K0 = rec.K0tilde;
      iv.down = leg(iv.field, iv.anchor_t, K0, iv.t0, opt);
      iv.up = leg(iv.field, iv.anchor_t, K0, iv.t1, opt);
      sched.intervals.push_back(std::move(iv));
    }
    return sched;
  }

  Eigen::MatrixXd value(int j, double t) const {
    const Interval& iv = intervals.at(static_cast<std::size_t>(j));
    return t <= iv.anchor_t ? iv.down.value(t) : iv.up.value(t);
  }

 private:
  static RiccatiTrajectory leg(const EffectiveField& E, double from,
                               const Eigen::MatrixXd& K0, double to,
                               const IntegrateOptions& opt) {
    RiccatiTrajectory traj = integrate_riccati(E, from, K0, to, opt);
    if (traj.stop != StopReason::reached_end)
      throw ScheduleError("gain escaped inside its scheduled interval");
    return traj;
  }
};

}  // namespace hameig

#endif  // HAMEIG_SPECTRUM_HPP
