#ifndef HAMEIG_PIECEWISE_HPP
#define HAMEIG_PIECEWISE_HPP

// Matrix-valued piecewise polynomials in time.
//
// A piece holds coefficients in the local basis (t - t0)^i, which keeps the
// numbers well scaled no matter where the piece sits on the time axis.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "hameig/errors.hpp"

namespace hameig {

struct PolyPiece {
  double t0 = 0.0;
  double t1 = 0.0;
  std::vector<Eigen::MatrixXd> coeffs;  // value = sum_i coeffs[i] * (t - t0)^i
};

class PiecewiseMatrix {
 public:
  PiecewiseMatrix() = default;

  explicit PiecewiseMatrix(std::vector<PolyPiece> pieces)
      : pieces_(std::move(pieces)) {
    if (pieces_.empty())
      throw ConfigError("piecewise matrix needs at least one piece");
    for (const auto& p : pieces_) {
      if (!(p.t0 < p.t1))
        throw ConfigError("piece has an empty or reversed time span");
      if (p.coeffs.empty())
        throw ConfigError("piece has no polynomial coefficients");
      for (const auto& c : p.coeffs) {
        if (c.rows() == 0 || c.cols() == 0)
          throw ConfigError("piece coefficient matrix is empty");
        if (c.rows() != pieces_.front().coeffs.front().rows() ||
            c.cols() != pieces_.front().coeffs.front().cols())
          throw ConfigError("coefficient dimensions differ between pieces");
      }
    }
    std::sort(pieces_.begin(), pieces_.end(),
              [](const PolyPiece& a, const PolyPiece& b) { return a.t0 < b.t0; });
    for (std::size_t i = 1; i < pieces_.size(); ++i) {
      const double gap = pieces_[i].t0 - pieces_[i - 1].t1;
      const double scale = 1.0 + std::abs(pieces_[i].t0);
      if (std::abs(gap) > 1e-12 * scale)
        throw ConfigError(gap > 0 ? "gap between consecutive pieces"
                                  : "overlapping pieces");
    }
  }

  static PiecewiseMatrix constant(const Eigen::MatrixXd& value, double t0,
                                  double t1) {
    return PiecewiseMatrix({PolyPiece{t0, t1, {value}}});
  }

  double t_begin() const { return pieces_.front().t0; }
  double t_end() const { return pieces_.back().t1; }
  Eigen::Index rows() const { return pieces_.front().coeffs.front().rows(); }
  Eigen::Index cols() const { return pieces_.front().coeffs.front().cols(); }
  const std::vector<PolyPiece>& pieces() const { return pieces_; }

  // Strict evaluation; throws DomainError outside [t_begin, t_end].
  Eigen::MatrixXd value(double t) const {
    if (pieces_.empty()) throw DomainError("evaluating an empty piecewise matrix");
    if (t < t_begin() || t > t_end())
      throw DomainError("time outside the matrix's interval");
    return eval_piece(locate(t), t);
  }

  // Extends by the endpoint values outside the interval.
  Eigen::MatrixXd value_clamped(double t) const {
    if (pieces_.empty()) throw DomainError("evaluating an empty piecewise matrix");
    if (t < t_begin()) t = t_begin();
    if (t > t_end()) t = t_end();
    return eval_piece(locate(t), t);
  }

  // Clamped evaluation of the (0, 0) entry without a matrix temporary.
  double value1_clamped(double t) const {
    if (pieces_.empty()) throw DomainError("evaluating an empty piecewise matrix");
    if (t < t_begin()) t = t_begin();
    if (t > t_end()) t = t_end();
    const PolyPiece& p = pieces_[locate(t)];
    const double s = t - p.t0;
    double v = p.coeffs.back()(0, 0);
    for (std::size_t i = p.coeffs.size() - 1; i-- > 0;)
      v = v * s + p.coeffs[i](0, 0);
    return v;
  }

 private:
  // Pieces are half-open [t0, t1) except the last, which owns its right end.
  std::size_t locate(double t) const {
    std::size_t lo = 0, hi = pieces_.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (t < pieces_[mid].t1)
        hi = mid;
      else
        lo = mid + 1;
    }
    return lo;
  }

  Eigen::MatrixXd eval_piece(std::size_t idx, double t) const {
    const PolyPiece& p = pieces_[idx];
    const double s = t - p.t0;
    Eigen::MatrixXd acc = p.coeffs.back();
    for (std::size_t i = p.coeffs.size() - 1; i-- > 0;)
      acc = (acc * s + p.coeffs[i]).eval();
    return acc;
  }

  std::vector<PolyPiece> pieces_;
};

}  // namespace hameig

#endif  // HAMEIG_PIECEWISE_HPP
