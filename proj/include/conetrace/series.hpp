#pragma once

// Truncated power series in one variable, used for Taylor jets of the mode
// trace in w = z^2.

#include <cmath>
#include <cstddef>
#include <vector>

#include "conetrace/errors.hpp"

namespace conetrace {

class Jet {
 public:
  explicit Jet(std::size_t order, double constant = 0.0) : c_(order + 1, 0.0) {
    c_[0] = constant;
  }

  static Jet variable(std::size_t order, double at) {
    Jet j(order, at);
    if (order >= 1) j.c_[1] = 1.0;
    return j;
  }

  std::size_t order() const { return c_.size() - 1; }
  double operator[](std::size_t i) const { return c_[i]; }
  double& operator[](std::size_t i) { return c_[i]; }

  friend Jet operator+(Jet a, const Jet& b) {
    for (std::size_t i = 0; i < a.c_.size(); ++i) a.c_[i] += b.c_[i];
    return a;
  }
  friend Jet operator-(Jet a, const Jet& b) {
    for (std::size_t i = 0; i < a.c_.size(); ++i) a.c_[i] -= b.c_[i];
    return a;
  }
  friend Jet operator*(double s, Jet a) {
    for (auto& v : a.c_) v *= s;
    return a;
  }
  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet out(a.order());
    for (std::size_t i = 0; i < a.c_.size(); ++i) {
      for (std::size_t k = 0; i + k < a.c_.size(); ++k) out.c_[i + k] += a.c_[i] * b.c_[k];
    }
    return out;
  }
  friend Jet operator/(const Jet& a, const Jet& b) {
    if (b.c_[0] == 0.0) throw DomainError("Jet: division by a series with zero constant term");
    Jet out(a.order());
    for (std::size_t n = 0; n < a.c_.size(); ++n) {
      double s = a.c_[n];
      for (std::size_t k = 1; k <= n; ++k) s -= b.c_[k] * out.c_[n - k];
      out.c_[n] = s / b.c_[0];
    }
    return out;
  }

  friend Jet sqrt(const Jet& a) {
    if (!(a.c_[0] > 0.0)) throw DomainError("Jet: sqrt needs a positive constant term");
    Jet out(a.order());
    out.c_[0] = std::sqrt(a.c_[0]);
    for (std::size_t n = 1; n < a.c_.size(); ++n) {
      double s = a.c_[n];
      for (std::size_t k = 1; k < n; ++k) s -= out.c_[k] * out.c_[n - k];
      out.c_[n] = s / (2.0 * out.c_[0]);
    }
    return out;
  }

  // p(inner) for a polynomial p given by its coefficients; inner must have
  // zero constant term for the truncation to be exact.
  static Jet compose(const std::vector<double>& p, const Jet& inner) {
    Jet out(inner.order());
    for (std::size_t i = p.size(); i-- > 0;) {
      out = out * inner;
      out.c_[0] += p[i];
    }
    return out;
  }

 private:
  std::vector<double> c_;
};

}  // namespace conetrace
