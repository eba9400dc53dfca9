#pragma once

#include <cmath>
#include <stdexcept>

namespace qib {

/// Discretization step for the constraint-value grid.
///
/// The solver rounds constraint left-hand sides to multiples of a step
/// eps in (0, 1].  Everything downstream needs ceil(1/eps) exactly: the grid
/// index range is [-ceil(1/eps), ceil(1/eps) - 1].  Floating-point division
/// can miss that ceiling by one ulp (1/0.1 rounds to 10.000000000000002, whose
/// naive ceiling is 11), so the preferred way to build an Epsilon is from an
/// integer denominator q, giving eps = 1/q with ceil(1/eps) = q exact.  A
/// plain double is also accepted; its ceiling is guarded by a small tolerance.
class Epsilon {
  public:
    /// eps = 1/denominator (exact).  Requires denominator >= 1.
    static Epsilon from_denominator(int denominator) {
        if (denominator < 1) throw std::invalid_argument("epsilon denominator must be >= 1");
        Epsilon e;
        e.value_ = 1.0 / static_cast<double>(denominator);
        e.ceil_inverse_ = denominator;
        return e;
    }

    /// eps given directly as a double in (0, 1].
    static Epsilon from_value(double value) {
        if (!(value > 0.0) || value > 1.0) throw std::invalid_argument("epsilon must lie in (0, 1]");
        Epsilon e;
        e.value_ = value;
        e.ceil_inverse_ = static_cast<int>(std::ceil(1.0 / value - 1e-9));
        if (e.ceil_inverse_ < 1) e.ceil_inverse_ = 1;
        return e;
    }

    double value() const { return value_; }
    /// ceil(1/eps), the half-width of the grid index range.
    int ceil_inverse() const { return ceil_inverse_; }
    /// Smallest admissible grid index, -ceil(1/eps).
    int k_min() const { return -ceil_inverse_; }
    /// Largest admissible grid index, ceil(1/eps) - 1.
    int k_max() const { return ceil_inverse_ - 1; }
    /// Number of admissible grid indices, 2*ceil(1/eps).
    int grid_size() const { return 2 * ceil_inverse_; }

  private:
    Epsilon() = default;
    double value_ = 0.1;
    int ceil_inverse_ = 10;
};

}  // namespace qib
