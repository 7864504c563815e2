#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace evs {

/// Neumaier-compensated accumulator. Add order is the caller's; for
/// reproducible results feed elements in a fixed order (we always sweep
/// node index 0..total-1). The correction term is folded in only at read
/// time, which keeps add() branch-light.
class StableSum {
  public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }

    double value() const { return sum_ + comp_; }

    void reset() { sum_ = comp_ = 0.0; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Compensated sum of a contiguous range in index order.
inline double stable_sum(std::span<const double> xs) {
    StableSum s;
    for (double x : xs) s.add(x);
    return s.value();
}

/// Compensated dot product in index order.
inline double stable_dot(std::span<const double> a, std::span<const double> b) {
    StableSum s;
    std::size_t n = a.size() < b.size() ? a.size() : b.size();
    for (std::size_t i = 0; i < n; ++i) s.add(a[i] * b[i]);
    return s.value();
}

}  // namespace evs
