#pragma once

// Deterministic power-of-two complex FFT (iterative radix-2) with
// precomputed twiddle and bit-reversal tables. No external dependencies,
// no runtime dispatch: identical input bits give identical output bits.

#include <cmath>
#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include "evs/errors.hpp"

namespace evs {

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

class FftPlan {
  public:
    FftPlan() = default;

    explicit FftPlan(int n) : n_(n) {
        if (!is_pow2(n)) throw ContractError("fft size must be a power of two");
        rev_.resize(static_cast<std::size_t>(n));
        int lg = 0;
        while ((1 << lg) < n) ++lg;
        for (int i = 0; i < n; ++i) {
            int r = 0;
            for (int b = 0; b < lg; ++b)
                if (i & (1 << b)) r |= 1 << (lg - 1 - b);
            rev_[static_cast<std::size_t>(i)] = r;
        }
        w_.resize(static_cast<std::size_t>(n / 2));
        const double twopi = 6.283185307179586476925286766559;
        for (int j = 0; j < n / 2; ++j) {
            double ang = -twopi * static_cast<double>(j) / static_cast<double>(n);
            w_[static_cast<std::size_t>(j)] = {std::cos(ang), std::sin(ang)};
        }
    }

    int size() const { return n_; }

    /// In-place transform; sign=-1 forward (e^{-i2pi jk/n}), sign=+1 inverse
    /// including the 1/n scale.
    void transform(std::complex<double>* a, int sign) const {
        const int n = n_;
        for (int i = 0; i < n; ++i) {
            int r = rev_[static_cast<std::size_t>(i)];
            if (i < r) std::swap(a[i], a[r]);
        }
        for (int len = 2; len <= n; len <<= 1) {
            int half = len >> 1;
            int step = n / len;
            for (int base = 0; base < n; base += len) {
                for (int j = 0; j < half; ++j) {
                    std::complex<double> w = w_[static_cast<std::size_t>(j * step)];
                    if (sign > 0) w = std::conj(w);
                    std::complex<double> u = a[base + j];
                    std::complex<double> v = a[base + j + half] * w;
                    a[base + j] = u + v;
                    a[base + j + half] = u - v;
                }
            }
        }
        if (sign > 0) {
            double inv = 1.0 / static_cast<double>(n);
            for (int i = 0; i < n; ++i) a[i] *= inv;
        }
    }

  private:
    int n_ = 0;
    std::vector<int> rev_;
    std::vector<std::complex<double>> w_;
};

}  // namespace evs
