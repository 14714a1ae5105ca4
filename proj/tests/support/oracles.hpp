#pragma once

// Test-only oracles: finite differences, random data generators, and gap
// helpers. These are deliberately independent of the library code paths they
// are used to check.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "dissipath/linalg.hpp"

namespace oracles {

using dissipath::Mat;
using dissipath::Vec;

inline double fd_step(double coordinate) { return 1e-6 * (1.0 + std::abs(coordinate)); }

/// Central-difference gradient of a scalar function.
inline Vec central_gradient(const std::function<double(const Vec&)>& f, const Vec& x) {
    Vec g(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double h = fd_step(x[j]);
        Vec xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        g[j] = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

/// Central-difference Jacobian of a vector function (columns = d/dp_j).
inline Mat central_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& p) {
    const Vec probe = f(p);
    Mat j(probe.size(), p.size());
    for (std::size_t c = 0; c < p.size(); ++c) {
        const double h = fd_step(p[c]);
        Vec pp = p, pm = p;
        pp[c] += h;
        pm[c] -= h;
        const Vec fp = f(pp), fm = f(pm);
        for (std::size_t r = 0; r < probe.size(); ++r) j(r, c) = (fp[r] - fm[r]) / (2.0 * h);
    }
    return j;
}

/// Central-difference Hessian taken as the Jacobian of an analytic gradient.
inline Mat central_hessian(const std::function<Vec(const Vec&)>& grad, const Vec& x) {
    return central_jacobian(grad, x);
}

/// Relative gap between two vectors: ||a - b|| / (1 + ||b||).
inline double rel_gap(const Vec& a, const Vec& b) {
    return dissipath::norm(dissipath::sub(a, b)) / (1.0 + dissipath::norm(b));
}

/// Relative gap between two matrices in the Frobenius norm.
inline double rel_gap(const Mat& a, const Mat& b) {
    Mat d = a;
    d -= b;
    return d.frobenius_norm() / (1.0 + b.frobenius_norm());
}

// ---------------------------------------------------------------------------
// Seeded random data
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec random_vec(Rng& rng, std::size_t n, double lo, double hi) {
    Vec v(n);
    for (double& e : v) e = uniform(rng, lo, hi);
    return v;
}

inline Vec random_unit(Rng& rng, std::size_t n) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec v(n);
    double len = 0.0;
    do {
        for (double& e : v) e = gauss(rng);
        len = dissipath::norm(v);
    } while (len < 1e-8);
    return dissipath::scaled(v, 1.0 / len);
}

/// Random symmetric positive definite matrix A^T A + I.
inline Mat random_spd(Rng& rng, std::size_t n) {
    Mat a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = uniform(rng, -1.0, 1.0);
    Mat g = a.transposed() * a;
    for (std::size_t i = 0; i < n; ++i) g(i, i) += 1.0;
    return g;
}

}  // namespace oracles
