#pragma once

// Convex Lyapunov functions and the metric they induce: the entropic
// (Hessian) inner product <y|z>_x = (y, Hess_x(H) z), its Riesz gradient
// e_x = Hess^{-1} grad H, and the f-divergence catalog.

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace dissipath {

// ---------------------------------------------------------------------------
// Evaluation domain
// ---------------------------------------------------------------------------

struct Domain {
    enum class Kind { AllSpace, PositiveOrthant, Box };
    Kind kind = Kind::AllSpace;
    Vec lo, hi;  // used by Box only

    [[nodiscard]] static Domain all_space() { return {}; }

    [[nodiscard]] static Domain positive_orthant() {
        Domain d;
        d.kind = Kind::PositiveOrthant;
        return d;
    }

    [[nodiscard]] static Domain box(Vec lo, Vec hi) {
        if (lo.size() != hi.size()) throw DimensionMismatch("Domain::box: bound sizes disagree");
        Domain d;
        d.kind = Kind::Box;
        d.lo = std::move(lo);
        d.hi = std::move(hi);
        return d;
    }

    [[nodiscard]] bool contains(const Vec& x) const {
        switch (kind) {
            case Kind::AllSpace:
                return true;
            case Kind::PositiveOrthant:
                for (double v : x)
                    if (!(v > 0.0)) return false;
                return true;
            case Kind::Box:
                if (x.size() != lo.size()) return false;
                for (std::size_t i = 0; i < x.size(); ++i)
                    if (x[i] < lo[i] || x[i] > hi[i]) return false;
                return true;
        }
        return false;
    }
};

// ---------------------------------------------------------------------------
// Lyapunov function bundle
// ---------------------------------------------------------------------------

/// A strictly convex Lyapunov function on its domain. All callables are pure;
/// the bundle is immutable after construction and safe to share across threads.
struct LyapunovFunction {
    std::size_t dim = 0;
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> grad;
    std::function<Mat(const Vec&)> hessian;
    Vec equilibrium;        // reference state x_eq
    Domain domain;
    double convexity_floor = 0.0;  // lower bound on Hessian eigenvalues over the
                                   // documented operating range
    std::string label;
};

/// Generator bundle for f-divergences H(x) = sum_i x_eq_i f(x_i / x_eq_i).
struct FDivergenceSpec {
    std::function<double(double)> f;   // convex, f(1) = 0
    std::function<double(double)> f1;  // f'
    std::function<double(double)> f2;  // f'', > 0 on (0, inf)
    Vec x_eq;                          // positive reference state
    std::string label;
};

inline void check_in_domain(const LyapunovFunction& h, const Vec& x) {
    if (x.size() != h.dim)
        throw DimensionMismatch("lyapunov: point has size " + std::to_string(x.size()) +
                                ", expected " + std::to_string(h.dim));
    if (!h.domain.contains(x)) throw DomainViolation("lyapunov: point outside domain of " + h.label);
}

/// Threshold below which the gradient counts as vanishing at x.
[[nodiscard]] inline double gradient_tolerance(const LyapunovFunction& h, const Vec& x) {
    return 1e-10 * (1.0 + norm(sub(x, h.equilibrium)));
}

// ---------------------------------------------------------------------------
// Metric at a point
// ---------------------------------------------------------------------------

/// Hessian metric at a fixed point, with its triangular factorization.
/// Recomputed per point; nothing is cached across points.
class MetricPoint {
public:
    MetricPoint(Vec x, Mat hess, CholeskyFactor factor)
        : x_(std::move(x)), hess_(std::move(hess)), factor_(std::move(factor)) {}

    [[nodiscard]] const Vec& x() const { return x_; }
    [[nodiscard]] const Mat& hess() const { return hess_; }
    [[nodiscard]] const CholeskyFactor& factor() const { return factor_; }

    /// <y|z>_x = y^T Hess z.
    [[nodiscard]] double inner(const Vec& y, const Vec& z) const {
        require_same_size(y, z, "MetricPoint::inner");
        return dot(y, hess_ * z);
    }

    [[nodiscard]] double metric_norm(const Vec& y) const {
        return std::sqrt(std::max(inner(y, y), 0.0));
    }

    /// Solve Hess u = rhs.
    [[nodiscard]] Vec solve(const Vec& rhs) const { return factor_.solve(rhs); }

private:
    Vec x_;
    Mat hess_;
    CholeskyFactor factor_;
};

[[nodiscard]] inline MetricPoint metric_point(const LyapunovFunction& h, const Vec& x) {
    check_in_domain(h, x);
    Mat g = h.hessian(x);
    if (g.rows() != h.dim || g.cols() != h.dim)
        throw DimensionMismatch("metric_point: hessian shape mismatch");
    if (symmetry_defect(g) > 1e-12)
        throw Error("metric_point: hessian of " + h.label + " is not symmetric");
    auto factor = CholeskyFactor::compute(g);
    if (!factor)
        throw SingularHessian("metric_point: hessian of " + h.label +
                              " is not positive definite at the queried point");
    return MetricPoint(x, std::move(g), std::move(*factor));
}

// ---------------------------------------------------------------------------
// Metric operations
// ---------------------------------------------------------------------------

[[nodiscard]] inline double shahshahani_inner(const LyapunovFunction& h, const Vec& x,
                                              const Vec& y, const Vec& z) {
    return metric_point(h, x).inner(y, z);
}

/// Riesz representation of D_x(H): e_x = Hess^{-1} grad H. Zero exactly at
/// critical points, where it is still well defined.
[[nodiscard]] inline Vec shahshahani_gradient(const LyapunovFunction& h, const Vec& x) {
    MetricPoint mp = metric_point(h, x);
    return mp.solve(h.grad(x));
}

/// nu = -e_x / sqrt(<e_x|e_x>_x); points in the direction of steepest descent,
/// so D_x(H)(nu) < 0.
[[nodiscard]] inline Vec unit_antigradient(const LyapunovFunction& h, const Vec& x) {
    MetricPoint mp = metric_point(h, x);
    Vec g = h.grad(x);
    if (norm(g) < gradient_tolerance(h, x))
        throw AtCriticalPoint("unit_antigradient: gradient vanishes at the queried point");
    Vec e = mp.solve(g);
    const double len2 = dot(e, g);  // <e|e>_x = e^T Hess e = e^T grad
    if (!(len2 > 0.0))
        throw SingularHessian("unit_antigradient: metric norm of the gradient is not positive");
    return scaled(e, -1.0 / std::sqrt(len2));
}

/// Cosine between the Riesz gradient direction and the Newton direction
/// Hess^{-1} grad H. Identically 1 up to rounding; exposed as a self-check.
[[nodiscard]] inline double newton_direction_check(const LyapunovFunction& h, const Vec& x) {
    MetricPoint mp = metric_point(h, x);
    Vec g = h.grad(x);
    if (norm(g) < gradient_tolerance(h, x))
        throw AtCriticalPoint("newton_direction_check: gradient vanishes at the queried point");
    Vec e = mp.solve(g);
    Vec newton = mp.factor().solve(g);
    return dot(e, newton) / (norm(e) * norm(newton));
}

// ---------------------------------------------------------------------------
// Constructors
// ---------------------------------------------------------------------------

/// H(x) = 1/2 (x - c, G (x - c)); the Hessian is exactly G.
[[nodiscard]] inline LyapunovFunction make_quadratic(const Mat& g, const Vec& center) {
    if (!g.is_square()) throw DimensionMismatch("make_quadratic: G not square");
    if (center.size() != g.rows()) throw DimensionMismatch("make_quadratic: center size mismatch");
    if (symmetry_defect(g) > 1e-12) throw Error("make_quadratic: G not symmetric");
    Vec ev = symmetric_eigenvalues(g);
    if (ev.empty() || !(ev.front() > 0.0))
        throw NotPositiveDefinite("make_quadratic: smallest eigenvalue " +
                                  std::to_string(ev.empty() ? 0.0 : ev.front()) + " is not positive");
    LyapunovFunction h;
    h.dim = g.rows();
    h.equilibrium = center;
    h.domain = Domain::all_space();
    h.convexity_floor = ev.front();
    h.label = "quadratic";
    h.value = [g, center, dim = h.dim](const Vec& x) {
        if (x.size() != dim) throw DimensionMismatch("quadratic value: size mismatch");
        Vec d = sub(x, center);
        return 0.5 * dot(d, g * d);
    };
    h.grad = [g, center, dim = h.dim](const Vec& x) {
        if (x.size() != dim) throw DimensionMismatch("quadratic grad: size mismatch");
        return g * sub(x, center);
    };
    h.hessian = [g, dim = h.dim](const Vec& x) {
        if (x.size() != dim) throw DimensionMismatch("quadratic hessian: size mismatch");
        return g;
    };
    return h;
}

/// Build the Lyapunov function H(x) = sum_i x_eq_i f(x_i/x_eq_i) on the open
/// positive orthant. Closed forms: dH/dx_i = f'(z_i), Hessian is
/// diag(f''(z_i)/x_eq_i) with z_i = x_i/x_eq_i.
[[nodiscard]] inline LyapunovFunction make_f_divergence(FDivergenceSpec spec) {
    if (spec.x_eq.empty()) throw DimensionMismatch("make_f_divergence: empty reference state");
    for (double v : spec.x_eq)
        if (!(v > 0.0))
            throw DomainViolation("make_f_divergence: reference state must be positive");
    if (!spec.f || !spec.f1 || !spec.f2) throw Error("make_f_divergence: missing generator callables");
    if (std::abs(spec.f(1.0)) > 1e-12) throw Error("make_f_divergence: f(1) must be 0");

    // Convexity probe and floor over the documented operating range
    // z in [1e-3, 1e3] (log grid). There is no uniform floor on the whole
    // orthant for the classical generators.
    double min_f2 = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 60; ++k) {
        const double z = std::pow(10.0, -3.0 + 0.1 * k);
        const double d2 = spec.f2(z);
        if (!(d2 > 0.0))
            throw NotPositiveDefinite("make_f_divergence: f'' not positive at z = " + std::to_string(z));
        min_f2 = std::min(min_f2, d2);
    }
    double max_eq = 0.0;
    for (double v : spec.x_eq) max_eq = std::max(max_eq, v);

    LyapunovFunction h;
    h.dim = spec.x_eq.size();
    h.equilibrium = spec.x_eq;
    h.domain = Domain::positive_orthant();
    h.convexity_floor = min_f2 / max_eq;
    h.label = spec.label.empty() ? "f_divergence" : spec.label;

    auto check = [dim = h.dim, label = h.label](const Vec& x) {
        if (x.size() != dim) throw DimensionMismatch(label + ": size mismatch");
        for (double v : x)
            if (!(v > 0.0)) throw DomainViolation(label + ": point leaves the positive orthant");
    };
    h.value = [spec, check](const Vec& x) {
        check(x);
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += spec.x_eq[i] * spec.f(x[i] / spec.x_eq[i]);
        return s;
    };
    h.grad = [spec, check](const Vec& x) {
        check(x);
        Vec g(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) g[i] = spec.f1(x[i] / spec.x_eq[i]);
        return g;
    };
    h.hessian = [spec, check](const Vec& x) {
        check(x);
        Vec d(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) d[i] = spec.f2(x[i] / spec.x_eq[i]) / spec.x_eq[i];
        return Mat::diagonal(d);
    };
    return h;
}

// ---------------------------------------------------------------------------
// f-divergence catalog
// ---------------------------------------------------------------------------

/// f = z ln z. Note f'(1) = 1: the reference state is not an interior
/// critical point (KL is a Lyapunov function on stoichiometric hyperplanes).
[[nodiscard]] inline LyapunovFunction make_kl_divergence(Vec x_eq) {
    FDivergenceSpec s;
    s.f = [](double z) { return z * std::log(z); };
    s.f1 = [](double z) { return 1.0 + std::log(z); };
    s.f2 = [](double z) { return 1.0 / z; };
    s.x_eq = std::move(x_eq);
    s.label = "kl";
    return make_f_divergence(std::move(s));
}

/// f = z ln z - z + 1 (the +1 makes f(1) = 0; derivatives are the classical
/// shifted-KL ones, f' = ln z). The reference state is a true minimizer.
[[nodiscard]] inline LyapunovFunction make_shifted_kl_divergence(Vec x_eq) {
    FDivergenceSpec s;
    s.f = [](double z) { return z * std::log(z) - z + 1.0; };
    s.f1 = [](double z) { return std::log(z); };
    s.f2 = [](double z) { return 1.0 / z; };
    s.x_eq = std::move(x_eq);
    s.label = "kl_shifted";
    return make_f_divergence(std::move(s));
}

/// Burg entropy, f = -ln z. Riesz gradient comes out as e_x = -x.
[[nodiscard]] inline LyapunovFunction make_burg_divergence(Vec x_eq) {
    FDivergenceSpec s;
    s.f = [](double z) { return -std::log(z); };
    s.f1 = [](double z) { return -1.0 / z; };
    s.f2 = [](double z) { return 1.0 / (z * z); };
    s.x_eq = std::move(x_eq);
    s.label = "burg";
    return make_f_divergence(std::move(s));
}

/// Alpha family f_a(z) = (z^a - 1 - a(z-1)) / (a(a-1)), a not in {0,1}.
/// Convex with f(1) = f'(1) = 0; backs the custom_f catalog id.
[[nodiscard]] inline LyapunovFunction make_alpha_divergence(Vec x_eq, double alpha) {
    if (alpha == 0.0 || alpha == 1.0)
        throw Error("make_alpha_divergence: alpha must avoid {0, 1}");
    FDivergenceSpec s;
    s.f = [alpha](double z) {
        return (std::pow(z, alpha) - 1.0 - alpha * (z - 1.0)) / (alpha * (alpha - 1.0));
    };
    s.f1 = [alpha](double z) { return (std::pow(z, alpha - 1.0) - 1.0) / (alpha - 1.0); };
    s.f2 = [alpha](double z) { return std::pow(z, alpha - 2.0); };
    s.x_eq = std::move(x_eq);
    s.label = "custom_f";
    return make_f_divergence(std::move(s));
}

}  // namespace dissipath
