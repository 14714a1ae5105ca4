#pragma once

// Ansatz manifolds given by explicit charts F: R^m -> R^n, their tangent
// frames in the Hessian metric, the restricted gradient of H along the
// manifold, and the transversality diagnostic.

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "lyapunov.hpp"

namespace dissipath {

// ---------------------------------------------------------------------------
// Charts
// ---------------------------------------------------------------------------

struct ParamBox {
    Vec lo, hi;

    [[nodiscard]] static ParamBox unbounded(std::size_t m) {
        const double inf = std::numeric_limits<double>::infinity();
        return {Vec(m, -inf), Vec(m, inf)};
    }

    [[nodiscard]] static ParamBox bounds(Vec lo, Vec hi) {
        if (lo.size() != hi.size()) throw DimensionMismatch("ParamBox: bound sizes disagree");
        return {std::move(lo), std::move(hi)};
    }

    [[nodiscard]] bool contains(const Vec& p) const {
        if (p.size() != lo.size()) return false;
        for (std::size_t i = 0; i < p.size(); ++i)
            if (p[i] < lo[i] || p[i] > hi[i]) return false;
        return true;
    }
};

/// Explicit chart of an m-dimensional ansatz manifold in R^n. `jac` may be
/// left empty; chart_jacobian then falls back to central finite differences.
struct Chart {
    std::size_t m = 0, n = 0;
    std::function<Vec(const Vec&)> embed;
    std::function<Mat(const Vec&)> jac;
    ParamBox param_domain;
    std::string label;
};

inline void check_param(const Chart& chart, const Vec& p) {
    if (p.size() != chart.m)
        throw DimensionMismatch("chart '" + chart.label + "': parameter has size " +
                                std::to_string(p.size()) + ", expected " + std::to_string(chart.m));
    if (!chart.param_domain.contains(p))
        throw DomainViolation("chart '" + chart.label + "': parameter outside its domain");
}

[[nodiscard]] inline Vec chart_point(const Chart& chart, const Vec& p) {
    check_param(chart, p);
    Vec x = chart.embed(p);
    if (x.size() != chart.n)
        throw DimensionMismatch("chart '" + chart.label + "': embed returned wrong dimension");
    return x;
}

/// Jacobian of the chart: analytic when provided, otherwise central
/// differences with step 1e-6 * (1 + |p_j|) per column.
[[nodiscard]] inline Mat chart_jacobian(const Chart& chart, const Vec& p) {
    check_param(chart, p);
    if (chart.jac) {
        Mat j = chart.jac(p);
        if (j.rows() != chart.n || j.cols() != chart.m)
            throw DimensionMismatch("chart '" + chart.label + "': jacobian shape mismatch");
        return j;
    }
    Mat j(chart.n, chart.m);
    for (std::size_t c = 0; c < chart.m; ++c) {
        const double h = 1e-6 * (1.0 + std::abs(p[c]));
        Vec pp = p, pm = p;
        pp[c] += h;
        pm[c] -= h;
        const Vec fp = chart.embed(pp), fm = chart.embed(pm);
        if (fp.size() != chart.n || fm.size() != chart.n)
            throw DimensionMismatch("chart '" + chart.label + "': embed returned wrong dimension");
        for (std::size_t r = 0; r < chart.n; ++r) j(r, c) = (fp[r] - fm[r]) / (2.0 * h);
    }
    return j;
}

// ---------------------------------------------------------------------------
// Tangent frames
// ---------------------------------------------------------------------------

/// Tangent basis at F(p) together with its Gram matrix in the Hessian metric.
struct TangentFrame {
    Vec p;
    Vec x;
    Mat basis;        // n x m, columns dF/dp_j
    Mat metric_gram;  // m x m, basis^T Hess basis
};

/// Relative rank floor: frames whose smallest singular value drops below
/// 1e-8 of the largest are rejected.
inline void check_immersion_rank(const Mat& basis, const std::string& label) {
    Vec sv = singular_values(basis);
    if (sv.empty() || !(sv.back() > 0.0) || sv.front() < 1e-8 * sv.back())
        throw RankDeficient("chart '" + label + "': jacobian is rank deficient (sigma_min = " +
                            std::to_string(sv.empty() ? 0.0 : sv.front()) + ")");
}

[[nodiscard]] inline TangentFrame tangent_frame(const Chart& chart, const LyapunovFunction& h,
                                                const Vec& p) {
    Vec x = chart_point(chart, p);
    MetricPoint mp = metric_point(h, x);
    Mat basis = chart_jacobian(chart, p);
    check_immersion_rank(basis, chart.label);
    Mat gram = basis.transposed() * (mp.hess() * basis);
    return TangentFrame{p, std::move(x), std::move(basis), std::move(gram)};
}

// ---------------------------------------------------------------------------
// Restricted gradient and transversality
// ---------------------------------------------------------------------------

/// Tolerance against which the tangent component of the gradient is judged.
[[nodiscard]] inline double transversality_tolerance(const Vec& grad_x) {
    return 1e-8 * (1.0 + norm(grad_x));
}

struct TransversalityReport {
    bool transversal = false;
    double diagnostic = 0.0;  // ||basis^T grad||
    double tolerance = 0.0;
};

[[nodiscard]] inline TransversalityReport transversality_check(const Chart& chart,
                                                               const LyapunovFunction& h,
                                                               const Vec& p) {
    TangentFrame frame = tangent_frame(chart, h, p);
    Vec g = h.grad(frame.x);
    const double diag = norm(frame.basis.transposed() * g);
    const double tol = transversality_tolerance(g);
    return {diag >= tol, diag, tol};
}

/// Metric projection of the Riesz gradient onto the tangent space: the unique
/// tangent vector g_M with <g_M|v>_x = D_x(H)(v) for all tangent v. Returns
/// the zero vector at points where the tangent component vanishes.
[[nodiscard]] inline Vec restricted_gradient(const Chart& chart, const LyapunovFunction& h,
                                             const Vec& p) {
    TangentFrame frame = tangent_frame(chart, h, p);
    Vec rhs = frame.basis.transposed() * h.grad(frame.x);
    auto gram_factor = CholeskyFactor::compute(frame.metric_gram);
    if (!gram_factor)
        throw RankDeficient("restricted_gradient: metric Gram matrix not positive definite");
    return frame.basis * gram_factor->solve(rhs);
}

/// nu_W = -g_M / sqrt(<g_M|g_M>_x): unit antigradient of H restricted to the
/// manifold, oriented so D_x(H)(nu_W) < 0.
[[nodiscard]] inline Vec unit_tangent_antigradient(const Chart& chart, const LyapunovFunction& h,
                                                   const Vec& p) {
    TangentFrame frame = tangent_frame(chart, h, p);
    Vec g = h.grad(frame.x);
    Vec rhs = frame.basis.transposed() * g;
    if (norm(rhs) < transversality_tolerance(g))
        throw NonTransversal("unit_tangent_antigradient: manifold tangent to the level set of H" +
                             std::string(" at the queried point (diagnostic ") +
                             std::to_string(norm(rhs)) + ")");
    auto gram_factor = CholeskyFactor::compute(frame.metric_gram);
    if (!gram_factor)
        throw RankDeficient("unit_tangent_antigradient: metric Gram matrix not positive definite");
    Vec coeff = gram_factor->solve(rhs);
    const double len2 = dot(coeff, rhs);  // <g_M|g_M>_x
    if (!(len2 > 0.0))
        throw NonTransversal("unit_tangent_antigradient: restricted gradient has zero length");
    return scaled(frame.basis * coeff, -1.0 / std::sqrt(len2));
}

// ---------------------------------------------------------------------------
// Chart catalog
// ---------------------------------------------------------------------------

/// Affine chart x = origin + sum_j p_j d_j. Directions must be independent.
[[nodiscard]] inline Chart make_affine_chart(Vec origin, std::vector<Vec> directions) {
    if (directions.empty()) throw DimensionMismatch("make_affine_chart: no directions");
    for (const Vec& d : directions)
        if (d.size() != origin.size())
            throw DimensionMismatch("make_affine_chart: direction size mismatch");
    Mat basis = Mat::from_columns(directions);
    check_immersion_rank(basis, "affine");

    Chart c;
    c.m = directions.size();
    c.n = origin.size();
    c.param_domain = ParamBox::unbounded(c.m);
    c.label = "affine";
    c.embed = [origin, directions](const Vec& p) {
        Vec x = origin;
        for (std::size_t j = 0; j < directions.size(); ++j) x = axpy(x, p[j], directions[j]);
        return x;
    };
    c.jac = [basis](const Vec&) { return basis; };
    return c;
}

/// One-dimensional affine chart x = a + p d.
[[nodiscard]] inline Chart make_line_chart(Vec a, Vec d) {
    Chart c = make_affine_chart(std::move(a), {std::move(d)});
    c.label = "line";
    return c;
}

/// Polynomial curve x(p) = sum_k coeff[k] p^k with vector coefficients.
[[nodiscard]] inline Chart make_polynomial_curve(std::vector<Vec> coefficients) {
    if (coefficients.empty()) throw DimensionMismatch("make_polynomial_curve: no coefficients");
    const std::size_t n = coefficients.front().size();
    for (const Vec& c : coefficients)
        if (c.size() != n) throw DimensionMismatch("make_polynomial_curve: ragged coefficients");
    if (coefficients.size() < 2)
        throw DimensionMismatch("make_polynomial_curve: need at least a linear term");

    Chart c;
    c.m = 1;
    c.n = n;
    c.param_domain = ParamBox::unbounded(1);
    c.label = "poly_curve";
    c.embed = [coefficients, n](const Vec& p) {
        Vec x(n, 0.0);
        double pk = 1.0;
        for (const Vec& ck : coefficients) {
            x = axpy(x, pk, ck);
            pk *= p[0];
        }
        return x;
    };
    c.jac = [coefficients, n](const Vec& p) {
        Vec t(n, 0.0);
        double pk = 1.0;
        for (std::size_t k = 1; k < coefficients.size(); ++k) {
            t = axpy(t, static_cast<double>(k) * pk, coefficients[k]);
            pk *= p[0];
        }
        return Mat::from_columns({t});
    };
    return c;
}

/// Straight interpolation x = (1-p) a + p b between two states, p in [0,1].
[[nodiscard]] inline Chart make_convex_combination_chart(Vec a, Vec b) {
    require_same_size(a, b, "make_convex_combination_chart");
    Vec d = sub(b, a);
    Chart c;
    c.m = 1;
    c.n = a.size();
    c.param_domain = ParamBox::bounds(Vec{0.0}, Vec{1.0});
    c.label = "convex_combination";
    c.embed = [a, d](const Vec& p) { return axpy(a, p[0], d); };
    c.jac = [d](const Vec&) { return Mat::from_columns({d}); };
    return c;
}

/// Circle of radius r in the plane: x = center + r (cos p, sin p).
[[nodiscard]] inline Chart make_circle_chart(Vec center, double radius) {
    if (center.size() != 2) throw DimensionMismatch("make_circle_chart: ambient dimension must be 2");
    if (!(radius > 0.0)) throw Error("make_circle_chart: radius must be positive");
    Chart c;
    c.m = 1;
    c.n = 2;
    c.param_domain = ParamBox::unbounded(1);
    c.label = "circle";
    c.embed = [center, radius](const Vec& p) {
        return Vec{center[0] + radius * std::cos(p[0]), center[1] + radius * std::sin(p[0])};
    };
    c.jac = [radius](const Vec& p) {
        return Mat::from_columns({Vec{-radius * std::sin(p[0]), radius * std::cos(p[0])}});
    };
    return c;
}

/// Two-parameter sheet in R^3: x = origin + (p, q, p^2 + q^2).
[[nodiscard]] inline Chart make_paraboloid_sheet_chart(Vec origin) {
    if (origin.size() != 3)
        throw DimensionMismatch("make_paraboloid_sheet_chart: ambient dimension must be 3");
    Chart c;
    c.m = 2;
    c.n = 3;
    c.param_domain = ParamBox::unbounded(2);
    c.label = "paraboloid_sheet";
    c.embed = [origin](const Vec& p) {
        return Vec{origin[0] + p[0], origin[1] + p[1], origin[2] + p[0] * p[0] + p[1] * p[1]};
    };
    c.jac = [](const Vec& p) {
        return Mat{{1.0, 0.0}, {0.0, 1.0}, {2.0 * p[0], 2.0 * p[1]}};
    };
    return c;
}

}  // namespace dissipath
