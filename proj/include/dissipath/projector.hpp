#pragma once

// Projectors of ambient vector fields onto tangent spaces of an ansatz
// manifold. The dissipativity-preserving projector splits a field Q into
// Q0 (+) Q0_perp (+) z*nu along ker D_x(H) and its metric normal, keeps the
// tangent part Q0 of the kernel component, and routes the normal component
// through the restricted antigradient: P(Q) = Q0 + z * nu_W / <nu_W|nu>_x.
// That choice preserves the exact value of dH/dt, not just its sign.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "lyapunov.hpp"
#include "manifold.hpp"

namespace dissipath {

enum class ProjectorMode { general, curve, orthogonal_fallback };

[[nodiscard]] inline const char* to_string(ProjectorMode m) {
    switch (m) {
        case ProjectorMode::general: return "general";
        case ProjectorMode::curve: return "curve";
        case ProjectorMode::orthogonal_fallback: return "orthogonal_fallback";
    }
    return "unknown";
}

/// Dissipativity-preserving projector at a fixed point of the manifold.
/// In orthogonal_fallback mode (near critical points) nu and nu_w are zero,
/// scale is 1, and w0_basis holds a metric-orthonormal basis of the whole
/// tangent space instead of its kernel slice.
struct ThermodynamicProjector {
    Vec x;
    Mat matrix;      // n x n action on ambient vectors
    Vec nu;          // unit antigradient of H at x
    Vec nu_w;        // unit tangent antigradient of H|M at x
    Mat w0_basis;    // metric-orthonormal basis of T_x(M) ∩ ker D_x(H), n x (m-1)
    double scale = 1.0;  // beta = 1 / <nu_w|nu>_x
    ProjectorMode mode = ProjectorMode::general;

    [[nodiscard]] Vec apply(const Vec& q) const { return matrix * q; }
};

/// Metric-orthogonal projector onto a linear subspace.
struct OrthogonalProjector {
    Vec x;
    Mat matrix;
    Mat subspace_basis;

    [[nodiscard]] Vec apply(const Vec& q) const { return matrix * q; }
};

// ---------------------------------------------------------------------------
// Orthogonal projector: P = B (B^T G B)^{-1} B^T G
// ---------------------------------------------------------------------------

[[nodiscard]] inline OrthogonalProjector orthogonal_projector(const LyapunovFunction& h,
                                                              const Vec& x, const Mat& basis) {
    MetricPoint mp = metric_point(h, x);
    if (basis.rows() != h.dim) throw DimensionMismatch("orthogonal_projector: basis row mismatch");
    if (basis.cols() == 0) throw DimensionMismatch("orthogonal_projector: empty basis");
    check_immersion_rank(basis, "orthogonal_projector basis");
    Mat btg = basis.transposed() * mp.hess();  // m x n
    Mat gram = btg * basis;                    // B^T G B
    auto factor = CholeskyFactor::compute(gram);
    if (!factor)
        throw RankDeficient("orthogonal_projector: basis Gram matrix not positive definite");
    Mat solved = factor->solve_matrix(btg);  // (B^T G B)^{-1} B^T G
    return OrthogonalProjector{x, basis * solved, basis};
}

// ---------------------------------------------------------------------------
// Curve projector (one-dimensional manifolds)
// ---------------------------------------------------------------------------

/// P(Q) = t * D_x(H)(Q) / D_x(H)(t) with t the curve tangent: the rank-one
/// form of the preserving projector, with kernel exactly ker D_x(H).
[[nodiscard]] inline ThermodynamicProjector curve_projector(const LyapunovFunction& h,
                                                            const Chart& chart, const Vec& p) {
    if (chart.m != 1) throw DimensionMismatch("curve_projector: chart must be one-dimensional");
    Vec x = chart_point(chart, p);
    MetricPoint mp = metric_point(h, x);
    Vec g = h.grad(x);
    if (norm(g) < gradient_tolerance(h, x))
        throw AtCriticalPoint("curve_projector: gradient vanishes; use near_equilibrium_projector");
    Mat basis = chart_jacobian(chart, p);
    check_immersion_rank(basis, chart.label);
    Vec t = basis.column(0);
    const double denom = dot(g, t);  // D_x(H)(t)
    if (std::abs(denom) < transversality_tolerance(g))
        throw NonTransversal("curve_projector: curve tangent to the level set of H (D_x(H)(t) = " +
                             std::to_string(denom) + ")");

    ThermodynamicProjector tp;
    tp.x = x;
    tp.matrix = (1.0 / denom) * outer(t, g);
    tp.mode = ProjectorMode::curve;

    Vec e = mp.solve(g);
    tp.nu = scaled(e, -1.0 / std::sqrt(dot(e, g)));
    const double t_len = mp.metric_norm(t);
    tp.nu_w = scaled(t, -(denom > 0.0 ? 1.0 : -1.0) / t_len);
    tp.w0_basis = Mat(h.dim, 0);
    tp.scale = 1.0 / mp.inner(tp.nu_w, tp.nu);
    return tp;
}

// ---------------------------------------------------------------------------
// General thermodynamic projector
// ---------------------------------------------------------------------------

[[nodiscard]] inline ThermodynamicProjector thermodynamic_projector(const LyapunovFunction& h,
                                                                    const Chart& chart,
                                                                    const Vec& p) {
    Vec x = chart_point(chart, p);
    MetricPoint mp = metric_point(h, x);
    Vec g = h.grad(x);
    if (norm(g) < gradient_tolerance(h, x))
        throw AtCriticalPoint(
            "thermodynamic_projector: gradient vanishes; use near_equilibrium_projector");

    Mat basis = chart_jacobian(chart, p);
    check_immersion_rank(basis, chart.label);
    Vec rhs = basis.transposed() * g;
    if (norm(rhs) < transversality_tolerance(g))
        throw NonTransversal("thermodynamic_projector: manifold tangent to the level set of H");

    // unit antigradient of H
    Vec e = mp.solve(g);
    Vec nu = scaled(e, -1.0 / std::sqrt(dot(e, g)));

    // unit antigradient of H restricted to the manifold
    Mat gram = basis.transposed() * (mp.hess() * basis);
    auto gram_factor = CholeskyFactor::compute(gram);
    if (!gram_factor)
        throw RankDeficient("thermodynamic_projector: metric Gram matrix not positive definite");
    Vec coeff = gram_factor->solve(rhs);
    const double gm_len2 = dot(coeff, rhs);
    if (!(gm_len2 > 0.0))
        throw NonTransversal("thermodynamic_projector: restricted gradient has zero length");
    Vec nu_w = scaled(basis * coeff, -1.0 / std::sqrt(gm_len2));

    // metric-orthonormal basis of W0 = T_x(M) ∩ ker D_x(H): orthogonalize the
    // tangent columns against nu_w; exactly one column collapses.
    auto inner = [&mp](const Vec& a, const Vec& b) { return mp.inner(a, b); };
    std::vector<Vec> seeds;
    seeds.reserve(chart.m + 1);
    seeds.push_back(nu_w);
    for (std::size_t j = 0; j < chart.m; ++j) seeds.push_back(basis.column(j));
    std::vector<Vec> ortho = metric_orthonormalize(seeds, inner);
    if (ortho.size() != chart.m)
        throw RankDeficient("thermodynamic_projector: tangent frame degenerate in the metric");
    std::vector<Vec> w0(ortho.begin() + 1, ortho.end());

    const double beta_inner = mp.inner(nu_w, nu);  // <nu_w|nu>_x = ||g_M|| / ||e_x|| > 0
    if (!(beta_inner > 1e-15))
        throw NonTransversal("thermodynamic_projector: <nu_w|nu> not positive (diagnostic " +
                             std::to_string(beta_inner) + ")");

    Mat matrix(h.dim, h.dim);
    for (const Vec& u : w0) matrix += outer(u, mp.hess() * u);
    matrix += (1.0 / beta_inner) * outer(nu_w, mp.hess() * nu);

    ThermodynamicProjector tp;
    tp.x = std::move(x);
    tp.matrix = std::move(matrix);
    tp.nu = std::move(nu);
    tp.nu_w = std::move(nu_w);
    tp.w0_basis = Mat::from_columns(w0);
    if (tp.w0_basis.rows() == 0) tp.w0_basis = Mat(h.dim, 0);
    tp.scale = 1.0 / beta_inner;
    tp.mode = ProjectorMode::general;
    return tp;
}

// ---------------------------------------------------------------------------
// Near-equilibrium fallback
// ---------------------------------------------------------------------------

/// At critical points of H (or of H restricted to the manifold) the preserving
/// projector degenerates to the metric-orthogonal one; this constructor builds
/// that limit directly. Intended for points within gradient tolerance of a
/// critical point of H or of H|M; the caller is responsible for the regime.
[[nodiscard]] inline ThermodynamicProjector near_equilibrium_projector(const LyapunovFunction& h,
                                                                       const Chart& chart,
                                                                       const Vec& p) {
    Vec x = chart_point(chart, p);
    MetricPoint mp = metric_point(h, x);
    Mat basis = chart_jacobian(chart, p);
    check_immersion_rank(basis, chart.label);
    OrthogonalProjector op = orthogonal_projector(h, x, basis);

    auto inner = [&mp](const Vec& a, const Vec& b) { return mp.inner(a, b); };
    std::vector<Vec> ortho = metric_orthonormalize(basis.columns(), inner);
    if (ortho.size() != chart.m)
        throw RankDeficient("near_equilibrium_projector: tangent frame degenerate in the metric");

    ThermodynamicProjector tp;
    tp.x = std::move(x);
    tp.matrix = std::move(op.matrix);
    tp.nu = Vec(h.dim, 0.0);
    tp.nu_w = Vec(h.dim, 0.0);
    tp.w0_basis = Mat::from_columns(ortho);
    tp.scale = 1.0;
    tp.mode = ProjectorMode::orthogonal_fallback;
    return tp;
}

}  // namespace dissipath
