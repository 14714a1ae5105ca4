#pragma once

// Constructive uniqueness evidence for the thermodynamic projector. Any
// projector onto the tangent space that is not the thermodynamic one admits
// a dissipative input whose projection produces entropy: this header builds
// the explicit witnesses. Rank-one operators A q = -v <v|q>_x probe static
// projector matrices, near-equilibrium probe fields extend the construction
// to state-dependent projector fields, and kernel tilts slide the projector
// kernel away from ker D_x(H) by a controlled angle so the loss of the sign
// guarantee can be measured as a function of the tilt.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dynamics.hpp"
#include "errors.hpp"
#include "linalg.hpp"
#include "lyapunov.hpp"
#include "manifold.hpp"
#include "projector.hpp"

namespace dissipath {

// ---------------------------------------------------------------------------
// Rank-one dissipative operators
// ---------------------------------------------------------------------------

/// A q = -v <v|q>_x with v = proj y - a y: globally dissipative for the
/// quadratic H whose metric was used, yet its projection gains entropy
/// whenever proj fails the metric-orthogonality criterion.
struct RankOneOperator {
    Mat matrix;  // -outer(v, G v)
    Vec v;       // proj y - a y
    Vec y;
    double a = 0.0;

    [[nodiscard]] Vec apply(const Vec& q) const { return matrix * q; }
};

/// Builds the rank-one operator for a direction y that is metric-orthogonal
/// to the projector image. Requires proj y != 0; a metric-orthogonal
/// projector annihilates every such y, which is exactly why no rank-one
/// counterexample exists against it.
[[nodiscard]] inline RankOneOperator rank_one_operator(const LyapunovFunction& h,
                                                       const Vec& x_context, const Mat& proj,
                                                       const Vec& y, double a) {
    if (proj.rows() != h.dim || proj.cols() != h.dim)
        throw DimensionMismatch("rank_one_operator: projector must be " + std::to_string(h.dim) +
                                "x" + std::to_string(h.dim));
    if (y.size() != h.dim) throw DimensionMismatch("rank_one_operator: y has the wrong size");
    MetricPoint mp = metric_point(h, x_context);

    Vec gy = mp.hess() * y;
    const double image_overlap = norm(proj.transposed() * gy);
    if (image_overlap > 1e-8 * (1.0 + norm(gy)))
        throw Error("rank_one_operator: y must be metric-orthogonal to the projector image "
                    "(overlap " + std::to_string(image_overlap) + ")");

    Vec py = proj * y;
    if (norm(py) <= 1e-12 * norm(y))
        throw NoWitness("rank_one_operator: the projector annihilates this metric-orthogonal "
                        "direction, so no rank-one counterexample exists along it");

    RankOneOperator op;
    op.v = sub(py, scaled(y, a));
    op.y = y;
    op.a = a;
    op.matrix = outer(op.v, mp.hess() * op.v);
    op.matrix *= -1.0;
    return op;
}

/// Searches the metric-orthogonal complement of the projector image for a
/// direction the projector fails to annihilate. Throws NoWitness when every
/// complement direction is annihilated: the projector is metric-orthogonal
/// and provably admits no rank-one counterexample.
[[nodiscard]] inline Vec rank_one_witness_direction(const LyapunovFunction& h,
                                                    const Vec& x_context, const Mat& proj,
                                                    const Mat& image_basis) {
    if (image_basis.rows() != h.dim)
        throw DimensionMismatch("rank_one_witness_direction: basis row count mismatch");
    MetricPoint mp = metric_point(h, x_context);
    auto inner = [&](const Vec& a, const Vec& b) { return mp.inner(a, b); };

    std::vector<Vec> seeds = image_basis.columns();
    for (std::size_t i = 0; i < h.dim; ++i) {
        Vec e(h.dim, 0.0);
        e[i] = 1.0;
        seeds.push_back(std::move(e));
    }
    std::vector<Vec> ortho = metric_orthonormalize(seeds, inner);
    for (std::size_t i = image_basis.cols(); i < ortho.size(); ++i)
        if (norm(proj * ortho[i]) > 1e-12) return ortho[i];
    throw NoWitness("rank_one_witness_direction: the projector is metric-orthogonal; every "
                    "direction outside its image is annihilated");
}

// ---------------------------------------------------------------------------
// Near-equilibrium probe fields
// ---------------------------------------------------------------------------

/// B(x) = -(P_x y - a y) D_x(H)(P_x y - a y) for a state-dependent projector
/// field: dissipative everywhere by construction (the dissipation is minus a
/// square), yet its projection gains entropy near the equilibrium whenever
/// the projector field is not metric-orthogonal there.
[[nodiscard]] inline VectorField near_equilibrium_probe(
    const LyapunovFunction& h, std::function<Mat(const Vec&)> projector_field, Vec y, double a) {
    if (y.size() != h.dim) throw DimensionMismatch("near_equilibrium_probe: y size mismatch");
    if (!projector_field) throw Error("near_equilibrium_probe: projector field is empty");
    auto eval = [h, projector_field = std::move(projector_field), y, a](const Vec& x) {
        Mat p = projector_field(x);
        if (p.rows() != y.size() || p.cols() != y.size())
            throw DimensionMismatch("near_equilibrium_probe: projector field shape mismatch");
        Vec w = sub(p * y, scaled(y, a));
        return scaled(w, -dissipation(h, x, w));
    };
    return VectorField{h.dim, std::move(eval), "near_equilibrium_probe"};
}

// ---------------------------------------------------------------------------
// Kernel tilts
// ---------------------------------------------------------------------------

/// Thermodynamic projector with its kernel rotated away from ker D_x(H):
/// the defining functional <nu|.>_x is replaced by <nu + eps u|.>_x
/// (renormalized so the tangent antigradient stays fixed). The result is
/// still a projector with image T_x(M) to 1e-9, but it is not the
/// thermodynamic one for any eps > 0.
struct ProjectorPerturbation {
    ThermodynamicProjector base;
    Vec tilt_direction;         // u: metric-unit, orthogonal to nu and to W0
    double tilt_magnitude = 0;  // eps >= 0; eps = 0 reproduces the base
    Mat matrix;

    [[nodiscard]] Vec apply(const Vec& q) const { return matrix * q; }
};

/// Deterministic tilt direction: the first metric-orthonormal direction
/// beyond span{nu, W0}. `index` rotates the candidate order so independent
/// directions can be drawn when the complement has dimension > 1.
[[nodiscard]] inline Vec kernel_tilt_direction(const LyapunovFunction& h,
                                               const ThermodynamicProjector& base,
                                               std::size_t index = 0) {
    if (base.mode == ProjectorMode::orthogonal_fallback || !(norm(base.nu) > 0.0))
        throw Error("kernel_tilt_direction: tilts need a transversal thermodynamic base");
    MetricPoint mp = metric_point(h, base.x);
    auto inner = [&](const Vec& a, const Vec& b) { return mp.inner(a, b); };

    std::vector<Vec> seeds{base.nu};
    for (const Vec& w : base.w0_basis.columns()) seeds.push_back(w);
    const std::size_t fixed = seeds.size();
    for (std::size_t i = 0; i < h.dim; ++i) {
        Vec e(h.dim, 0.0);
        e[(i + index) % h.dim] = 1.0;
        seeds.push_back(std::move(e));
    }
    std::vector<Vec> ortho = metric_orthonormalize(seeds, inner);
    if (ortho.size() <= fixed)
        throw RankDeficient("kernel_tilt_direction: no direction outside span{nu, W0}");
    return ortho[fixed];
}

/// Applies the kernel tilt nu -> nu + eps u to the base projector. The tilt
/// direction must be metric-unit and metric-orthogonal to both nu and the
/// W0 basis; that keeps the tilted matrix an idempotent map onto T_x(M).
[[nodiscard]] inline ProjectorPerturbation tilt_projector(const LyapunovFunction& h,
                                                          const ThermodynamicProjector& base,
                                                          const Vec& u, double epsilon) {
    if (base.mode == ProjectorMode::orthogonal_fallback || !(norm(base.nu) > 0.0))
        throw Error("tilt_projector: tilts need a transversal thermodynamic base");
    if (!(epsilon >= 0.0)) throw Error("tilt_projector: tilt magnitude must be >= 0");
    MetricPoint mp = metric_point(h, base.x);
    if (std::abs(mp.inner(u, u) - 1.0) > 1e-8 || std::abs(mp.inner(u, base.nu)) > 1e-8)
        throw Error("tilt_projector: tilt direction must be metric-unit and orthogonal to nu");
    for (const Vec& w : base.w0_basis.columns())
        if (std::abs(mp.inner(u, w)) > 1e-8)
            throw Error("tilt_projector: tilt direction must be metric-orthogonal to W0");

    Vec functional = axpy(base.nu, epsilon, u);  // nu + eps u
    const double beta_tilt = mp.inner(base.nu_w, functional);
    if (!(beta_tilt > 1e-12))
        throw Error("tilt_projector: tilt too large, <nu_w|nu + eps u> = " +
                    std::to_string(beta_tilt) + " is not positive");

    Mat matrix(h.dim, h.dim);
    for (const Vec& w : base.w0_basis.columns()) matrix += outer(w, mp.hess() * w);
    matrix += (1.0 / beta_tilt) * outer(base.nu_w, mp.hess() * functional);

    ProjectorPerturbation pert;
    pert.base = base;
    pert.tilt_direction = u;
    pert.tilt_magnitude = epsilon;
    pert.matrix = std::move(matrix);
    return pert;
}

/// The proof's explicit witness for a tilted kernel: Q = -u + (eps/2) nu is
/// strictly dissipative (D(Q) = -(eps/2) ||e||_x < 0) while the tilted
/// projection produces D(P Q) = (eps/2) ||e||_x beta / beta_tilt > 0.
[[nodiscard]] inline Vec tilt_witness(const ProjectorPerturbation& pert) {
    return axpy(scaled(pert.tilt_direction, -1.0), 0.5 * pert.tilt_magnitude, pert.base.nu);
}

// ---------------------------------------------------------------------------
// Uniqueness sweep
// ---------------------------------------------------------------------------

struct TiltFinding {
    double tilt = 0.0;
    bool violation_found = false;
    Vec witness;                       // the deterministic violating vector
    double full_dissipation = 0.0;     // D(witness), <= 0
    double reduced_dissipation = 0.0;  // D(tilted projection of witness)
    double margin = 0.0;               // positive excess of the reduced dissipation
    std::size_t random_violations = 0;  // Monte-Carlo confirmations among `trials`
};

struct UniquenessReport {
    Vec p;
    Vec x;
    Vec tilt_direction;
    std::size_t trials = 0;
    std::size_t control_violations = 0;  // tilt 0: must stay 0
    std::vector<TiltFinding> findings;
};

namespace detail {

/// Draws a dissipative vector: uniform in [-1,1]^n, flipped into D(Q) <= 0.
inline Vec random_dissipative(std::mt19937_64& rng, const LyapunovFunction& h, const Vec& x) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Vec q(h.dim);
    for (double& c : q) c = dist(rng);
    if (dissipation(h, x, q) > 0.0) q = scaled(q, -1.0);
    return q;
}

}  // namespace detail

/// For each tilt eps > 0: constructs the deterministic witness and measures
/// its margin, then counts how many of `trials` random dissipative vectors
/// also violate under the tilted projector. The untilted control applies the
/// thermodynamic projector itself to `trials` random dissipative vectors and
/// counts sign violations beyond 1e-12 (none are expected). Same seed, same
/// report, bit for bit.
[[nodiscard]] inline UniquenessReport uniqueness_sweep(const LyapunovFunction& h,
                                                       const Chart& chart, const Vec& p,
                                                       const std::vector<double>& tilt_magnitudes,
                                                       std::size_t trials = 10000,
                                                       std::uint64_t seed = 0) {
    ThermodynamicProjector base = thermodynamic_projector(h, chart, p);
    Vec u = kernel_tilt_direction(h, base);
    std::mt19937_64 rng(seed);

    UniquenessReport report;
    report.p = p;
    report.x = base.x;
    report.tilt_direction = u;
    report.trials = trials;

    for (std::size_t trial = 0; trial < trials; ++trial) {
        Vec q = detail::random_dissipative(rng, h, base.x);
        if (dissipation(h, base.x, q) <= 0.0 &&
            dissipation(h, base.x, base.apply(q)) > 1e-12)
            ++report.control_violations;
    }

    for (double eps : tilt_magnitudes) {
        ProjectorPerturbation pert = tilt_projector(h, base, u, eps);
        TiltFinding finding;
        finding.tilt = eps;
        finding.witness = tilt_witness(pert);
        finding.full_dissipation = dissipation(h, base.x, finding.witness);
        finding.reduced_dissipation = dissipation(h, base.x, pert.apply(finding.witness));
        finding.violation_found =
            finding.full_dissipation <= 0.0 && finding.reduced_dissipation > 1e-12;
        finding.margin = finding.violation_found ? finding.reduced_dissipation : 0.0;
        for (std::size_t trial = 0; trial < trials; ++trial) {
            Vec q = detail::random_dissipative(rng, h, base.x);
            if (dissipation(h, base.x, q) <= 0.0 &&
                dissipation(h, base.x, pert.apply(q)) > 1e-12)
                ++finding.random_violations;
        }
        report.findings.push_back(std::move(finding));
    }
    return report;
}

}  // namespace dissipath
