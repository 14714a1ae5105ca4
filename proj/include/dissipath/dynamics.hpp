#pragma once

// Vector fields, dissipation measurement, reduced dynamics in chart
// coordinates, fixed-step integration, and the entropy-production audit.
// Dissipativity of a supplied field is always measured pointwise along the
// way, never assumed: the projector guarantees preservation of whatever
// dH/dt the full field actually has.

#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "lyapunov.hpp"
#include "manifold.hpp"
#include "projector.hpp"

namespace dissipath {

/// Ambient vector field W(x).
struct VectorField {
    std::size_t dim = 0;
    std::function<Vec(const Vec&)> eval;
    std::string label;
};

/// Derivative of H along Q at x: D_x(H)(Q) = grad H(x) . Q.
[[nodiscard]] inline double dissipation(const LyapunovFunction& h, const Vec& x, const Vec& q) {
    check_in_domain(h, x);
    require_same_size(x, q, "dissipation");
    return dot(h.grad(x), q);
}

// ---------------------------------------------------------------------------
// Field catalog
// ---------------------------------------------------------------------------

/// W(x) = K (x - center); an empty center means K x.
[[nodiscard]] inline VectorField make_linear_field(Mat k, Vec center = {}) {
    if (!k.is_square()) throw DimensionMismatch("make_linear_field: matrix must be square");
    if (!center.empty() && center.size() != k.rows())
        throw DimensionMismatch("make_linear_field: center size mismatch");
    const std::size_t n = k.rows();
    return VectorField{n,
                       [k = std::move(k), center = std::move(center)](const Vec& x) {
                           return center.empty() ? k * x : k * sub(x, center);
                       },
                       "linear"};
}

/// Euclidean steepest descent W(x) = -grad H(x); dissipative by construction.
[[nodiscard]] inline VectorField make_gradient_flow(const LyapunovFunction& h) {
    return VectorField{h.dim, [h](const Vec& x) { return scaled(h.grad(x), -1.0); },
                       "gradient_flow"};
}

/// Markov kinetics W(x) = K x for a rate matrix with nonnegative off-diagonal
/// entries, zero column sums, and K x_eq = 0.
[[nodiscard]] inline VectorField make_markov_field(Mat k, const Vec& x_eq) {
    if (!k.is_square()) throw BadRateMatrix("make_markov_field: matrix must be square");
    const std::size_t n = k.rows();
    if (x_eq.size() != n) throw DimensionMismatch("make_markov_field: equilibrium size mismatch");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && k(i, j) < 0.0)
                throw BadRateMatrix("make_markov_field: negative off-diagonal rate at (" +
                                    std::to_string(i) + "," + std::to_string(j) + ")");
    for (std::size_t j = 0; j < n; ++j) {
        double colsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) colsum += k(i, j);
        if (std::abs(colsum) > 1e-12 * (1.0 + k.max_abs_entry()))
            throw BadRateMatrix("make_markov_field: column " + std::to_string(j) +
                                " does not sum to zero (" + std::to_string(colsum) + ")");
    }
    Vec residual = k * x_eq;
    if (norm(residual) > 1e-12 * (1.0 + k.max_abs_entry()) * (1.0 + norm(x_eq)))
        throw BadRateMatrix("make_markov_field: K x_eq != 0 (residual " +
                            std::to_string(norm(residual)) + ")");
    return VectorField{n, [k = std::move(k)](const Vec& x) { return k * x; }, "markov"};
}

// ---------------------------------------------------------------------------
// Reduced systems
// ---------------------------------------------------------------------------

/// How the ambient field is projected onto the manifold tangent space.
/// orthogonal_euclidean is the naive baseline J(J^T J)^{-1} J^T; it preserves
/// neither the value nor, in general, the sign of dH/dt.
enum class ProjectorPolicy { thermodynamic, curve, orthogonal_euclidean, custom_matrix };

[[nodiscard]] inline const char* to_string(ProjectorPolicy p) {
    switch (p) {
        case ProjectorPolicy::thermodynamic: return "thermodynamic";
        case ProjectorPolicy::curve: return "curve";
        case ProjectorPolicy::orthogonal_euclidean: return "orthogonal_euclidean";
        case ProjectorPolicy::custom_matrix: return "custom_matrix";
    }
    return "unknown";
}

struct ReducedSystem {
    LyapunovFunction h;
    Chart chart;
    VectorField field;
    ProjectorPolicy policy = ProjectorPolicy::thermodynamic;
    std::optional<Mat> custom_matrix;                // required by the custom_matrix policy
    std::function<void(const std::string&)> notify;  // optional event hook (fallbacks etc.)

    ReducedSystem(LyapunovFunction h_, Chart chart_, VectorField field_,
                  ProjectorPolicy policy_ = ProjectorPolicy::thermodynamic,
                  std::optional<Mat> custom = std::nullopt,
                  std::function<void(const std::string&)> notify_ = {})
        : h(std::move(h_)),
          chart(std::move(chart_)),
          field(std::move(field_)),
          policy(policy_),
          custom_matrix(std::move(custom)),
          notify(std::move(notify_)) {}
};

/// Projection matrix at chart parameter p under the system's policy. The
/// thermodynamic policy falls back to the metric-orthogonal projector at
/// critical or non-transversal points and reports the switch via notify.
[[nodiscard]] inline Mat projection_matrix(const ReducedSystem& sys, const Vec& p) {
    switch (sys.policy) {
        case ProjectorPolicy::thermodynamic:
            try {
                return thermodynamic_projector(sys.h, sys.chart, p).matrix;
            } catch (const AtCriticalPoint& e) {
                if (sys.notify) sys.notify(std::string("orthogonal fallback: ") + e.what());
            } catch (const NonTransversal& e) {
                if (sys.notify) sys.notify(std::string("orthogonal fallback: ") + e.what());
            }
            return near_equilibrium_projector(sys.h, sys.chart, p).matrix;
        case ProjectorPolicy::curve: return curve_projector(sys.h, sys.chart, p).matrix;
        case ProjectorPolicy::orthogonal_euclidean: {
            Mat jac = chart_jacobian(sys.chart, p);
            check_immersion_rank(jac, sys.chart.label);
            auto factor = CholeskyFactor::compute(jac.transposed() * jac);
            if (!factor)
                throw RankDeficient("projection_matrix: euclidean Gram matrix not positive "
                                    "definite");
            return jac * factor->solve_matrix(jac.transposed());
        }
        case ProjectorPolicy::custom_matrix: {
            if (!sys.custom_matrix)
                throw Error("projection_matrix: custom_matrix policy without a matrix");
            const Mat& m = *sys.custom_matrix;
            if (!m.is_square() || m.rows() != sys.h.dim)
                throw DimensionMismatch("projection_matrix: custom matrix must be n x n");
            return m;
        }
    }
    throw Error("projection_matrix: unknown policy");
}

/// Chart-coordinate velocity: solves jac(p) pdot = P_x W(F(p)) via the metric
/// normal equations (J^T G J) pdot = J^T G v, exact whenever v is tangent.
[[nodiscard]] inline Vec reduced_rhs(const ReducedSystem& sys, const Vec& p) {
    Vec x = chart_point(sys.chart, p);
    Vec v = projection_matrix(sys, p) * sys.field.eval(x);
    Mat jac = chart_jacobian(sys.chart, p);
    Mat g = sys.h.hessian(x);
    auto factor = CholeskyFactor::compute(jac.transposed() * (g * jac));
    if (!factor) throw RankDeficient("reduced_rhs: metric Gram matrix not positive definite");
    return factor->solve(jac.transposed() * (g * v));
}

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

enum class TrajectoryStatus { ok, step_failure, domain_exit };

[[nodiscard]] inline const char* to_string(TrajectoryStatus s) {
    switch (s) {
        case TrajectoryStatus::ok: return "ok";
        case TrajectoryStatus::step_failure: return "step_failure";
        case TrajectoryStatus::domain_exit: return "domain_exit";
    }
    return "unknown";
}

struct Trajectory {
    std::size_t m = 0;
    std::size_t n = 0;
    double dt = 0.0;
    std::vector<double> times;
    std::vector<Vec> params;
    std::vector<Vec> states;
    std::vector<double> h_values;
    std::vector<double> full_dissipation;
    std::vector<double> reduced_dissipation;
    TrajectoryStatus status = TrajectoryStatus::ok;
    std::size_t failed_step = 0;  // meaningful when status != ok
    std::string note;
};

namespace detail {

inline void record_sample(const ReducedSystem& sys, Trajectory& traj, double t, const Vec& p) {
    Vec x = chart_point(sys.chart, p);
    const double h_value = sys.h.value(x);
    Vec w = sys.field.eval(x);
    Vec v = projection_matrix(sys, p) * w;
    Vec grad = sys.h.grad(x);
    for (double c : p)
        if (!std::isfinite(c)) throw Error("integration produced a non-finite parameter");
    if (!std::isfinite(h_value)) throw Error("integration produced a non-finite H value");
    traj.times.push_back(t);
    traj.params.push_back(p);
    traj.states.push_back(std::move(x));
    traj.h_values.push_back(h_value);
    traj.full_dissipation.push_back(dot(grad, w));
    traj.reduced_dissipation.push_back(dot(grad, v));
}

}  // namespace detail

/// Classical fixed-step fourth-order Runge-Kutta on reduced_rhs. Projector
/// errors and domain exits stop the integration early; already recorded rows
/// stay valid data and the status (with step index and cause) says why.
[[nodiscard]] inline Trajectory integrate(const ReducedSystem& sys, const Vec& p0, double dt,
                                          std::size_t steps) {
    if (!(dt > 0.0)) throw Error("integrate: dt must be positive");
    Trajectory traj;
    traj.m = sys.chart.m;
    traj.n = sys.chart.n;
    traj.dt = dt;

    Vec p = p0;
    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        try {
            if (k > 0) {
                Vec k1 = reduced_rhs(sys, p);
                Vec k2 = reduced_rhs(sys, axpy(p, 0.5 * dt, k1));
                Vec k3 = reduced_rhs(sys, axpy(p, 0.5 * dt, k2));
                Vec k4 = reduced_rhs(sys, axpy(p, dt, k3));
                Vec increment = add(add(k1, k4), scaled(add(k2, k3), 2.0));
                p = axpy(p, dt / 6.0, increment);
            }
            detail::record_sample(sys, traj, t, p);
        } catch (const DomainViolation& e) {
            traj.status = TrajectoryStatus::domain_exit;
            traj.failed_step = k;
            traj.note = e.what();
            break;
        } catch (const Error& e) {
            traj.status = TrajectoryStatus::step_failure;
            traj.failed_step = k;
            traj.note = e.what();
            break;
        }
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Audit
// ---------------------------------------------------------------------------

struct AuditReport {
    double max_dissipation_gap = 0.0;       // max |full - reduced| over the trajectory
    std::size_t sign_violations = 0;        // reduced > 1e-12 while full <= 0
    std::size_t monotonicity_violations = 0;  // H increase beyond the RK4 allowance
    std::size_t steps_completed = 0;
    std::string status;
};

/// Entropy-production audit: value-preservation gap, dissipativity sign
/// violations, and H-monotonicity against the 10 dt^5 local RK4 allowance.
[[nodiscard]] inline AuditReport audit(const Trajectory& traj) {
    AuditReport report;
    report.status = to_string(traj.status);
    if (traj.times.empty()) return report;
    report.steps_completed = traj.times.size() - 1;
    const double h_tol = 10.0 * std::pow(traj.dt, 5);
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        report.max_dissipation_gap =
            std::max(report.max_dissipation_gap,
                     std::abs(traj.full_dissipation[k] - traj.reduced_dissipation[k]));
        if (traj.full_dissipation[k] <= 0.0 && traj.reduced_dissipation[k] > 1e-12)
            ++report.sign_violations;
        if (k > 0 && traj.h_values[k] > traj.h_values[k - 1] + h_tol)
            ++report.monotonicity_violations;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace detail {

inline void write_g17(std::ostream& out, double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    out << buffer;
}

}  // namespace detail

/// CSV with the fixed column contract t,p_1..p_m,x_1..x_n,H,diss_full,
/// diss_reduced; floating point at 17 significant digits.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    out << "t";
    for (std::size_t j = 1; j <= traj.m; ++j) out << ",p_" << j;
    for (std::size_t j = 1; j <= traj.n; ++j) out << ",x_" << j;
    out << ",H,diss_full,diss_reduced\n";
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        detail::write_g17(out, traj.times[k]);
        for (double c : traj.params[k]) {
            out << ',';
            detail::write_g17(out, c);
        }
        for (double c : traj.states[k]) {
            out << ',';
            detail::write_g17(out, c);
        }
        out << ',';
        detail::write_g17(out, traj.h_values[k]);
        out << ',';
        detail::write_g17(out, traj.full_dissipation[k]);
        out << ',';
        detail::write_g17(out, traj.reduced_dissipation[k]);
        out << '\n';
    }
}

}  // namespace dissipath
