#pragma once

// Monotone trees embedded in state space: H restricted to the tree is an
// internal coordinate, every arc is oriented away from the root (the unique
// H-minimal node) with dH/ds above a positive floor, and dissipative motion
// projected onto the tree is always rootward with dh/dt equal to the full
// entropy production. Arc motions are glued at nodes along the unique path
// to the root; the root itself absorbs trajectories (clamp, flagged).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dynamics.hpp"
#include "errors.hpp"
#include "linalg.hpp"
#include "lyapunov.hpp"
#include "manifold.hpp"

namespace dissipath {

/// Positive floor for d(H o curve)/ds along oriented arcs.
inline constexpr double monotonicity_floor = 1e-6;

struct TreeNode {
    std::string id;
    Vec position;
};

/// Arc curve is a one-dimensional chart over s in [0,1]; after make_tree the
/// orientation is away from the root: curve(0) at `from` (rootward endpoint),
/// curve(1) at `to`.
struct TreeArc {
    std::string id;
    std::string from;
    std::string to;
    Chart curve;
};

struct MonotoneTree {
    std::vector<TreeNode> nodes;
    std::vector<TreeArc> arcs;
    std::string root;
    std::map<std::string, std::size_t> node_index;
    std::map<std::string, std::size_t> arc_index;
    std::map<std::string, std::string> parent_arc;  // node id -> arc id ("" at root)
};

/// State on the tree; an empty arc_id means "at the root node".
struct TreeState {
    std::string arc_id;
    double s = 0.0;
    Vec x;
    double h = 0.0;
};

// ---------------------------------------------------------------------------
// Arc curve catalog
// ---------------------------------------------------------------------------

/// Straight segment from a to b over s in [0,1].
[[nodiscard]] inline Chart make_segment_curve(Vec a, Vec b) {
    require_same_size(a, b, "make_segment_curve");
    Chart c;
    c.m = 1;
    c.n = a.size();
    c.param_domain = ParamBox::bounds({0.0}, {1.0});
    c.label = "segment";
    Vec direction = sub(b, a);
    c.embed = [a = std::move(a), direction](const Vec& s) { return axpy(a, s[0], direction); };
    c.jac = [direction](const Vec&) { return Mat::from_columns({direction}); };
    return c;
}

/// Quadratic Bezier curve from a to b with control point c over s in [0,1].
[[nodiscard]] inline Chart make_quadratic_bezier_curve(Vec a, Vec control, Vec b) {
    require_same_size(a, b, "make_quadratic_bezier_curve");
    require_same_size(a, control, "make_quadratic_bezier_curve");
    Chart c;
    c.m = 1;
    c.n = a.size();
    c.param_domain = ParamBox::bounds({0.0}, {1.0});
    c.label = "bezier2";
    c.embed = [a, control, b](const Vec& p) {
        const double s = p[0];
        const double w0 = (1.0 - s) * (1.0 - s);
        const double w1 = 2.0 * s * (1.0 - s);
        const double w2 = s * s;
        Vec x(a.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            x[i] = w0 * a[i] + w1 * control[i] + w2 * b[i];
        return x;
    };
    c.jac = [a, control, b](const Vec& p) {
        const double s = p[0];
        Vec t(a.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            t[i] = 2.0 * (1.0 - s) * (control[i] - a[i]) + 2.0 * s * (b[i] - control[i]);
        return Mat::from_columns({t});
    };
    return c;
}

/// Reverses an arc curve: s -> 1 - s.
[[nodiscard]] inline Chart flip_arc_curve(const Chart& c) {
    Chart flipped;
    flipped.m = 1;
    flipped.n = c.n;
    flipped.param_domain = ParamBox::bounds({0.0}, {1.0});
    flipped.label = c.label;
    flipped.embed = [inner = c.embed](const Vec& p) { return inner({1.0 - p[0]}); };
    if (c.jac) {
        flipped.jac = [inner = c.jac](const Vec& p) {
            Mat j = inner({1.0 - p[0]});
            j *= -1.0;
            return j;
        };
    }
    return flipped;
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

namespace detail {

inline double endpoint_gap(const Chart& curve, double s, const Vec& position) {
    return norm(sub(chart_point(curve, {s}), position));
}

}  // namespace detail

/// Builds a monotone tree: checks tree structure (connected, acyclic, unique
/// ids), selects the root as the unique H-minimal node, orients every arc
/// away from the root (flipping curves as needed), and checks that arc
/// endpoints coincide with node positions to 1e-9.
[[nodiscard]] inline MonotoneTree make_tree(std::vector<TreeNode> nodes,
                                            std::vector<TreeArc> arcs,
                                            const LyapunovFunction& h) {
    MonotoneTree tree;
    if (nodes.empty()) throw NotATree("make_tree: no nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].id.empty()) throw NotATree("make_tree: empty node id");
        if (nodes[i].position.size() != h.dim)
            throw DimensionMismatch("make_tree: node '" + nodes[i].id + "' has dimension " +
                                    std::to_string(nodes[i].position.size()));
        if (!tree.node_index.emplace(nodes[i].id, i).second)
            throw NotATree("make_tree: duplicate node id '" + nodes[i].id + "'");
    }
    if (arcs.size() + 1 != nodes.size())
        throw NotATree("make_tree: " + std::to_string(nodes.size()) + " nodes need " +
                       std::to_string(nodes.size() - 1) + " arcs, got " +
                       std::to_string(arcs.size()));
    for (std::size_t i = 0; i < arcs.size(); ++i) {
        const TreeArc& arc = arcs[i];
        if (arc.id.empty()) throw NotATree("make_tree: empty arc id");
        if (!tree.arc_index.emplace(arc.id, i).second)
            throw NotATree("make_tree: duplicate arc id '" + arc.id + "'");
        if (!tree.node_index.count(arc.from) || !tree.node_index.count(arc.to))
            throw NotATree("make_tree: arc '" + arc.id + "' references an unknown node");
        if (arc.curve.m != 1 || arc.curve.n != h.dim)
            throw DimensionMismatch("make_tree: arc '" + arc.id + "' curve has wrong shape");
    }

    // the root is the unique node of minimal H
    std::vector<double> node_h(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) node_h[i] = h.value(nodes[i].position);
    std::size_t root_idx = 0;
    for (std::size_t i = 1; i < nodes.size(); ++i)
        if (node_h[i] < node_h[root_idx]) root_idx = i;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (i != root_idx && node_h[i] <= node_h[root_idx] + 1e-12)
            throw NotATree("make_tree: minimal node is not unique ('" + nodes[root_idx].id +
                           "' vs '" + nodes[i].id + "')");
    tree.root = nodes[root_idx].id;

    // breadth-first orientation away from the root
    std::map<std::string, std::vector<std::size_t>> touching;
    for (std::size_t i = 0; i < arcs.size(); ++i) {
        touching[arcs[i].from].push_back(i);
        touching[arcs[i].to].push_back(i);
    }
    std::set<std::string> visited{tree.root};
    std::set<std::size_t> oriented;
    std::deque<std::string> frontier{tree.root};
    tree.parent_arc[tree.root] = "";
    while (!frontier.empty()) {
        std::string u = frontier.front();
        frontier.pop_front();
        for (std::size_t i : touching[u]) {
            if (oriented.count(i)) continue;
            TreeArc& arc = arcs[i];
            const std::string v = (arc.from == u) ? arc.to : arc.from;
            if (visited.count(v))
                throw NotATree("make_tree: cycle detected through arc '" + arc.id + "'");
            arc.from = u;
            arc.to = v;
            const Vec& pos_u = nodes[tree.node_index[u]].position;
            const Vec& pos_v = nodes[tree.node_index[v]].position;
            const double tol = 1e-9 * (1.0 + norm(pos_u) + norm(pos_v));
            if (detail::endpoint_gap(arc.curve, 0.0, pos_u) > tol ||
                detail::endpoint_gap(arc.curve, 1.0, pos_v) > tol) {
                Chart flipped = flip_arc_curve(arc.curve);
                if (detail::endpoint_gap(flipped, 0.0, pos_u) > tol ||
                    detail::endpoint_gap(flipped, 1.0, pos_v) > tol)
                    throw NotATree("make_tree: arc '" + arc.id +
                                   "' endpoints do not match its node positions");
                arc.curve = std::move(flipped);
            }
            oriented.insert(i);
            visited.insert(v);
            tree.parent_arc[v] = arc.id;
            frontier.push_back(v);
        }
    }
    if (visited.size() != nodes.size()) throw NotATree("make_tree: tree is not connected");

    tree.nodes = std::move(nodes);
    tree.arcs = std::move(arcs);
    return tree;
}

[[nodiscard]] inline const TreeNode& tree_node(const MonotoneTree& tree, const std::string& id) {
    auto it = tree.node_index.find(id);
    if (it == tree.node_index.end()) throw Error("unknown tree node '" + id + "'");
    return tree.nodes[it->second];
}

[[nodiscard]] inline const TreeArc& tree_arc(const MonotoneTree& tree, const std::string& id) {
    auto it = tree.arc_index.find(id);
    if (it == tree.arc_index.end()) throw Error("unknown tree arc '" + id + "'");
    return tree.arcs[it->second];
}

/// State on an arc at parameter s.
[[nodiscard]] inline TreeState tree_state(const MonotoneTree& tree, const LyapunovFunction& h,
                                          const std::string& arc_id, double s) {
    const TreeArc& arc = tree_arc(tree, arc_id);
    if (!(s >= 0.0 && s <= 1.0))
        throw DomainViolation("tree_state: s = " + std::to_string(s) + " outside [0,1]");
    Vec x = chart_point(arc.curve, {s});
    const double value = h.value(x);
    return TreeState{arc_id, s, std::move(x), value};
}

/// State sitting at the root node.
[[nodiscard]] inline TreeState root_state(const MonotoneTree& tree, const LyapunovFunction& h) {
    const TreeNode& node = tree_node(tree, tree.root);
    return TreeState{"", 0.0, node.position, h.value(node.position)};
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct MonotoneReport {
    bool passed = true;
    std::vector<std::string> offending_arcs;
    double min_derivative = std::numeric_limits<double>::infinity();
};

/// Checks d(H o curve)/ds >= monotonicity_floor on `grid` evenly spaced
/// points per arc, endpoints included, by finite differences (central in the
/// interior, one-sided at the arc ends).
[[nodiscard]] inline MonotoneReport validate_monotone(const MonotoneTree& tree,
                                                      const LyapunovFunction& h,
                                                      std::size_t grid) {
    if (grid < 2) throw Error("validate_monotone: grid must be at least 2");
    MonotoneReport report;
    const double step = 1e-6;
    for (const TreeArc& arc : tree.arcs) {
        bool arc_ok = true;
        for (std::size_t k = 0; k < grid; ++k) {
            const double s = static_cast<double>(k) / static_cast<double>(grid - 1);
            const double lo = std::max(0.0, s - step);
            const double hi = std::min(1.0, s + step);
            const double d = (h.value(chart_point(arc.curve, {hi})) -
                              h.value(chart_point(arc.curve, {lo}))) /
                             (hi - lo);
            report.min_derivative = std::min(report.min_derivative, d);
            if (d < monotonicity_floor) arc_ok = false;
        }
        if (!arc_ok) {
            report.passed = false;
            report.offending_arcs.push_back(arc.id);
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Paths and rates
// ---------------------------------------------------------------------------

/// Ordered arc ids from the state down to the root. A state with s = 0 sits
/// at its arc's rootward node, so the path starts from that node.
[[nodiscard]] inline std::vector<std::string> path_to_root(const MonotoneTree& tree,
                                                           const TreeState& state) {
    std::vector<std::string> path;
    std::string node;
    if (state.arc_id.empty()) {
        node = tree.root;
    } else {
        const TreeArc& arc = tree_arc(tree, state.arc_id);
        if (state.s > 0.0) path.push_back(arc.id);
        node = arc.from;
    }
    while (node != tree.root) {
        const std::string& up = tree.parent_arc.at(node);
        path.push_back(up);
        node = tree_arc(tree, up).from;
    }
    return path;
}

/// d(H o curve)/ds by the chain rule (exact when the curve has an analytic
/// jacobian).
[[nodiscard]] inline double arc_slope(const LyapunovFunction& h, const TreeArc& arc, double s) {
    Vec x = chart_point(arc.curve, {s});
    Vec t = chart_jacobian(arc.curve, {s}).column(0);
    return dot(h.grad(x), t);
}

struct TreeRate {
    double ds_dt = 0.0;
    bool at_root = false;
};

namespace detail {

/// Raw arc speed without the root clamp; s is clamped into [0,1] for
/// evaluation so integrator stages may poke marginally past the ends.
[[nodiscard]] inline double raw_tree_rate(const MonotoneTree&, const LyapunovFunction& h,
                                          const VectorField& field, const TreeArc& arc,
                                          double s) {
    const double s_eval = std::clamp(s, 0.0, 1.0);
    const double slope = arc_slope(h, arc, s_eval);
    if (slope < monotonicity_floor)
        throw MonotonicityFloorViolated("arc '" + arc.id + "': dH/ds = " + std::to_string(slope) +
                                        " at s = " + std::to_string(s_eval));
    Vec x = chart_point(arc.curve, {s_eval});
    return dissipation(h, x, field.eval(x)) / slope;
}

}  // namespace detail

/// Arc speed ds/dt = (dh/dt) / (dH/ds). At the root the state is clamped:
/// rate 0 with the at_root flag set (a dissipative field can only push
/// rootward, and there is no arc to continue on).
[[nodiscard]] inline TreeRate tree_reduced_rhs(const MonotoneTree& tree,
                                               const LyapunovFunction& h,
                                               const VectorField& field, const TreeState& state) {
    if (state.arc_id.empty()) return TreeRate{0.0, true};
    const TreeArc& arc = tree_arc(tree, state.arc_id);
    if (state.s <= 1e-12 && arc.from == tree.root) return TreeRate{0.0, true};
    return TreeRate{detail::raw_tree_rate(tree, h, field, arc, state.s), false};
}

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

enum class TreeRunStatus { ok, clamped_at_root, step_failure, domain_exit };

[[nodiscard]] inline const char* to_string(TreeRunStatus s) {
    switch (s) {
        case TreeRunStatus::ok: return "ok";
        case TreeRunStatus::clamped_at_root: return "clamped_at_root";
        case TreeRunStatus::step_failure: return "step_failure";
        case TreeRunStatus::domain_exit: return "domain_exit";
    }
    return "unknown";
}

/// Rows are recorded at t = k dt; an empty arc_id marks a clamped-at-root row
/// (realized dh/dt is zero there by the clamp, not by the field).
struct TreeTrajectory {
    std::size_t n = 0;
    double dt = 0.0;
    std::vector<double> times;
    std::vector<std::string> arc_ids;
    std::vector<double> s_values;
    std::vector<Vec> states;
    std::vector<double> h_values;
    std::vector<double> full_dissipation;
    std::vector<double> realized_dh_dt;  // ds/dt * dH/ds at the recorded state
    TreeRunStatus status = TreeRunStatus::ok;
    std::size_t failed_step = 0;
    std::string note;
};

namespace detail {

inline void record_tree_sample(const MonotoneTree& tree, const LyapunovFunction& h,
                               const VectorField& field, TreeTrajectory& traj, double t,
                               const std::string& arc_id, double s) {
    Vec x;
    double realized = 0.0;
    if (arc_id.empty()) {
        x = tree_node(tree, tree.root).position;
    } else {
        const TreeArc& arc = tree_arc(tree, arc_id);
        x = chart_point(arc.curve, {std::clamp(s, 0.0, 1.0)});
        realized = raw_tree_rate(tree, h, field, arc, s) * arc_slope(h, arc, std::clamp(s, 0.0, 1.0));
    }
    const double value = h.value(x);
    if (!std::isfinite(value) || !std::isfinite(s))
        throw Error("tree integration produced a non-finite state");
    traj.times.push_back(t);
    traj.arc_ids.push_back(arc_id);
    traj.s_values.push_back(arc_id.empty() ? 0.0 : s);
    traj.h_values.push_back(value);
    traj.full_dissipation.push_back(dissipation(h, x, field.eval(x)));
    traj.realized_dh_dt.push_back(realized);
    traj.states.push_back(std::move(x));
}

}  // namespace detail

/// Fixed-step RK4 on the arc parameter with node gluing: when a step crosses
/// the arc's rootward node, the crossing time is located by linear
/// interpolation in h (first order), the remainder of the step continues on
/// the next arc of the path to the root, and reaching the root clamps the
/// state there for the rest of the run.
[[nodiscard]] inline TreeTrajectory integrate_tree(const MonotoneTree& tree,
                                                   const LyapunovFunction& h,
                                                   const VectorField& field,
                                                   const TreeState& state0, double dt,
                                                   std::size_t steps) {
    if (!(dt > 0.0)) throw Error("integrate_tree: dt must be positive");
    TreeTrajectory traj;
    traj.n = h.dim;
    traj.dt = dt;

    std::string arc_id = state0.arc_id;
    double s = state0.s;
    bool at_root = arc_id.empty();
    if (!at_root) {
        const TreeArc& arc = tree_arc(tree, arc_id);
        if (!(s >= 0.0 && s <= 1.0))
            throw DomainViolation("integrate_tree: initial s outside [0,1]");
        if (s <= 1e-12 && arc.from == tree.root) {
            at_root = true;
            arc_id.clear();
            s = 0.0;
        }
    }
    if (at_root) traj.status = TreeRunStatus::clamped_at_root;

    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        try {
            if (k > 0 && !at_root) {
                double remaining = dt;
                for (int guard = 0; remaining > 0.0; ++guard) {
                    if (guard > 64)
                        throw Error("integrate_tree: too many node crossings in one step");
                    const TreeArc& arc = tree_arc(tree, arc_id);
                    auto rate = [&](double sv) {
                        return detail::raw_tree_rate(tree, h, field, arc, sv);
                    };
                    const double k1 = rate(s);
                    const double k2 = rate(s + 0.5 * remaining * k1);
                    const double k3 = rate(s + 0.5 * remaining * k2);
                    const double k4 = rate(s + remaining * k3);
                    const double s_new = s + remaining / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                    if (s_new > 1.0 + 1e-9)
                        throw Error("trajectory moves outward past the end of arc '" + arc.id +
                                    "'");
                    if (s_new >= 0.0) {
                        s = std::min(s_new, 1.0);
                        break;
                    }
                    // crossed the rootward node: locate the crossing time by
                    // linear interpolation in h, then glue onto the next arc
                    Vec x_start = chart_point(arc.curve, {s});
                    const double h_start = h.value(x_start);
                    const double h_node = h.value(tree_node(tree, arc.from).position);
                    const double dh_dt = dissipation(h, x_start, field.eval(x_start));
                    double theta = 1.0;
                    if (dh_dt < -1e-300)
                        theta = std::clamp((h_node - h_start) / (dh_dt * remaining), 0.0, 1.0);
                    remaining *= (1.0 - theta);
                    if (arc.from == tree.root) {
                        at_root = true;
                        arc_id.clear();
                        s = 0.0;
                        traj.status = TreeRunStatus::clamped_at_root;
                        break;
                    }
                    arc_id = tree.parent_arc.at(arc.from);
                    s = 1.0;
                }
            }
            detail::record_tree_sample(tree, h, field, traj, t, arc_id, s);
        } catch (const DomainViolation& e) {
            traj.status = TreeRunStatus::domain_exit;
            traj.failed_step = k;
            traj.note = e.what();
            break;
        } catch (const Error& e) {
            traj.status = TreeRunStatus::step_failure;
            traj.failed_step = k;
            traj.note = e.what();
            break;
        }
    }
    return traj;
}

/// Entropy-production audit of a tree run. Clamped rows (empty arc id) are
/// stationary by the clamp, not by the field, so they are excluded from the
/// gap and sign statistics.
[[nodiscard]] inline AuditReport audit(const TreeTrajectory& traj) {
    AuditReport report;
    report.status = to_string(traj.status);
    if (traj.times.empty()) return report;
    report.steps_completed = traj.times.size() - 1;
    const double h_tol = 10.0 * std::pow(traj.dt, 5);
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        if (!traj.arc_ids[k].empty()) {
            report.max_dissipation_gap =
                std::max(report.max_dissipation_gap,
                         std::abs(traj.full_dissipation[k] - traj.realized_dh_dt[k]));
            if (traj.full_dissipation[k] <= 0.0 && traj.realized_dh_dt[k] > 1e-12)
                ++report.sign_violations;
        }
        if (k > 0 && traj.h_values[k] > traj.h_values[k - 1] + h_tol)
            ++report.monotonicity_violations;
    }
    return report;
}

/// CSV with the fixed column contract t,arc_id,s,x_1..x_n,h,diss_full;
/// floating point at 17 significant digits; empty arc_id marks root rows.
inline void write_tree_csv(std::ostream& out, const TreeTrajectory& traj) {
    out << "t,arc_id,s";
    for (std::size_t j = 1; j <= traj.n; ++j) out << ",x_" << j;
    out << ",h,diss_full\n";
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        detail::write_g17(out, traj.times[k]);
        out << ',' << traj.arc_ids[k] << ',';
        detail::write_g17(out, traj.s_values[k]);
        for (double c : traj.states[k]) {
            out << ',';
            detail::write_g17(out, c);
        }
        out << ',';
        detail::write_g17(out, traj.h_values[k]);
        out << ',';
        detail::write_g17(out, traj.full_dissipation[k]);
        out << '\n';
    }
}

}  // namespace dissipath
