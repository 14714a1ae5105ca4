#pragma once

// Scenario configuration: the JSON schema that binds the Lyapunov, chart,
// field, and tree catalogs into a runnable reduction scenario. A scenario
// file names every ingredient by its catalog id; this header turns the JSON
// into built objects, performs the full static validation (dimensions,
// definiteness probe, immersion rank, transversality, tree monotonicity),
// and renders the audit and counterexample reports back to JSON.
//
// Failure taxonomy: ParseError for text that does not follow the schema
// (missing or mistyped fields, unknown keys), the semantic error classes for
// configurations that parse but cannot work (collected by validate_scenario
// as categorized issues), IoError for file trouble.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "counterexamples.hpp"
#include "dynamics.hpp"
#include "errors.hpp"
#include "linalg.hpp"
#include "lyapunov.hpp"
#include "manifold.hpp"
#include "projector.hpp"
#include "tree.hpp"

namespace dissipath {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// JSON field extraction
// ---------------------------------------------------------------------------

namespace detail {

[[nodiscard]] inline const json& require_field(const json& obj, const char* key,
                                               const std::string& where) {
    if (!obj.is_object()) throw ParseError(where + ": expected a JSON object");
    auto it = obj.find(key);
    if (it == obj.end())
        throw ParseError(where + ": missing required field '" + std::string(key) + "'");
    return *it;
}

inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                                const std::string& where) {
    if (!obj.is_object()) throw ParseError(where + ": expected a JSON object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* key : allowed)
            if (it.key() == key) {
                known = true;
                break;
            }
        if (!known) throw ParseError(where + ": unknown field '" + it.key() + "'");
    }
}

[[nodiscard]] inline double parse_number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ParseError(where + ": expected a number");
    return j.get<double>();
}

[[nodiscard]] inline std::size_t parse_count(const json& j, const std::string& where) {
    if (!j.is_number_unsigned()) throw ParseError(where + ": expected a nonnegative integer");
    return j.get<std::size_t>();
}

[[nodiscard]] inline std::string parse_string(const json& j, const std::string& where) {
    if (!j.is_string()) throw ParseError(where + ": expected a string");
    return j.get<std::string>();
}

[[nodiscard]] inline Vec parse_vec(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty())
        throw ParseError(where + ": expected a non-empty array of numbers");
    Vec out;
    out.reserve(j.size());
    for (const json& c : j) {
        if (!c.is_number()) throw ParseError(where + ": expected a non-empty array of numbers");
        out.push_back(c.get<double>());
    }
    return out;
}

[[nodiscard]] inline std::vector<Vec> parse_vec_list(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty())
        throw ParseError(where + ": expected a non-empty array of vectors");
    std::vector<Vec> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(parse_vec(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

[[nodiscard]] inline Mat parse_mat(const json& j, const std::string& where) {
    std::vector<Vec> rows = parse_vec_list(j, where);
    const std::size_t cols = rows.front().size();
    Mat out(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols) throw ParseError(where + ": rows have mixed lengths");
        for (std::size_t k = 0; k < cols; ++k) out(i, k) = rows[i][k];
    }
    return out;
}

[[nodiscard]] inline json matrix_to_json(const Mat& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        rows.push_back(std::move(row));
    }
    return rows;
}

[[nodiscard]] inline std::string format_g(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.6g", value);
    return buffer;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Catalog builders: JSON block -> library object
// ---------------------------------------------------------------------------

/// Constructs the Lyapunov function named by spec["kind"]; ids match the
/// `catalog` subcommand listing.
[[nodiscard]] inline LyapunovFunction scenario_lyapunov(const json& spec) {
    const std::string kind =
        detail::parse_string(detail::require_field(spec, "kind", "lyapunov"), "lyapunov.kind");
    if (kind == "quadratic") {
        detail::reject_unknown_keys(spec, {"kind", "matrix", "center"}, "lyapunov");
        return make_quadratic(
            detail::parse_mat(detail::require_field(spec, "matrix", "lyapunov"),
                              "lyapunov.matrix"),
            detail::parse_vec(detail::require_field(spec, "center", "lyapunov"),
                              "lyapunov.center"));
    }
    if (kind == "kl" || kind == "kl_shifted" || kind == "burg") {
        detail::reject_unknown_keys(spec, {"kind", "x_eq"}, "lyapunov");
        Vec x_eq =
            detail::parse_vec(detail::require_field(spec, "x_eq", "lyapunov"), "lyapunov.x_eq");
        if (kind == "kl") return make_kl_divergence(std::move(x_eq));
        if (kind == "kl_shifted") return make_shifted_kl_divergence(std::move(x_eq));
        return make_burg_divergence(std::move(x_eq));
    }
    if (kind == "custom_f") {
        detail::reject_unknown_keys(spec, {"kind", "x_eq", "alpha"}, "lyapunov");
        return make_alpha_divergence(
            detail::parse_vec(detail::require_field(spec, "x_eq", "lyapunov"), "lyapunov.x_eq"),
            detail::parse_number(detail::require_field(spec, "alpha", "lyapunov"),
                                 "lyapunov.alpha"));
    }
    throw Error("lyapunov: unknown kind '" + kind +
                "' (known: quadratic kl kl_shifted burg custom_f)");
}

/// Constructs the chart named by spec["kind"].
[[nodiscard]] inline Chart scenario_chart(const json& spec) {
    const std::string kind =
        detail::parse_string(detail::require_field(spec, "kind", "chart"), "chart.kind");
    if (kind == "line") {
        detail::reject_unknown_keys(spec, {"kind", "origin", "direction"}, "chart");
        return make_line_chart(
            detail::parse_vec(detail::require_field(spec, "origin", "chart"), "chart.origin"),
            detail::parse_vec(detail::require_field(spec, "direction", "chart"),
                              "chart.direction"));
    }
    if (kind == "affine") {
        detail::reject_unknown_keys(spec, {"kind", "origin", "directions"}, "chart");
        return make_affine_chart(
            detail::parse_vec(detail::require_field(spec, "origin", "chart"), "chart.origin"),
            detail::parse_vec_list(detail::require_field(spec, "directions", "chart"),
                                   "chart.directions"));
    }
    if (kind == "poly_curve") {
        detail::reject_unknown_keys(spec, {"kind", "coefficients"}, "chart");
        return make_polynomial_curve(detail::parse_vec_list(
            detail::require_field(spec, "coefficients", "chart"), "chart.coefficients"));
    }
    if (kind == "convex_combination") {
        detail::reject_unknown_keys(spec, {"kind", "a", "b"}, "chart");
        return make_convex_combination_chart(
            detail::parse_vec(detail::require_field(spec, "a", "chart"), "chart.a"),
            detail::parse_vec(detail::require_field(spec, "b", "chart"), "chart.b"));
    }
    if (kind == "circle") {
        detail::reject_unknown_keys(spec, {"kind", "center", "radius"}, "chart");
        return make_circle_chart(
            detail::parse_vec(detail::require_field(spec, "center", "chart"), "chart.center"),
            detail::parse_number(detail::require_field(spec, "radius", "chart"),
                                 "chart.radius"));
    }
    if (kind == "paraboloid_sheet") {
        detail::reject_unknown_keys(spec, {"kind", "origin"}, "chart");
        return make_paraboloid_sheet_chart(
            detail::parse_vec(detail::require_field(spec, "origin", "chart"), "chart.origin"));
    }
    throw Error("chart: unknown kind '" + kind +
                "' (known: line affine poly_curve convex_combination circle paraboloid_sheet)");
}

/// Constructs the vector field named by spec["kind"]; the markov field
/// defaults its equilibrium to the Lyapunov equilibrium.
[[nodiscard]] inline VectorField scenario_field(const json& spec, const LyapunovFunction& h) {
    const std::string kind =
        detail::parse_string(detail::require_field(spec, "kind", "field"), "field.kind");
    if (kind == "linear") {
        detail::reject_unknown_keys(spec, {"kind", "matrix", "center"}, "field");
        Vec center;
        if (spec.contains("center")) center = detail::parse_vec(spec["center"], "field.center");
        return make_linear_field(
            detail::parse_mat(detail::require_field(spec, "matrix", "field"), "field.matrix"),
            std::move(center));
    }
    if (kind == "gradient_flow") {
        detail::reject_unknown_keys(spec, {"kind"}, "field");
        return make_gradient_flow(h);
    }
    if (kind == "markov") {
        detail::reject_unknown_keys(spec, {"kind", "matrix", "x_eq"}, "field");
        Vec x_eq = spec.contains("x_eq") ? detail::parse_vec(spec["x_eq"], "field.x_eq")
                                         : h.equilibrium;
        return make_markov_field(
            detail::parse_mat(detail::require_field(spec, "matrix", "field"), "field.matrix"),
            x_eq);
    }
    throw Error("field: unknown kind '" + kind + "' (known: linear gradient_flow markov)");
}

/// Builds the monotone tree described by nodes and arcs; arc curves are
/// drawn from the curve catalog (segment, bezier2) between node positions.
[[nodiscard]] inline MonotoneTree scenario_tree(const json& spec, const LyapunovFunction& h) {
    detail::reject_unknown_keys(spec, {"nodes", "arcs"}, "tree");
    const json& node_list = detail::require_field(spec, "nodes", "tree");
    const json& arc_list = detail::require_field(spec, "arcs", "tree");
    if (!node_list.is_array()) throw ParseError("tree.nodes: expected an array");
    if (!arc_list.is_array()) throw ParseError("tree.arcs: expected an array");
    std::vector<TreeNode> nodes;
    std::map<std::string, Vec> positions;
    for (const json& entry : node_list) {
        detail::reject_unknown_keys(entry, {"id", "position"}, "tree node");
        TreeNode node;
        node.id = detail::parse_string(detail::require_field(entry, "id", "tree node"),
                                       "tree node id");
        node.position = detail::parse_vec(detail::require_field(entry, "position", "tree node"),
                                          "tree node '" + node.id + "' position");
        positions.emplace(node.id, node.position);
        nodes.push_back(std::move(node));
    }
    std::vector<TreeArc> arcs;
    for (const json& entry : arc_list) {
        TreeArc arc;
        arc.id = detail::parse_string(detail::require_field(entry, "id", "tree arc"),
                                      "tree arc id");
        const std::string where = "tree arc '" + arc.id + "'";
        arc.from = detail::parse_string(detail::require_field(entry, "from", where), where);
        arc.to = detail::parse_string(detail::require_field(entry, "to", where), where);
        auto from_pos = positions.find(arc.from);
        auto to_pos = positions.find(arc.to);
        if (from_pos == positions.end())
            throw NotATree(where + ": unknown endpoint node '" + arc.from + "'");
        if (to_pos == positions.end())
            throw NotATree(where + ": unknown endpoint node '" + arc.to + "'");
        const std::string curve = detail::parse_string(
            detail::require_field(entry, "curve", where), where + " curve");
        if (curve == "segment") {
            detail::reject_unknown_keys(entry, {"id", "from", "to", "curve"}, where);
            arc.curve = make_segment_curve(from_pos->second, to_pos->second);
        } else if (curve == "bezier2") {
            detail::reject_unknown_keys(entry, {"id", "from", "to", "curve", "control"}, where);
            arc.curve = make_quadratic_bezier_curve(
                from_pos->second,
                detail::parse_vec(detail::require_field(entry, "control", where),
                                  where + " control"),
                to_pos->second);
        } else {
            throw Error(where + ": unknown curve kind '" + curve +
                        "' (known: segment bezier2)");
        }
        arcs.push_back(std::move(arc));
    }
    return make_tree(std::move(nodes), std::move(arcs), h);
}

/// Parses a projector policy name; case does not matter, hyphens and
/// underscores are equivalent, and "orthogonal" is accepted for the
/// Euclidean baseline.
[[nodiscard]] inline ProjectorPolicy parse_policy(std::string name) {
    for (char& c : name) {
        if (c == '-') c = '_';
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (name == "thermodynamic") return ProjectorPolicy::thermodynamic;
    if (name == "curve") return ProjectorPolicy::curve;
    if (name == "orthogonal" || name == "orthogonal_euclidean")
        return ProjectorPolicy::orthogonal_euclidean;
    if (name == "custom_matrix") return ProjectorPolicy::custom_matrix;
    throw Error("projector_policy: unknown policy '" + name +
                "' (known: thermodynamic curve orthogonal_euclidean custom_matrix)");
}

// ---------------------------------------------------------------------------
// Scenario: the fully built configuration
// ---------------------------------------------------------------------------

/// Start position for a tree run; omitting it in the config starts at root.
struct TreeStart {
    std::string arc;
    double s = 1.0;
};

/// Rank-one counterexample demonstration block: a static projector matrix
/// probed with an explicit direction y, or with a search over the
/// metric-orthogonal complement of the given image basis.
struct RankOneSpec {
    Mat projector;
    std::optional<Vec> y;
    std::optional<Mat> image_basis;
    double a = 2.0;
    std::optional<Vec> witness;
};

struct CounterexampleSpec {
    Vec p;
    std::vector<double> tilts;
    std::size_t trials = 10000;
    std::optional<RankOneSpec> rank_one;
};

struct OutputSpec {
    std::string trajectory_csv = "trajectory.csv";
    std::string audit_json = "audit.json";
    std::string report_json = "report.json";
};

struct Scenario {
    LyapunovFunction h;
    std::optional<Chart> chart;
    std::optional<MonotoneTree> tree;
    std::optional<VectorField> field;
    ProjectorPolicy policy = ProjectorPolicy::thermodynamic;
    std::optional<Mat> projector_matrix;
    std::optional<Vec> p0;
    std::optional<TreeStart> start;
    bool has_integration = false;
    double dt = 0.0;
    std::size_t steps = 0;
    std::optional<CounterexampleSpec> counterexample;
    OutputSpec output;
    std::uint64_t seed = 0;
    std::size_t validation_grid = 64;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct ValidationIssue {
    std::string category;
    std::string message;
};

struct ValidationResult {
    bool valid = false;
    std::vector<ValidationIssue> issues;
    std::optional<Scenario> scenario;  // present exactly when valid
};

/// Stable machine-readable category for a semantic failure.
[[nodiscard]] inline std::string issue_category(const Error& e) {
    if (dynamic_cast<const NonTransversal*>(&e) != nullptr) return "non-transversal";
    if (dynamic_cast<const AtCriticalPoint*>(&e) != nullptr) return "at-critical-point";
    if (dynamic_cast<const DimensionMismatch*>(&e) != nullptr) return "dimension-mismatch";
    if (dynamic_cast<const RankDeficient*>(&e) != nullptr) return "rank-deficient";
    if (dynamic_cast<const NotPositiveDefinite*>(&e) != nullptr) return "not-positive-definite";
    if (dynamic_cast<const SingularHessian*>(&e) != nullptr) return "singular-hessian";
    if (dynamic_cast<const DomainViolation*>(&e) != nullptr) return "domain-violation";
    if (dynamic_cast<const BadRateMatrix*>(&e) != nullptr) return "bad-rate-matrix";
    if (dynamic_cast<const NotATree*>(&e) != nullptr) return "not-a-tree";
    if (dynamic_cast<const MonotonicityFloorViolated*>(&e) != nullptr) return "non-monotone";
    if (dynamic_cast<const NoWitness*>(&e) != nullptr) return "no-witness";
    return "invalid";
}

namespace detail {

/// Static probes at one chart point: domain membership, metric positive
/// definiteness, immersion rank, and (for the policies that need it) the
/// transversality required by the dissipativity-preserving projector.
inline void probe_chart_point(const LyapunovFunction& h, const Chart& chart,
                              ProjectorPolicy policy, const Vec& p) {
    Vec x = chart_point(chart, p);
    MetricPoint mp = metric_point(h, x);
    (void)mp;
    check_immersion_rank(chart_jacobian(chart, p), chart.label);
    if (policy == ProjectorPolicy::thermodynamic || policy == ProjectorPolicy::curve)
        (void)thermodynamic_projector(h, chart, p);
}

}  // namespace detail

/// Full static validation: builds every configured ingredient, probes the
/// start point, and collects semantic problems as categorized issues.
/// Structural problems (schema violations) throw ParseError instead. On
/// success the built Scenario rides along in the result.
[[nodiscard]] inline ValidationResult validate_scenario(const json& cfg) {
    if (!cfg.is_object()) throw ParseError("scenario: top level must be a JSON object");
    detail::reject_unknown_keys(cfg,
                                {"lyapunov", "geometry", "field", "projector_policy",
                                 "projector_matrix", "integration", "counterexample", "output",
                                 "seed", "validation_grid"},
                                "scenario");

    ValidationResult result;
    Scenario s;
    auto collect = [&result](const Error& e) {
        result.issues.push_back({issue_category(e), e.what()});
    };

    if (cfg.contains("seed")) s.seed = detail::parse_count(cfg["seed"], "seed");
    if (cfg.contains("validation_grid")) {
        s.validation_grid = detail::parse_count(cfg["validation_grid"], "validation_grid");
        if (s.validation_grid < 2)
            result.issues.push_back({"invalid", "validation_grid: must be at least 2"});
    }
    if (cfg.contains("output")) {
        const json& output = cfg["output"];
        detail::reject_unknown_keys(output, {"trajectory_csv", "audit_json", "report_json"},
                                    "output");
        if (output.contains("trajectory_csv"))
            s.output.trajectory_csv =
                detail::parse_string(output["trajectory_csv"], "output.trajectory_csv");
        if (output.contains("audit_json"))
            s.output.audit_json = detail::parse_string(output["audit_json"], "output.audit_json");
        if (output.contains("report_json"))
            s.output.report_json =
                detail::parse_string(output["report_json"], "output.report_json");
    }

    bool have_h = false;
    try {
        s.h = scenario_lyapunov(detail::require_field(cfg, "lyapunov", "scenario"));
        have_h = true;
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        collect(e);
    }

    const json& geometry = detail::require_field(cfg, "geometry", "scenario");
    detail::reject_unknown_keys(geometry, {"chart", "tree"}, "geometry");
    const bool has_chart_spec = geometry.contains("chart");
    const bool has_tree_spec = geometry.contains("tree");
    if (has_chart_spec == has_tree_spec)
        throw ParseError("geometry: needs exactly one of 'chart' or 'tree'");
    if (has_chart_spec) {
        try {
            s.chart = scenario_chart(geometry["chart"]);
            if (have_h && s.chart->n != s.h.dim)
                throw DimensionMismatch(
                    "geometry: chart ambient dimension " + std::to_string(s.chart->n) +
                    " does not match the lyapunov dimension " + std::to_string(s.h.dim));
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            collect(e);
            s.chart.reset();
        }
    }
    if (has_tree_spec && have_h) {
        try {
            s.tree = scenario_tree(geometry["tree"], s.h);
            if (s.validation_grid >= 2) {
                MonotoneReport mono = validate_monotone(*s.tree, s.h, s.validation_grid);
                if (!mono.passed) {
                    std::string arcs;
                    for (const std::string& id : mono.offending_arcs) {
                        if (!arcs.empty()) arcs += ", ";
                        arcs += "'" + id + "'";
                    }
                    result.issues.push_back(
                        {"non-monotone", "tree: dH/ds falls below the monotonicity floor on " +
                                             arcs + " (min " +
                                             detail::format_g(mono.min_derivative) + ")"});
                }
            }
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            collect(e);
            s.tree.reset();
        }
    }

    if (cfg.contains("field") && have_h) {
        try {
            s.field = scenario_field(cfg["field"], s.h);
            if (s.field->dim != s.h.dim)
                throw DimensionMismatch("field: dimension " + std::to_string(s.field->dim) +
                                        " does not match the lyapunov dimension " +
                                        std::to_string(s.h.dim));
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            collect(e);
            s.field.reset();
        }
    }

    if (cfg.contains("projector_policy")) {
        try {
            s.policy = parse_policy(
                detail::parse_string(cfg["projector_policy"], "projector_policy"));
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            collect(e);
        }
    }
    if (cfg.contains("projector_matrix"))
        s.projector_matrix = detail::parse_mat(cfg["projector_matrix"], "projector_matrix");
    if (s.policy == ProjectorPolicy::custom_matrix) {
        if (!s.projector_matrix) {
            result.issues.push_back(
                {"invalid", "projector_policy: custom_matrix needs a projector_matrix block"});
        } else if (have_h && (s.projector_matrix->rows() != s.h.dim ||
                              s.projector_matrix->cols() != s.h.dim)) {
            result.issues.push_back({"dimension-mismatch",
                                     "projector_matrix: expected " + std::to_string(s.h.dim) +
                                         "x" + std::to_string(s.h.dim)});
        }
    }
    if (s.policy == ProjectorPolicy::curve && s.chart && s.chart->m != 1)
        result.issues.push_back(
            {"dimension-mismatch", "projector_policy: the curve policy needs a one-dimensional "
                                   "chart (this one has m = " +
                                       std::to_string(s.chart->m) + ")"});

    if (cfg.contains("integration")) {
        const json& integration = cfg["integration"];
        detail::reject_unknown_keys(integration, {"p0", "start", "dt", "steps"}, "integration");
        s.has_integration = true;
        s.dt = detail::parse_number(detail::require_field(integration, "dt", "integration"),
                                    "integration.dt");
        s.steps = detail::parse_count(detail::require_field(integration, "steps", "integration"),
                                      "integration.steps");
        if (!(s.dt > 0.0))
            result.issues.push_back({"invalid", "integration: dt must be positive"});
        if (!cfg.contains("field"))
            result.issues.push_back({"invalid", "integration: needs a field block"});
        if (has_chart_spec) {
            if (integration.contains("start"))
                throw ParseError("integration: 'start' applies to tree geometry only");
            s.p0 = detail::parse_vec(detail::require_field(integration, "p0", "integration"),
                                     "integration.p0");
            if (s.chart) {
                try {
                    if (s.p0->size() != s.chart->m)
                        throw DimensionMismatch(
                            "integration: p0 has size " + std::to_string(s.p0->size()) +
                            " but the chart expects " + std::to_string(s.chart->m));
                    if (!s.chart->param_domain.contains(*s.p0))
                        throw DomainViolation(
                            "integration: p0 outside the chart parameter domain");
                    detail::probe_chart_point(s.h, *s.chart, s.policy, *s.p0);
                } catch (const Error& e) {
                    collect(e);
                }
            }
        } else {
            if (integration.contains("p0"))
                throw ParseError("integration: 'p0' applies to chart geometry only");
            if (integration.contains("start")) {
                const json& start = integration["start"];
                detail::reject_unknown_keys(start, {"arc", "s"}, "integration.start");
                TreeStart ts;
                ts.arc = detail::parse_string(
                    detail::require_field(start, "arc", "integration.start"),
                    "integration.start.arc");
                ts.s = detail::parse_number(
                    detail::require_field(start, "s", "integration.start"),
                    "integration.start.s");
                s.start = std::move(ts);
                if (s.tree) {
                    try {
                        (void)tree_state(*s.tree, s.h, s.start->arc, s.start->s);
                    } catch (const Error& e) {
                        collect(e);
                    }
                }
            }
        }
    }

    if (cfg.contains("counterexample")) {
        const json& cx = cfg["counterexample"];
        detail::reject_unknown_keys(cx, {"p", "tilts", "trials", "rank_one"}, "counterexample");
        CounterexampleSpec spec;
        spec.p = detail::parse_vec(detail::require_field(cx, "p", "counterexample"),
                                   "counterexample.p");
        spec.tilts = detail::parse_vec(detail::require_field(cx, "tilts", "counterexample"),
                                       "counterexample.tilts");
        if (cx.contains("trials"))
            spec.trials = detail::parse_count(cx["trials"], "counterexample.trials");
        for (double tilt : spec.tilts)
            if (!(tilt >= 0.0)) {
                result.issues.push_back(
                    {"invalid", "counterexample: tilts must be nonnegative"});
                break;
            }
        if (cx.contains("rank_one")) {
            const json& ro = cx["rank_one"];
            detail::reject_unknown_keys(ro, {"projector", "y", "image_basis", "a", "witness"},
                                        "counterexample.rank_one");
            RankOneSpec rank_one;
            rank_one.projector =
                detail::parse_mat(detail::require_field(ro, "projector", "counterexample.rank_one"),
                                  "counterexample.rank_one.projector");
            if (ro.contains("y") == ro.contains("image_basis"))
                throw ParseError(
                    "counterexample.rank_one: needs exactly one of 'y' or 'image_basis'");
            if (ro.contains("y"))
                rank_one.y = detail::parse_vec(ro["y"], "counterexample.rank_one.y");
            if (ro.contains("image_basis"))
                rank_one.image_basis =
                    detail::parse_mat(ro["image_basis"], "counterexample.rank_one.image_basis");
            if (ro.contains("a"))
                rank_one.a = detail::parse_number(ro["a"], "counterexample.rank_one.a");
            if (ro.contains("witness"))
                rank_one.witness =
                    detail::parse_vec(ro["witness"], "counterexample.rank_one.witness");
            spec.rank_one = std::move(rank_one);
        }

        if (has_tree_spec) {
            result.issues.push_back({"invalid", "counterexample: needs chart geometry"});
        } else if (s.chart && have_h) {
            try {
                if (spec.p.size() != s.chart->m)
                    throw DimensionMismatch(
                        "counterexample: p has size " + std::to_string(spec.p.size()) +
                        " but the chart expects " + std::to_string(s.chart->m));
                if (!s.chart->param_domain.contains(spec.p))
                    throw DomainViolation("counterexample: p outside the chart parameter domain");
                ThermodynamicProjector base = thermodynamic_projector(s.h, *s.chart, spec.p);
                (void)kernel_tilt_direction(s.h, base);
            } catch (const Error& e) {
                collect(e);
            }
        }
        if (have_h && spec.rank_one) {
            const RankOneSpec& ro = *spec.rank_one;
            if (ro.projector.rows() != s.h.dim || ro.projector.cols() != s.h.dim)
                result.issues.push_back(
                    {"dimension-mismatch", "counterexample.rank_one: projector must be " +
                                               std::to_string(s.h.dim) + "x" +
                                               std::to_string(s.h.dim)});
            if (ro.y && ro.y->size() != s.h.dim)
                result.issues.push_back(
                    {"dimension-mismatch", "counterexample.rank_one: y has the wrong size"});
            if (ro.image_basis && ro.image_basis->rows() != s.h.dim)
                result.issues.push_back({"dimension-mismatch",
                                         "counterexample.rank_one: image_basis row mismatch"});
            if (ro.witness && ro.witness->size() != s.h.dim)
                result.issues.push_back(
                    {"dimension-mismatch", "counterexample.rank_one: witness has the wrong size"});
        }
        s.counterexample = std::move(spec);
    }

    result.valid = result.issues.empty();
    if (result.valid) result.scenario = std::move(s);
    return result;
}

/// Validates and returns the built scenario; the first issue becomes an
/// exception for callers that have no use for partial results.
[[nodiscard]] inline Scenario load_scenario(const json& cfg) {
    ValidationResult result = validate_scenario(cfg);
    if (!result.valid)
        throw Error(result.issues.front().category + ": " + result.issues.front().message);
    return std::move(*result.scenario);
}

/// Reads and parses a scenario file; IoError when unreadable, ParseError
/// when the text is not JSON.
[[nodiscard]] inline json read_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("config '" + path + "': " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

/// Start state for a tree scenario: the configured arc position or the root.
[[nodiscard]] inline TreeState scenario_start_state(const Scenario& s) {
    if (!s.tree) throw Error("scenario: no tree geometry");
    if (s.start) return tree_state(*s.tree, s.h, s.start->arc, s.start->s);
    return root_state(*s.tree, s.h);
}

[[nodiscard]] inline Trajectory run_chart_scenario(
    const Scenario& s, std::function<void(const std::string&)> notify = {}) {
    if (!s.chart || !s.field || !s.has_integration)
        throw Error("scenario: a chart run needs chart, field, and integration blocks");
    ReducedSystem system(s.h, *s.chart, *s.field, s.policy, s.projector_matrix,
                         std::move(notify));
    return integrate(system, *s.p0, s.dt, s.steps);
}

[[nodiscard]] inline TreeTrajectory run_tree_scenario(const Scenario& s) {
    if (!s.tree || !s.field || !s.has_integration)
        throw Error("scenario: a tree run needs tree, field, and integration blocks");
    return integrate_tree(*s.tree, s.h, *s.field, scenario_start_state(s), s.dt, s.steps);
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

[[nodiscard]] inline json validation_to_json(const ValidationResult& result) {
    json reasons = json::array();
    for (const ValidationIssue& issue : result.issues)
        reasons.push_back({{"category", issue.category}, {"message", issue.message}});
    return json{{"valid", result.valid}, {"reasons", std::move(reasons)}};
}

[[nodiscard]] inline json audit_to_json(const AuditReport& report) {
    return json{{"max_dissipation_gap", report.max_dissipation_gap},
                {"sign_violations", report.sign_violations},
                {"monotonicity_violations", report.monotonicity_violations},
                {"steps_completed", report.steps_completed},
                {"status", report.status}};
}

[[nodiscard]] inline json uniqueness_to_json(const UniquenessReport& report) {
    json findings = json::array();
    for (const TiltFinding& finding : report.findings)
        findings.push_back({{"tilt", finding.tilt},
                            {"violation_found", finding.violation_found},
                            {"witness", finding.witness},
                            {"full_dissipation", finding.full_dissipation},
                            {"reduced_dissipation", finding.reduced_dissipation},
                            {"margin", finding.margin},
                            {"random_violations", finding.random_violations}});
    return json{{"p", report.p},
                {"x", report.x},
                {"tilt_direction", report.tilt_direction},
                {"trials", report.trials},
                {"control_violations", report.control_violations},
                {"findings", std::move(findings)}};
}

/// Runs the rank-one demonstration. A NoWitness outcome (the projector is
/// metric-orthogonal and annihilates every complement direction) is a
/// reported result, not a failure. The metric is taken at the Lyapunov
/// equilibrium, where the construction is exact for quadratic functions.
[[nodiscard]] inline json rank_one_to_json(const LyapunovFunction& h, const RankOneSpec& spec) {
    json out;
    try {
        Vec y = spec.y ? *spec.y
                       : rank_one_witness_direction(h, h.equilibrium, spec.projector,
                                                    *spec.image_basis);
        RankOneOperator op = rank_one_operator(h, h.equilibrium, spec.projector, y, spec.a);
        out["no_witness"] = false;
        out["y"] = op.y;
        out["v"] = op.v;
        out["matrix"] = detail::matrix_to_json(op.matrix);
        if (spec.witness) {
            const Vec& x = *spec.witness;
            Vec ax = op.apply(x);
            const double full = dissipation(h, x, ax);
            const double reduced = dissipation(h, x, spec.projector * ax);
            out["witness"] = x;
            out["field_at_witness"] = ax;
            out["full_dissipation"] = full;
            out["reduced_dissipation"] = reduced;
            out["violation_found"] = (full <= 0.0 && reduced > 1e-12);
        }
    } catch (const NoWitness& e) {
        out["no_witness"] = true;
        out["message"] = e.what();
    }
    return out;
}

/// Uniqueness sweep plus the optional rank-one demonstration, as one report.
[[nodiscard]] inline json counterexample_report(const Scenario& s) {
    if (!s.counterexample || !s.chart)
        throw Error("scenario: a counterexample run needs chart geometry and a "
                    "counterexample block");
    const CounterexampleSpec& spec = *s.counterexample;
    UniquenessReport report =
        uniqueness_sweep(s.h, *s.chart, spec.p, spec.tilts, spec.trials, s.seed);
    json out = uniqueness_to_json(report);
    if (spec.rank_one) out["rank_one"] = rank_one_to_json(s.h, *spec.rank_one);
    return out;
}

}  // namespace dissipath
