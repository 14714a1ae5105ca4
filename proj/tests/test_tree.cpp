#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "dissipath/dynamics.hpp"
#include "dissipath/errors.hpp"
#include "dissipath/linalg.hpp"
#include "dissipath/lyapunov.hpp"
#include "dissipath/manifold.hpp"
#include "dissipath/tree.hpp"
#include "support/oracles.hpp"

namespace dp = dissipath;
using dp::Mat;
using dp::Vec;

namespace {

/// Quadratic H = 0.5 ||x - (-1,0)||^2; its minimum sits outside the trees
/// below, so every arc sees a nonvanishing slope.
dp::LyapunovFunction offset_quadratic() {
    return dp::make_quadratic(Mat::identity(2), Vec{-1.0, 0.0});
}

/// Star tree from the construction examples: root r = (0,0) with two arcs,
/// A: s -> (s, 0) to node a = (1,0) and B: s -> (s, s) to node b = (1,1).
dp::MonotoneTree star_tree(const dp::LyapunovFunction& h, bool reverse_b = false) {
    std::vector<dp::TreeNode> nodes = {{"r", Vec{0.0, 0.0}},
                                       {"a", Vec{1.0, 0.0}},
                                       {"b", Vec{1.0, 1.0}}};
    dp::TreeArc arc_a{"A", "r", "a", dp::make_segment_curve(Vec{0.0, 0.0}, Vec{1.0, 0.0})};
    dp::TreeArc arc_b = reverse_b
        ? dp::TreeArc{"B", "b", "r", dp::make_segment_curve(Vec{1.0, 1.0}, Vec{0.0, 0.0})}
        : dp::TreeArc{"B", "r", "b", dp::make_segment_curve(Vec{0.0, 0.0}, Vec{1.0, 1.0})};
    return dp::make_tree(nodes, {arc_a, arc_b}, h);
}

/// Chain tree along the x axis: r = (0,0) -A1- a = (1,0) -A2- b = (2.5,0).
dp::MonotoneTree chain_tree(const dp::LyapunovFunction& h) {
    std::vector<dp::TreeNode> nodes = {{"r", Vec{0.0, 0.0}},
                                       {"a", Vec{1.0, 0.0}},
                                       {"b", Vec{2.5, 0.0}}};
    std::vector<dp::TreeArc> arcs = {
        {"A1", "r", "a", dp::make_segment_curve(Vec{0.0, 0.0}, Vec{1.0, 0.0})},
        {"A2", "a", "b", dp::make_segment_curve(Vec{1.0, 0.0}, Vec{2.5, 0.0})}};
    return dp::make_tree(nodes, arcs, h);
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string current;
    for (char c : text) {
        if (c == '\n') {
            lines.push_back(current);
            current.clear();
        } else {
            current += c;
        }
    }
    return lines;
}

}  // namespace

TEST_CASE("arc curve catalog: segment and quadratic bezier", "[tree]") {
    dp::Chart seg = dp::make_segment_curve(Vec{1.0, 2.0}, Vec{3.0, -2.0});
    CHECK(dp::norm(dp::sub(dp::chart_point(seg, {0.0}), Vec{1.0, 2.0})) == 0.0);
    CHECK(dp::norm(dp::sub(dp::chart_point(seg, {1.0}), Vec{3.0, -2.0})) == 0.0);
    CHECK(dp::norm(dp::sub(dp::chart_point(seg, {0.5}), Vec{2.0, 0.0})) == 0.0);
    CHECK_THROWS_AS(dp::chart_point(seg, {1.5}), dp::DomainViolation);

    dp::Chart bez =
        dp::make_quadratic_bezier_curve(Vec{0.0, 0.0}, Vec{1.0, 0.0}, Vec{1.0, 1.0});
    CHECK(dp::norm(dp::sub(dp::chart_point(bez, {0.0}), Vec{0.0, 0.0})) == 0.0);
    CHECK(dp::norm(dp::sub(dp::chart_point(bez, {1.0}), Vec{1.0, 1.0})) == 0.0);
    for (double s : {0.3, 0.7}) {
        Mat analytic = dp::chart_jacobian(bez, {s});
        Mat fd = oracles::central_jacobian(bez.embed, Vec{s});
        CHECK(oracles::rel_gap(fd, analytic) < 1e-9);
    }

    dp::Chart flipped = dp::flip_arc_curve(seg);
    CHECK(dp::norm(dp::sub(dp::chart_point(flipped, {0.25}), dp::chart_point(seg, {0.75}))) ==
          0.0);
    Vec t_flipped = dp::chart_jacobian(flipped, {0.3}).column(0);
    Vec t_orig = dp::chart_jacobian(seg, {0.7}).column(0);
    CHECK(dp::norm(dp::add(t_flipped, t_orig)) == 0.0);
}

TEST_CASE("make_tree picks the minimal node as root and orients arcs away",
          "[tree]") {
    dp::LyapunovFunction h = offset_quadratic();
    dp::MonotoneTree tree = star_tree(h);
    CHECK(tree.root == "r");
    CHECK(tree.parent_arc.at("r").empty());
    CHECK(tree.parent_arc.at("a") == "A");
    CHECK(tree.parent_arc.at("b") == "B");
    CHECK(dp::tree_arc(tree, "A").from == "r");
    CHECK(dp::tree_arc(tree, "B").to == "b");
}

TEST_CASE("make_tree flips arcs supplied in the rootward direction", "[tree]") {
    dp::LyapunovFunction h = offset_quadratic();
    dp::MonotoneTree tree = star_tree(h, /*reverse_b=*/true);
    const dp::TreeArc& arc_b = dp::tree_arc(tree, "B");
    CHECK(arc_b.from == "r");
    CHECK(arc_b.to == "b");
    CHECK(dp::norm(dp::sub(dp::chart_point(arc_b.curve, {0.0}), Vec{0.0, 0.0})) < 1e-15);
    CHECK(dp::norm(dp::sub(dp::chart_point(arc_b.curve, {1.0}), Vec{1.0, 1.0})) < 1e-15);
    // flipping also reverses the tangent: the oriented arc ascends H
    Vec t = dp::chart_jacobian(arc_b.curve, {0.5}).column(0);
    CHECK(dp::norm(dp::sub(t, Vec{1.0, 1.0})) < 1e-15);
}

TEST_CASE("make_tree rejects malformed node and arc data", "[tree]") {
    dp::LyapunovFunction h = offset_quadratic();
    std::vector<dp::TreeNode> nodes = {{"r", Vec{0.0, 0.0}}, {"a", Vec{1.0, 0.0}}};
    dp::Chart seg = dp::make_segment_curve(Vec{0.0, 0.0}, Vec{1.0, 0.0});

    CHECK_THROWS_AS(dp::make_tree({}, {}, h), dp::NotATree);
    CHECK_THROWS_AS(dp::make_tree({{"r", Vec{0.0, 0.0}}, {"r", Vec{1.0, 0.0}}},
                                  {{"A", "r", "r", seg}}, h),
                    dp::NotATree);  // duplicate node id
    CHECK_THROWS_AS(dp::make_tree(nodes, {}, h), dp::NotATree);  // wrong arc count
    CHECK_THROWS_AS(dp::make_tree(nodes, {{"A", "r", "missing", seg}}, h),
                    dp::NotATree);  // unknown endpoint
    CHECK_THROWS_AS(dp::make_tree(nodes,
                                  {{"A", "r", "a",
                                    dp::make_segment_curve(Vec{0.0, 0.0}, Vec{0.5, 0.0})}},
                                  h),
                    dp::NotATree);  // endpoints off the node positions

    // three nodes, three arcs: one pair is doubly connected
    std::vector<dp::TreeNode> tri = {{"r", Vec{0.0, 0.0}},
                                     {"a", Vec{1.0, 0.0}},
                                     {"b", Vec{1.0, 1.0}}};
    dp::Chart seg_b = dp::make_segment_curve(Vec{0.0, 0.0}, Vec{1.0, 1.0});
    dp::Chart seg_ab = dp::make_segment_curve(Vec{1.0, 0.0}, Vec{1.0, 1.0});
    CHECK_THROWS_AS(dp::make_tree(tri,
                                  {{"A", "r", "a", seg},
                                   {"B", "r", "b", seg_b},
                                   {"C", "a", "b", seg_ab}},
                                  h),
                    dp::NotATree);  // arc count betrays the cycle

    // right arc count, but two arcs join the same pair: cycle through them
    std::vector<dp::TreeNode> four = {{"r", Vec{0.0, 0.0}},
                                      {"a", Vec{1.0, 0.0}},
                                      {"b", Vec{1.0, 1.0}},
                                      {"c", Vec{2.0, 0.0}}};
    CHECK_THROWS_AS(dp::make_tree(four,
                                  {{"A", "r", "a", seg},
                                   {"A2", "r", "a", seg},
                                   {"B", "r", "b", seg_b}},
                                  h),
                    dp::NotATree);

    // right arc count, cycle in a component the root never reaches
    dp::Chart seg_bc = dp::make_segment_curve(Vec{1.0, 1.0}, Vec{2.0, 0.0});
    CHECK_THROWS_AS(dp::make_tree(four,
                                  {{"A", "r", "a", seg},
                                   {"B", "b", "c", seg_bc},
                                   {"C", "c", "b", dp::flip_arc_curve(seg_bc)}},
                                  h),
                    dp::NotATree);  // disconnected

    // two nodes at the same H value: no unique root
    dp::LyapunovFunction centered = dp::make_quadratic(Mat::identity(2), Vec{0.5, 0.0});
    CHECK_THROWS_AS(dp::make_tree(nodes, {{"A", "r", "a", seg}}, centered), dp::NotATree);
}

TEST_CASE("validate_monotone accepts ascending arcs and reports the worst slope",
          "[tree]") {
    dp::LyapunovFunction h = offset_quadratic();
    dp::MonotoneTree tree = star_tree(h);
    dp::MonotoneReport report = dp::validate_monotone(tree, h, 11);
    CHECK(report.passed);
    CHECK(report.offending_arcs.empty());
    // dH/ds = s+1 on A and 2s+1 on B: the grid minimum sits at s = 0 on A
    CHECK(report.min_derivative == Catch::Approx(1.0).margin(1e-5));
}

TEST_CASE("validate_monotone fails an arc whose slope vanishes at an endpoint",
          "[tree]") {
    dp::LyapunovFunction h = offset_quadratic();
    // arc s -> (0, s): H = 0.5 (1 + s^2), so dH/ds = s vanishes at s = 0
    std::vector<dp::TreeNode> nodes = {{"r", Vec{0.0, 0.0}}, {"c", Vec{0.0, 1.0}}};
    dp::MonotoneTree tree = dp::make_tree(
        nodes, {{"A", "r", "c", dp::make_segment_curve(Vec{0.0, 0.0}, Vec{0.0, 1.0})}}, h);
    dp::MonotoneReport report = dp::validate_monotone(tree, h, 11);
    CHECK_FALSE(report.passed);
    REQUIRE(report.offending_arcs.size() == 1);
    CHECK(report.offending_arcs[0] == "A");
    CHECK(report.min_derivative < dp::monotonicity_floor);
    CHECK(report.min_derivative >= 0.0);
}

TEST_CASE("single-node tree is valid and trivially monotone", "[tree]") {
    dp::LyapunovFunction h = offset_quadratic();
    dp::MonotoneTree tree = dp::make_tree({{"r", Vec{0.25, 0.0}}}, {}, h);
    CHECK(tree.root == "r");
    dp::MonotoneReport report = dp::validate_monotone(tree, h, 5);
    CHECK(report.passed);
    CHECK(std::isinf(report.min_derivative));

    dp::TreeState at_root = dp::root_state(tree, h);
    CHECK(at_root.arc_id.empty());
    CHECK(at_root.h == Catch::Approx(0.78125));  // 0.5 * 1.25^2
    CHECK(dp::path_to_root(tree, at_root).empty());
}

TEST_CASE("tree_state evaluates arcs and rejects bad queries", "[tree]") {
    dp::LyapunovFunction h = offset_quadratic();
    dp::MonotoneTree tree = star_tree(h);
    dp::TreeState s = dp::tree_state(tree, h, "B", 0.5);
    CHECK(dp::norm(dp::sub(s.x, Vec{0.5, 0.5})) < 1e-15);
    CHECK(s.h == Catch::Approx(0.5 * (1.5 * 1.5 + 0.25)));
    CHECK_THROWS_AS(dp::tree_state(tree, h, "nope", 0.5), dp::Error);
    CHECK_THROWS_AS(dp::tree_state(tree, h, "B", 1.2), dp::DomainViolation);
    CHECK_THROWS_AS(dp::tree_state(tree, h, "B", -0.2), dp::DomainViolation);
}

TEST_CASE("path_to_root walks the unique arc chain", "[tree]") {
    dp::LyapunovFunction h = offset_quadratic();
    dp::MonotoneTree star = star_tree(h);
    CHECK(dp::path_to_root(star, dp::tree_state(star, h, "B", 0.5)) ==
          std::vector<std::string>{"B"});
    CHECK(dp::path_to_root(star, dp::tree_state(star, h, "A", 1.0)) ==
          std::vector<std::string>{"A"});
    CHECK(dp::path_to_root(star, dp::root_state(star, h)).empty());

    dp::MonotoneTree chain = chain_tree(h);
    CHECK(dp::path_to_root(chain, dp::tree_state(chain, h, "A2", 0.7)) ==
          (std::vector<std::string>{"A2", "A1"}));
    // s = 0 sits at the arc's rootward node, so the path starts above it
    CHECK(dp::path_to_root(chain, dp::tree_state(chain, h, "A2", 0.0)) ==
          std::vector<std::string>{"A1"});
    CHECK(dp::path_to_root(chain, dp::tree_state(chain, h, "A1", 0.0)).empty());
}

TEST_CASE("tree_reduced_rhs converts dissipation into arc speed", "[tree]") {
    dp::LyapunovFunction h = offset_quadratic();
    dp::MonotoneTree tree = star_tree(h);
    dp::VectorField flow = dp::make_gradient_flow(h);

    // end of arc A: dh/dt = -|grad|^2 = -4, dH/ds = 2, so ds/dt = -2
    dp::TreeRate rate = dp::tree_reduced_rhs(tree, h, flow, dp::tree_state(tree, h, "A", 1.0));
    CHECK_FALSE(rate.at_root);
    CHECK(rate.ds_dt == Catch::Approx(-2.0).epsilon(1e-12));

    dp::VectorField still{2, [](const Vec&) { return Vec{0.0, 0.0}; }, "still"};
    CHECK(dp::tree_reduced_rhs(tree, h, still, dp::tree_state(tree, h, "B", 0.5)).ds_dt ==
          Catch::Approx(0.0).margin(1e-15));

    // at the root the state is clamped
    dp::TreeRate clamped = dp::tree_reduced_rhs(tree, h, flow, dp::root_state(tree, h));
    CHECK(clamped.at_root);
    CHECK(clamped.ds_dt == 0.0);
    dp::TreeRate at_arc_start =
        dp::tree_reduced_rhs(tree, h, flow, dp::tree_state(tree, h, "B", 0.0));
    CHECK(at_arc_start.at_root);
    CHECK(at_arc_start.ds_dt == 0.0);
}

TEST_CASE("tree_reduced_rhs agrees with a finite-difference slope", "[tree]") {
    dp::LyapunovFunction h = offset_quadratic();
    dp::MonotoneTree tree = star_tree(h);
    dp::VectorField flow = dp::make_gradient_flow(h);
    const dp::TreeArc& arc = dp::tree_arc(tree, "B");
    oracles::Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const double s = oracles::uniform(rng, 0.1, 0.9);
        dp::TreeState state = dp::tree_state(tree, h, "B", s);
        const double fd_step = 1e-6;
        const double slope_fd = (h.value(dp::chart_point(arc.curve, {s + fd_step})) -
                                 h.value(dp::chart_point(arc.curve, {s - fd_step}))) /
                                (2.0 * fd_step);
        const double expected = dp::dissipation(h, state.x, flow.eval(state.x)) / slope_fd;
        const double got = dp::tree_reduced_rhs(tree, h, flow, state).ds_dt;
        CHECK(got == Catch::Approx(expected).epsilon(1e-6));
    }
}

TEST_CASE("tree_reduced_rhs raises when the slope drops under the floor", "[tree]") {
    dp::LyapunovFunction h = offset_quadratic();
    // structurally a fine tree, but dH/ds = s vanishes at the arc start
    std::vector<dp::TreeNode> nodes = {{"r", Vec{0.0, 0.0}}, {"c", Vec{0.0, 1.0}}};
    dp::MonotoneTree tree = dp::make_tree(
        nodes, {{"A", "r", "c", dp::make_segment_curve(Vec{0.0, 0.0}, Vec{0.0, 1.0})}}, h);
    dp::VectorField flow = dp::make_gradient_flow(h);
    // query just above the root so the clamp does not mask the floor
    dp::TreeState state = dp::tree_state(tree, h, "A", 1e-9);
    CHECK_THROWS_AS(dp::tree_reduced_rhs(tree, h, flow, state), dp::MonotonicityFloorViolated);
    CHECK_THROWS_WITH(dp::tree_reduced_rhs(tree, h, flow, state),
                      Catch::Matchers::ContainsSubstring("dH/ds"));
}

TEST_CASE("gradient flow descends the star tree and clamps at the root", "[tree]") {
    dp::LyapunovFunction h = offset_quadratic();
    dp::MonotoneTree tree = star_tree(h);
    dp::VectorField flow = dp::make_gradient_flow(h);
    dp::TreeTrajectory traj =
        dp::integrate_tree(tree, h, flow, dp::tree_state(tree, h, "B", 1.0), 0.01, 150);

    CHECK(traj.status == dp::TreeRunStatus::clamped_at_root);
    REQUIRE(traj.times.size() == 151);
    CHECK(traj.h_values.front() == Catch::Approx(2.5));
    for (std::size_t k = 1; k < traj.h_values.size(); ++k)
        CHECK(traj.h_values[k] <= traj.h_values[k - 1] + 1e-12);
    CHECK(traj.arc_ids.back().empty());
    CHECK(dp::norm(dp::sub(traj.states.back(), Vec{0.0, 0.0})) < 1e-15);
    CHECK(traj.h_values.back() == Catch::Approx(0.5));

    // realized dh/dt equals the full dissipation on every non-clamped row
    for (std::size_t k = 0; k < traj.times.size(); ++k)
        if (!traj.arc_ids[k].empty())
            CHECK(std::abs(traj.realized_dh_dt[k] - traj.full_dissipation[k]) < 1e-9);

    dp::AuditReport report = dp::audit(traj);
    CHECK(report.max_dissipation_gap < 1e-9);
    CHECK(report.sign_violations == 0);
    CHECK(report.monotonicity_violations == 0);
    CHECK(report.steps_completed == 150);
    CHECK(report.status == "clamped_at_root");
}

TEST_CASE("node crossing glues arcs along the path to the root", "[tree]") {
    dp::LyapunovFunction h = offset_quadratic();
    dp::MonotoneTree tree = chain_tree(h);
    dp::VectorField flow = dp::make_gradient_flow(h);
    // on this chain the flow reduces to dx1/dt = -(x1+1) on both arcs, so
    // h(t) = 0.5 (3.35 e^{-t})^2 until the root x1 = 0 is hit at t = ln 3.35
    dp::TreeTrajectory traj =
        dp::integrate_tree(tree, h, flow, dp::tree_state(tree, h, "A2", 0.9), 0.01, 160);

    CHECK(traj.status == dp::TreeRunStatus::clamped_at_root);
    REQUIRE(traj.times.size() == 161);
    CHECK(traj.arc_ids.front() == "A2");
    CHECK(traj.arc_ids.back().empty());

    std::size_t first_a1 = traj.times.size(), first_root = traj.times.size();
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        if (traj.arc_ids[k] == "A1" && first_a1 == traj.times.size()) first_a1 = k;
        if (traj.arc_ids[k].empty() && first_root == traj.times.size()) first_root = k;
    }
    REQUIRE(first_a1 < traj.times.size());
    REQUIRE(first_root < traj.times.size());
    CHECK(traj.times[first_a1] == Catch::Approx(std::log(3.35 / 2.0)).margin(0.015));
    CHECK(traj.times[first_root] == Catch::Approx(std::log(3.35)).margin(0.015));
    for (std::size_t k = first_a1; k < first_root; ++k) CHECK(traj.arc_ids[k] == "A1");

    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        const double t = traj.times[k];
        const double exact = 0.5 * std::pow(3.35 * std::exp(-t), 2);
        if (t <= 0.5)  // before the node crossing: pure RK4 accuracy
            CHECK(traj.h_values[k] == Catch::Approx(exact).margin(1e-7));
        else if (t <= 1.15)  // after the crossing: first-order crossing placement
            CHECK(traj.h_values[k] == Catch::Approx(exact).margin(1e-3));
    }

    // gluing is continuous: no step moves h by more than |dh/dt|_max dt
    for (std::size_t k = 1; k < traj.h_values.size(); ++k) {
        CHECK(traj.h_values[k] <= traj.h_values[k - 1] + 1e-12);
        CHECK(traj.h_values[k - 1] - traj.h_values[k] < 0.12);
    }

    dp::AuditReport report = dp::audit(traj);
    CHECK(report.max_dissipation_gap < 1e-9);
    CHECK(report.sign_violations == 0);
    CHECK(report.monotonicity_violations == 0);
}

TEST_CASE("a run started at the root stays there", "[tree]") {
    dp::LyapunovFunction h = offset_quadratic();
    dp::MonotoneTree tree = star_tree(h);
    dp::VectorField flow = dp::make_gradient_flow(h);
    dp::TreeTrajectory traj = dp::integrate_tree(tree, h, flow, dp::root_state(tree, h), 0.1, 10);

    CHECK(traj.status == dp::TreeRunStatus::clamped_at_root);
    REQUIRE(traj.times.size() == 11);
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        CHECK(traj.arc_ids[k].empty());
        CHECK(traj.h_values[k] == Catch::Approx(0.5));
        CHECK(traj.realized_dh_dt[k] == 0.0);
        // the field still dissipates at the root; the clamp, not the field,
        // holds the state, so clamped rows are excluded from the gap audit
        CHECK(traj.full_dissipation[k] == Catch::Approx(-1.0));
    }
    dp::AuditReport report = dp::audit(traj);
    CHECK(report.max_dissipation_gap == 0.0);
    CHECK(report.sign_violations == 0);
}

TEST_CASE("outward motion past an arc end is a step failure", "[tree]") {
    dp::LyapunovFunction h = offset_quadratic();
    dp::MonotoneTree tree = star_tree(h);
    dp::VectorField ascent{2, [h](const Vec& x) { return h.grad(x); }, "ascent"};
    dp::TreeTrajectory traj =
        dp::integrate_tree(tree, h, ascent, dp::tree_state(tree, h, "B", 0.5), 0.05, 20);

    CHECK(traj.status == dp::TreeRunStatus::step_failure);
    CHECK(traj.note.find("outward") != std::string::npos);
    CHECK(traj.failed_step >= 1);
    CHECK(traj.times.size() == traj.failed_step);
}

TEST_CASE("leaving the Lyapunov domain mid-arc reports a domain exit", "[tree]") {
    // quadratic H restricted to the slab |x2| <= 0.5; the bezier arc bulges
    // out to x2 = 0.6 mid-arc while both endpoints stay inside
    dp::LyapunovFunction h = offset_quadratic();
    h.domain = dp::Domain::box(Vec{-10.0, -0.5}, Vec{10.0, 0.5});
    std::vector<dp::TreeNode> nodes = {{"r", Vec{0.0, 0.0}}, {"b", Vec{2.0, 0.0}}};
    dp::MonotoneTree tree = dp::make_tree(
        nodes,
        {{"A", "r", "b",
          dp::make_quadratic_bezier_curve(Vec{0.0, 0.0}, Vec{1.0, 1.2}, Vec{2.0, 0.0})}},
        h);
    dp::VectorField flow = dp::make_gradient_flow(h);

    dp::TreeTrajectory traj =
        dp::integrate_tree(tree, h, flow, dp::tree_state(tree, h, "A", 0.9), 0.02, 50);
    CHECK(traj.status == dp::TreeRunStatus::domain_exit);
    CHECK(traj.note.find("outside domain") != std::string::npos);
    CHECK(traj.failed_step >= 1);
    CHECK(traj.times.size() == traj.failed_step);
    dp::AuditReport report = dp::audit(traj);
    CHECK(report.status == "domain_exit");
}

TEST_CASE("a single-arc tree reproduces the curve-policy reduction", "[tree]") {
    dp::LyapunovFunction h = dp::make_quadratic(Mat::identity(2), Vec{0.0, 0.0});
    Vec lo{0.2, 0.1}, hi{2.0, 1.0};
    dp::Chart segment = dp::make_segment_curve(lo, hi);
    dp::MonotoneTree tree =
        dp::make_tree({{"lo", lo}, {"hi", hi}}, {{"A", "lo", "hi", segment}}, h);
    REQUIRE(dp::validate_monotone(tree, h, 21).passed);
    dp::VectorField flow = dp::make_gradient_flow(h);

    dp::TreeTrajectory on_tree =
        dp::integrate_tree(tree, h, flow, dp::tree_state(tree, h, "A", 0.8), 0.01, 50);
    dp::ReducedSystem sys(h, segment, flow, dp::ProjectorPolicy::curve);
    dp::Trajectory on_chart = dp::integrate(sys, Vec{0.8}, 0.01, 50);

    CHECK(on_tree.status == dp::TreeRunStatus::ok);
    CHECK(on_chart.status == dp::TrajectoryStatus::ok);
    REQUIRE(on_tree.times.size() == on_chart.times.size());
    for (std::size_t k = 0; k < on_tree.times.size(); ++k) {
        CHECK(std::abs(on_tree.h_values[k] - on_chart.h_values[k]) < 1e-8);
        CHECK(std::abs(on_tree.s_values[k] - on_chart.params[k][0]) < 1e-8);
        CHECK(std::abs(on_tree.realized_dh_dt[k] - on_chart.reduced_dissipation[k]) < 1e-8);
    }
}

TEST_CASE("tree trajectory CSV follows the fixed column contract", "[tree]") {
    dp::LyapunovFunction h = offset_quadratic();
    dp::MonotoneTree tree = star_tree(h);
    dp::VectorField flow = dp::make_gradient_flow(h);
    dp::TreeTrajectory traj =
        dp::integrate_tree(tree, h, flow, dp::tree_state(tree, h, "B", 1.0), 0.5, 3);

    std::ostringstream out;
    dp::write_tree_csv(out, traj);
    std::vector<std::string> lines = split_lines(out.str());
    REQUIRE(lines.size() == traj.times.size() + 1);
    CHECK(lines[0] == "t,arc_id,s,x_1,x_2,h,diss_full");
    CHECK(lines[1] == "0,B,1,1,1,2.5,-5");
    // the coarse run reaches the root by t = 1.5; root rows have no arc id
    CHECK(traj.status == dp::TreeRunStatus::clamped_at_root);
    CHECK(lines.back() == "1.5,,0,0,0,0.5,-1");
    for (const std::string& line : lines)
        CHECK(std::count(line.begin(), line.end(), ',') == 6);

    std::ostringstream again;
    dp::write_tree_csv(again, traj);
    CHECK(out.str() == again.str());
}
