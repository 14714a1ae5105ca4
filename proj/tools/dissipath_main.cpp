// Command-line front end: validate scenario configs, run reductions to CSV
// plus an audit report, and run the counterexample constructions. Exit codes:
// 0 the command completed (including runs whose audit flags problems),
// 2 the config failed validation, 3 the config text could not be parsed,
// 4 a file could not be read or written.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "dissipath/scenario.hpp"

namespace dp = dissipath;
namespace fs = std::filesystem;

namespace {

enum class LogLevel { error = 0, info = 1, debug = 2 };

LogLevel log_level_from_env() {
    const char* raw = std::getenv("DISSIPATH_LOG");
    if (raw == nullptr) return LogLevel::error;
    const std::string value(raw);
    if (value == "debug") return LogLevel::debug;
    if (value == "info") return LogLevel::info;
    return LogLevel::error;
}

LogLevel g_log_level = LogLevel::error;

void log_at(LogLevel level, const std::string& message) {
    if (static_cast<int>(level) <= static_cast<int>(g_log_level))
        std::cerr << "[dissipath] " << message << "\n";
}

/// Resolves a declared output name against --out; absolute names pass
/// through. Parent directories are created on demand.
[[nodiscard]] fs::path resolve_output(const std::string& out_dir, const std::string& declared) {
    fs::path path(declared);
    if (!path.is_absolute()) path = fs::path(out_dir) / path;
    std::error_code ec;
    const fs::path parent = path.parent_path();
    if (!parent.empty()) {
        fs::create_directories(parent, ec);
        if (ec)
            throw dp::IoError("cannot create directory '" + parent.string() +
                              "': " + ec.message());
    }
    return path;
}

void write_text_file(const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw dp::IoError("cannot open '" + path.string() + "' for writing");
    out << body;
    if (!out) throw dp::IoError("failed while writing '" + path.string() + "'");
}

int cmd_validate(const std::string& config_path) {
    dp::json cfg = dp::read_scenario_file(config_path);
    dp::ValidationResult result = dp::validate_scenario(cfg);
    std::cout << dp::validation_to_json(result).dump(2) << "\n";
    return result.valid ? 0 : 2;
}

int cmd_run(const std::string& config_path, const std::string& out_dir) {
    dp::json cfg = dp::read_scenario_file(config_path);
    dp::ValidationResult result = dp::validate_scenario(cfg);
    if (!result.valid) {
        std::cout << dp::validation_to_json(result).dump(2) << "\n";
        return 2;
    }
    const dp::Scenario& s = *result.scenario;
    if (!s.has_integration || !s.field) {
        dp::ValidationResult missing;
        missing.issues.push_back(
            {"invalid", "run: the config needs integration and field blocks"});
        std::cout << dp::validation_to_json(missing).dump(2) << "\n";
        return 2;
    }

    const fs::path csv_path = resolve_output(out_dir, s.output.trajectory_csv);
    const fs::path audit_path = resolve_output(out_dir, s.output.audit_json);

    std::ostringstream csv;
    dp::json audit;
    std::string status;
    std::size_t steps_completed = 0;
    if (s.tree) {
        log_at(LogLevel::info, "integrating on the tree");
        dp::TreeTrajectory traj = dp::run_tree_scenario(s);
        dp::write_tree_csv(csv, traj);
        audit = dp::audit_to_json(dp::audit(traj));
        status = dp::to_string(traj.status);
        steps_completed = traj.times.empty() ? 0 : traj.times.size() - 1;
        if (traj.status == dp::TreeRunStatus::step_failure ||
            traj.status == dp::TreeRunStatus::domain_exit) {
            audit["failed_step"] = traj.failed_step;
            audit["note"] = traj.note;
        }
    } else {
        log_at(LogLevel::info, "integrating on the chart");
        dp::Trajectory traj = dp::run_chart_scenario(
            s, [](const std::string& message) { log_at(LogLevel::debug, message); });
        dp::write_trajectory_csv(csv, traj);
        audit = dp::audit_to_json(dp::audit(traj));
        status = dp::to_string(traj.status);
        steps_completed = traj.times.empty() ? 0 : traj.times.size() - 1;
        if (traj.status != dp::TrajectoryStatus::ok) {
            audit["failed_step"] = traj.failed_step;
            audit["note"] = traj.note;
        }
    }

    write_text_file(csv_path, csv.str());
    write_text_file(audit_path, audit.dump(2) + "\n");
    std::cout << "status: " << status << "\n"
              << "steps_completed: " << steps_completed << "\n"
              << "trajectory_csv: " << csv_path.string() << "\n"
              << "audit_json: " << audit_path.string() << "\n";
    return 0;
}

int cmd_counterexample(const std::string& config_path, const std::string& out_dir) {
    dp::json cfg = dp::read_scenario_file(config_path);
    dp::ValidationResult result = dp::validate_scenario(cfg);
    if (!result.valid) {
        std::cout << dp::validation_to_json(result).dump(2) << "\n";
        return 2;
    }
    const dp::Scenario& s = *result.scenario;
    if (!s.counterexample) {
        dp::ValidationResult missing;
        missing.issues.push_back({"invalid", "counterexample: the config needs a "
                                             "counterexample block"});
        std::cout << dp::validation_to_json(missing).dump(2) << "\n";
        return 2;
    }

    log_at(LogLevel::info, "running the uniqueness sweep");
    dp::json report = dp::counterexample_report(s);
    const fs::path report_path = resolve_output(out_dir, s.output.report_json);
    write_text_file(report_path, report.dump(2) + "\n");

    std::cout << "control_violations: " << report["control_violations"].get<std::size_t>()
              << "\n";
    for (const dp::json& finding : report["findings"]) {
        std::cout << "tilt " << finding["tilt"].get<double>() << ": ";
        if (finding["violation_found"].get<bool>())
            std::cout << "violation, margin " << finding["margin"].get<double>() << ", random "
                      << finding["random_violations"].get<std::size_t>() << "/"
                      << report["trials"].get<std::size_t>() << "\n";
        else
            std::cout << "no violation\n";
    }
    if (report.contains("rank_one")) {
        const dp::json& rank_one = report["rank_one"];
        if (rank_one["no_witness"].get<bool>())
            std::cout << "rank_one: no witness (the projector is metric-orthogonal)\n";
        else if (rank_one.contains("violation_found") &&
                 rank_one["violation_found"].get<bool>())
            std::cout << "rank_one: violation, full " << rank_one["full_dissipation"].get<double>()
                      << ", reduced " << rank_one["reduced_dissipation"].get<double>() << "\n";
        else
            std::cout << "rank_one: operator constructed\n";
    }
    std::cout << "report_json: " << report_path.string() << "\n";
    return 0;
}

int cmd_catalog() {
    std::cout << "lyapunov: quadratic kl kl_shifted burg custom_f\n"
              << "chart: line affine poly_curve convex_combination circle paraboloid_sheet\n"
              << "curve: segment bezier2\n"
              << "field: linear gradient_flow markov\n"
              << "projector_policy: thermodynamic curve orthogonal_euclidean custom_matrix\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    g_log_level = log_level_from_env();

    CLI::App app{"dissipativity-preserving model reduction scenarios"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";

    CLI::App* validate = app.add_subcommand("validate", "check a scenario config");
    validate->add_option("config", config_path, "scenario JSON file")->required();

    CLI::App* run = app.add_subcommand("run", "integrate a scenario and write CSV + audit");
    run->add_option("config", config_path, "scenario JSON file")->required();
    run->add_option("--out", out_dir, "output directory");

    CLI::App* counterexample =
        app.add_subcommand("counterexample", "run the uniqueness and rank-one constructions");
    counterexample->add_option("config", config_path, "scenario JSON file")->required();
    counterexample->add_option("--out", out_dir, "output directory");

    app.add_subcommand("catalog", "list the catalog ids");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 3;
    }

    try {
        if (app.got_subcommand("validate")) return cmd_validate(config_path);
        if (app.got_subcommand("run")) return cmd_run(config_path, out_dir);
        if (app.got_subcommand("counterexample"))
            return cmd_counterexample(config_path, out_dir);
        return cmd_catalog();
    } catch (const dp::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 3;
    } catch (const dp::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    } catch (const dp::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
}
