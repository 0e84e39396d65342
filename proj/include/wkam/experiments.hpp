#pragma once
#include "wkam/problem.hpp"
#include <ostream>
#include <string>
#include <vector>

namespace wkam {

/// Exit-code contract shared by all commands.
enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitUsageError = 2 };

/// Flat key-value configuration with one section naming the command.
/// Serialization round-trips: parse(serialize(c)) == c.
struct ExperimentConfig {
    std::string command = "connect";

    int n_bodies = 2;
    int dim = 2;
    std::vector<double> masses;  // empty: unit masses
    double kappa = 0.5;

    uint64_t seed = 1;
    int n_seeds = 10;
    int workers = 0;      // 0: logical processors
    double tol = 0.0;     // 0: command default

    double radius = 1.0;  // connect: enclosing ball
    double horizon = 2.0; // T
    int nodes = 129;      // path discretization

    double grid_h = 0.2;  // weakkam grids
    double grid_lo = 0.2;
    double grid_hi = 20.0;
    std::string oracle = "u_minus";

    double scale_lambda = 4.0;  // phi: homogeneity factor
    std::string out_dir = ".";
    std::string batch_file;

    bool operator==(const ExperimentConfig&) const = default;

    static ExperimentConfig parse(const std::string& text);
    std::string serialize() const;
    ProblemSpec problem() const;
};

/// Runs the configured command, writing artifacts under out_dir and a short
/// log to `log`. Returns the exit code (0 pass, 1 check failure, 2 usage).
int run_experiment(const ExperimentConfig& config, std::ostream& log);

}  // namespace wkam
