#include "wkam/experiments.hpp"
#include "wkam/io.hpp"
#include <CLI11.hpp>
#include <iostream>

using wkam::ExperimentConfig;

int main(int argc, char** argv) {
    CLI::App app{"Weak KAM / minimal action toolkit for N-body problems with homogeneous "
                 "potentials"};
    app.require_subcommand(1);

    ExperimentConfig config;
    std::string config_file;
    bool have_masses = false;
    std::vector<double> masses;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_file, "key-value config file (overridden by flags)");
        sub->add_option("--seed", config.seed, "base random seed");
        sub->add_option("--seeds", config.n_seeds, "number of seeded repetitions");
        sub->add_option("--workers", config.workers, "worker threads (0 = logical processors)");
        sub->add_option("--out", config.out_dir, "output directory");
        sub->add_option("--tol", config.tol, "tolerance override (0 = command default)");
        sub->add_option("--kappa", config.kappa, "homogeneity parameter in (0,1)");
        sub->add_option("--n-bodies", config.n_bodies, "number of bodies");
        sub->add_option("--dim", config.dim, "ambient dimension");
        sub->add_option("--masses", masses, "body masses (default: unit)");
        sub->add_option("--radius", config.radius, "enclosing ball radius");
        sub->add_option("--horizon", config.horizon, "time horizon T");
        sub->add_option("--nodes", config.nodes, "path discretization nodes");
        sub->add_option("--grid-h", config.grid_h, "grid spacing");
        sub->add_option("--grid-lo", config.grid_lo, "grid lower bound");
        sub->add_option("--grid-hi", config.grid_hi, "grid upper bound");
        sub->add_option("--oracle", config.oracle, "kepler oracle name");
        sub->add_option("--lambda", config.scale_lambda, "homogeneity scale factor");
        sub->add_option("--batch", config.batch_file, "batch query JSON file");
    };

    for (const char* name : {"connect", "phi", "holder", "weakkam", "central", "parabolic"})
        add_common(app.add_subcommand(name));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : wkam::kExitUsageError;
    }

    CLI::App* sub = app.get_subcommands().front();
    std::string command = sub->get_name();

    // precedence: defaults < config file < command-line flags
    if (!config_file.empty()) {
        try {
            ExperimentConfig from_file = ExperimentConfig::parse(wkam::read_text_file(config_file));
            ExperimentConfig flags = config;
            config = from_file;
            for (const CLI::Option* opt : sub->get_options())
                if (opt->count() > 0) {
                    const std::string& n = opt->get_name();
                    if (n == "--seed") config.seed = flags.seed;
                    else if (n == "--seeds") config.n_seeds = flags.n_seeds;
                    else if (n == "--workers") config.workers = flags.workers;
                    else if (n == "--out") config.out_dir = flags.out_dir;
                    else if (n == "--tol") config.tol = flags.tol;
                    else if (n == "--kappa") config.kappa = flags.kappa;
                    else if (n == "--n-bodies") config.n_bodies = flags.n_bodies;
                    else if (n == "--dim") config.dim = flags.dim;
                    else if (n == "--masses") have_masses = true;
                    else if (n == "--radius") config.radius = flags.radius;
                    else if (n == "--horizon") config.horizon = flags.horizon;
                    else if (n == "--nodes") config.nodes = flags.nodes;
                    else if (n == "--grid-h") config.grid_h = flags.grid_h;
                    else if (n == "--grid-lo") config.grid_lo = flags.grid_lo;
                    else if (n == "--grid-hi") config.grid_hi = flags.grid_hi;
                    else if (n == "--oracle") config.oracle = flags.oracle;
                    else if (n == "--lambda") config.scale_lambda = flags.scale_lambda;
                    else if (n == "--batch") config.batch_file = flags.batch_file;
                }
        } catch (const std::exception& e) {
            std::cerr << "usage error: " << e.what() << "\n";
            return wkam::kExitUsageError;
        }
        if (config.command != command) {
            std::cerr << "usage error: config section [" << config.command
                      << "] does not match subcommand " << command << "\n";
            return wkam::kExitUsageError;
        }
    }
    if (!masses.empty() || have_masses) config.masses = masses;
    config.command = command;

    return wkam::run_experiment(config, std::cout);
}
