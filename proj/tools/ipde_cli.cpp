// Command-line front end: one verification/solve task per invocation.
#include <exception>
#include <iostream>

#include "CLI11.hpp"
#include "ipde/tasks.hpp"

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for uniformly elliptic integro-PDEs"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    int threads = 1;
    std::uint64_t seed = 1;

    const char* names[] = {"solve", "verify-barrier", "abp", "harnack",
                           "holder", "envelope", "selftest"};
    for (const char* name : names) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "experiment config file")
            ->required(std::string(name) != "selftest");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--threads", threads, "worker threads");
        sub->add_option("--seed", seed, "seed for randomized batches");
    }

    CLI11_PARSE(app, argc, argv);
    std::string task = app.get_subcommands().front()->get_name();

    try {
        ipde::ExperimentConfig cfg =
            config_path.empty()
                ? ipde::load_config_text("[domain]\nlo = -1\nhi = 1\n[grid]\nnodes = 9\n"
                                         "[task]\nkind = selftest\n",
                                         "<builtin>")
                : ipde::load_config(config_path);
        if (cfg.task != task) {
            std::cerr << "error: config names task '" << cfg.task << "' but subcommand is '"
                      << task << "'\n";
            return 1;
        }
        ipde::TaskResult res = ipde::run_task(cfg, out_dir, threads, seed);
        if (res.exit_code == 2)
            std::cerr << "verification failed (report written to " << out_dir << ")\n";
        return res.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
