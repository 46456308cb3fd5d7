// Command-line surface of the NLDE laboratory: each subcommand runs one
// experiment from a key-value config file, writes hash-stamped CSV outputs,
// and exits 0 only when every asserted gate passes.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "nlde/experiments.hpp"

using namespace nlde;

namespace {

int execute(const std::string& command, const std::string& config_path,
            const std::string& out_dir, int seed, int threads, double horizon) {
    ConfigTree tree = config_path.empty() ? ConfigTree::from_string("")
                                          : ConfigTree::from_file(config_path);
    if (!out_dir.empty()) tree.set("run.out_dir", out_dir);
    if (seed >= 0) tree.set("run.seed", std::to_string(seed));
    if (threads > 0) tree.set("run.threads", std::to_string(threads));
    if (horizon > 0) tree.set("run.horizon", std::to_string(horizon));
    ExperimentConfig cfg = ExperimentConfig::from_tree(tree);

    RunSummary sum;
    if (command == "validate") sum = run_validate(cfg);
    else if (command == "spectrum") sum = run_spectrum(cfg);
    else if (command == "resonance-scan") sum = run_resonance_scan(cfg);
    else if (command == "threshold-scan") {
        sum = run_threshold_scan(cfg, false);
        RunSummary free_sum = run_threshold_scan(cfg, true);
        for (auto& g : free_sum.gates) sum.gates.push_back(g);
        for (auto& o : free_sum.outputs) sum.outputs.push_back(o);
    }
    else if (command == "oscillatory") sum = run_oscillatory(cfg);
    else if (command == "pls-sweep") sum = run_pls_sweep(cfg);
    else if (command == "linearize") sum = run_linearize(cfg);
    else if (command == "propagation") sum = run_propagation(cfg);
    else if (command == "dispersion") sum = run_dispersion(cfg);
    else if (command == "evolve") sum = run_evolve(cfg);
    else if (command == "stable-manifold") sum = run_stable_manifold(cfg);
    else if (command == "extract") sum = run_extract(cfg);
    else {
        std::fprintf(stderr, "unknown command %s\n", command.c_str());
        return 2;
    }

    std::printf("# %s  config_hash=%016llx\n", command.c_str(),
                static_cast<unsigned long long>(cfg.hash));
    for (const auto& g : sum.gates)
        std::printf("%-48s value=% .6g target=% .6g tol=% .3g  %s%s\n", g.name.c_str(),
                    g.value, g.target, g.tolerance, g.pass ? "PASS" : "FAIL",
                    g.inconclusive ? " [inconclusive]" : "");
    for (const auto& o : sum.outputs) std::printf("wrote %s\n", o.c_str());
    return sum.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nlde-lab: a desk-scale laboratory for small nonlinear Dirac "
                 "standing waves"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    int seed = -1, threads = 0;
    double horizon = 0;
    app.add_option("--config", config_path, "key-value config file");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "random seed override");
    app.add_option("--threads", threads, "worker thread count");
    app.add_option("--horizon", horizon, "time horizon override");

    app.fallthrough();
    const char* commands[] = {"validate", "spectrum", "resonance-scan", "threshold-scan",
                              "oscillatory", "pls-sweep", "linearize", "propagation",
                              "dispersion", "evolve", "stable-manifold", "extract"};
    for (const char* c : commands) app.add_subcommand(c)->fallthrough();

    CLI11_PARSE(app, argc, argv);
    std::string command = app.get_subcommands().front()->get_name();
    try {
        return execute(command, config_path, out_dir, seed, threads, horizon);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
