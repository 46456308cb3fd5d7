#pragma once

#include "nlde/config.hpp"
#include "nlde/dynamics.hpp"
#include "nlde/oscillatory.hpp"
#include "nlde/spectrum.hpp"

namespace nlde {

/// One named measurement with its gate; experiments aggregate these and the
/// CLI exits nonzero if any gate fails.
struct GateResult {
    std::string name;
    double value = 0.0;
    double target = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    bool inconclusive = false;
};

struct RunSummary {
    std::vector<GateResult> gates;
    std::vector<std::string> outputs;  // files written
    bool all_pass() const {
        for (const auto& g : gates)
            if (!g.pass) return false;
        return true;
    }
};

/// Shared per-run context (built lazily; bound states cached on disk).
struct RunContext {
    ExperimentConfig cfg;
    DiracMatrices dm;
    Grid grid;
    Potential V;
    BoundStateSet bound;
    bool bound_ready = false;

    explicit RunContext(const ExperimentConfig& c);
    void require_bound_states();
    ResonanceReport require_resonance_pass();
};

RunSummary run_validate(const ExperimentConfig& cfg);
RunSummary run_spectrum(const ExperimentConfig& cfg);
RunSummary run_resonance_scan(const ExperimentConfig& cfg);
RunSummary run_threshold_scan(const ExperimentConfig& cfg, bool free_control = false);
RunSummary run_oscillatory(const ExperimentConfig& cfg);
RunSummary run_pls_sweep(const ExperimentConfig& cfg);
RunSummary run_linearize(const ExperimentConfig& cfg);
RunSummary run_propagation(const ExperimentConfig& cfg);
RunSummary run_dispersion(const ExperimentConfig& cfg);
RunSummary run_evolve(const ExperimentConfig& cfg);
RunSummary run_stable_manifold(const ExperimentConfig& cfg);
RunSummary run_extract(const ExperimentConfig& cfg);

}  // namespace nlde
