#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nlde/nonlinearity.hpp"
#include "nlde/potential.hpp"

namespace nlde {

/// Key-value tree config: dotted keys, one `key = value` per line, '#'
/// comments. Each run is stamped with the FNV-1a hash of the canonicalized
/// tree so outputs are traceable to their exact configuration.
class ConfigTree {
  public:
    static ConfigTree from_file(const std::string& path);
    static ConfigTree from_string(const std::string& text);

    bool has(const std::string& key) const { return kv_.count(key) > 0; }
    double get(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::string get_str(const std::string& key, const std::string& fallback) const;
    void set(const std::string& key, const std::string& value);

    std::uint64_t hash() const;
    std::string canonical() const;

  private:
    std::map<std::string, std::string> kv_;
};

struct ExperimentConfig {
    // grid
    int n = 16;
    double L = 16.0;
    int oracle_n = 8;
    double oracle_L = 16.0;
    // potential
    PotentialParams potential;
    // nonlinearity
    NonlinearityModel model;
    // norm indices
    double sigma = 3.0;
    double s = 3.5;      // s' >= s + 3 >= beta + 6
    double sprime = 6.5;
    double beta = 0.5;
    double theta = 1.0;
    double p = 1.0;
    double q = 2.0;
    // solver
    double tol = 1e-10;
    int max_iter = 4000;
    // run
    double horizon = 0.0;  // 0: derive from the recurrence horizon
    double dt = 0.0;       // 0: default_dt
    unsigned seed = 2024;
    int threads = 2;
    std::string out_dir = ".";
    // fit window (0 = default [T_rec/20, T_rec/2])
    double fit_lo = 0.0;
    double fit_hi = 0.0;
    // pls/dynamics
    double u_max = 0.12;
    int manifold_nodes = 17;

    std::uint64_t hash = 0;

    static ExperimentConfig from_tree(const ConfigTree& t);
};

/// Per-command hypothesis gates (Theorem hypotheses become hard
/// preconditions). Throws std::invalid_argument naming the violated gate.
void validate_config(const ExperimentConfig& cfg, const std::string& command);

/// T_rec = L / (2 v_max), v_max = max_k |k|/lambda(k) over the grid.
double recurrence_horizon(const Grid& g, double mass);

/// Deterministic CSV writer: fixed %.17g formatting, config hash column.
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns,
              std::uint64_t config_hash);
    ~CsvWriter();
    void row(const std::vector<double>& values);
    const std::string& path() const { return path_; }

    /// Appends this file's column documentation to `<out_dir>/schema.txt`.
    static void document(const std::string& out_dir, const std::string& file,
                         const std::vector<std::string>& columns,
                         const std::string& description);

  private:
    std::string path_;
    std::FILE* f_ = nullptr;
    std::uint64_t hash_;
    size_t ncols_;
};

}  // namespace nlde
