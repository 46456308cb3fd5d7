#include "nlde/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "nlde/snapshot.hpp"

namespace nlde {

ConfigTree ConfigTree::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
}

ConfigTree ConfigTree::from_string(const std::string& text) {
    ConfigTree t;
    std::istringstream in(text);
    std::string line;
    auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t\r");
        size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hashpos = line.find('#');
        if (hashpos != std::string::npos) line = line.substr(0, hashpos);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: missing '=' at line " + std::to_string(lineno));
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw std::runtime_error("config: empty key at line " +
                                                  std::to_string(lineno));
        t.kv_[key] = val;
    }
    return t;
}

double ConfigTree::get(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    return std::stod(it->second);
}

int ConfigTree::get_int(const std::string& key, int fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    return std::stoi(it->second);
}

std::string ConfigTree::get_str(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

void ConfigTree::set(const std::string& key, const std::string& value) { kv_[key] = value; }

std::string ConfigTree::canonical() const {
    std::string out;
    for (const auto& [k, v] : kv_) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

std::uint64_t ConfigTree::hash() const {
    std::string c = canonical();
    return fnv1a(c.data(), c.size());
}

ExperimentConfig ExperimentConfig::from_tree(const ConfigTree& t) {
    ExperimentConfig c;
    c.n = t.get_int("grid.n", c.n);
    c.L = t.get("grid.L", c.L);
    c.oracle_n = t.get_int("grid.oracle_n", c.oracle_n);
    c.oracle_L = t.get("grid.oracle_L", c.oracle_L);

    std::string fam = t.get_str("potential.family", "kramers_breaking");
    if (fam == "zero") c.potential.family = PotentialFamily::Zero;
    else if (fam == "scalar_beta") c.potential.family = PotentialFamily::ScalarBeta;
    else if (fam == "kramers_breaking") c.potential.family = PotentialFamily::KramersBreaking;
    else throw std::invalid_argument("config: unknown potential.family " + fam);
    c.potential.a_depth = t.get("potential.a_depth", c.potential.a_depth);
    c.potential.a_width = t.get("potential.a_width", c.potential.a_width);
    c.potential.b_depth = t.get("potential.b_depth", c.potential.b_depth);
    c.potential.b_width = t.get("potential.b_width", c.potential.b_width);

    std::string nl = t.get_str("nonlinearity.family", "soler_quartic");
    if (nl == "soler_quartic") c.model.family = NonlinearityFamily::SolerQuartic;
    else if (nl == "density_quartic") c.model.family = NonlinearityFamily::DensityQuartic;
    else throw std::invalid_argument("config: unknown nonlinearity.family " + nl);
    c.model.kappa = t.get("nonlinearity.kappa", c.model.kappa);

    c.sigma = t.get("norms.sigma", c.sigma);
    c.s = t.get("norms.s", c.s);
    c.sprime = t.get("norms.sprime", c.sprime);
    c.beta = t.get("norms.beta", c.beta);
    c.theta = t.get("norms.theta", c.theta);
    c.p = t.get("norms.p", c.p);
    c.q = t.get("norms.q", c.q);

    c.tol = t.get("solver.tol", c.tol);
    c.max_iter = t.get_int("solver.max_iter", c.max_iter);

    c.horizon = t.get("run.horizon", c.horizon);
    c.dt = t.get("run.dt", c.dt);
    c.seed = static_cast<unsigned>(t.get_int("run.seed", static_cast<int>(c.seed)));
    c.threads = t.get_int("run.threads", c.threads);
    c.out_dir = t.get_str("run.out_dir", c.out_dir);
    c.fit_lo = t.get("fit.window_lo", c.fit_lo);
    c.fit_hi = t.get("fit.window_hi", c.fit_hi);
    c.u_max = t.get("pls.u_max", c.u_max);
    c.manifold_nodes = t.get_int("pls.manifold_nodes", c.manifold_nodes);
    c.hash = t.hash();
    return c;
}

double recurrence_horizon(const Grid& g, double mass) {
    double kc = g.k_corner();
    double vmax = kc / std::sqrt(kc * kc + mass * mass);
    return g.L / (2.0 * vmax);
}

void validate_config(const ExperimentConfig& cfg, const std::string& command) {
    auto fail = [&](const std::string& what) {
        throw std::invalid_argument("config gate failed for '" + command + "': " + what);
    };
    if (cfg.n < 4 || (cfg.n & (cfg.n - 1)) != 0) fail("grid.n must be a power of two >= 4");
    if (!(cfg.L > 0)) fail("grid.L must be positive");
    if (!(cfg.theta >= 0.0 && cfg.theta <= 1.0)) fail("theta must lie in [0, 1]");
    if (command == "propagation" || command == "dispersion" || command == "threshold-scan") {
        if (!(cfg.sigma > 2.5)) fail("sigma > 5/2 required");
    }
    if (command == "stable-manifold" || command == "extract" || command == "evolve") {
        if (!(cfg.sprime >= cfg.s + 3.0 && cfg.s + 3.0 >= cfg.beta + 6.0))
            fail("s' >= s + 3 >= beta + 6 required");
        if (!(cfg.sigma > 2.5)) fail("sigma > 5/2 required");
    }
    if (command == "propagation" || command == "dispersion" || command == "evolve" ||
        command == "stable-manifold") {
        Grid g(cfg.n, cfg.L);
        double trec = recurrence_horizon(g, 1.0);
        double hi = cfg.fit_hi > 0 ? cfg.fit_hi : trec / 2;
        double lo = cfg.fit_lo > 0 ? cfg.fit_lo : trec / 20;
        if (hi > trec / 2 + 1e-9) fail("fit window must end by T_rec/2");
        if (std::log10(hi / lo) < 1.0 - 1e-9) fail("fit window must span >= 1 decade");
    }
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& columns,
                     std::uint64_t config_hash)
    : path_(path), hash_(config_hash), ncols_(columns.size()) {
    f_ = std::fopen(path.c_str(), "wb");
    if (!f_) throw std::runtime_error("csv: cannot open " + path);
    std::fprintf(f_, "config_hash");
    for (const auto& c : columns) std::fprintf(f_, ",%s", c.c_str());
    std::fprintf(f_, "\n");
}

CsvWriter::~CsvWriter() {
    if (f_) std::fclose(f_);
}

void CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != ncols_) throw std::invalid_argument("csv: column count mismatch");
    std::fprintf(f_, "%016llx", static_cast<unsigned long long>(hash_));
    for (double v : values) std::fprintf(f_, ",%.17g", v);
    std::fprintf(f_, "\n");
}

void CsvWriter::document(const std::string& out_dir, const std::string& file,
                         const std::vector<std::string>& columns,
                         const std::string& description) {
    std::FILE* f = std::fopen((out_dir + "/schema.txt").c_str(), "ab");
    if (!f) return;
    std::fprintf(f, "%s: %s\n  columns: config_hash", file.c_str(), description.c_str());
    for (const auto& c : columns) std::fprintf(f, ",%s", c.c_str());
    std::fprintf(f, "\n");
    std::fclose(f);
}

}  // namespace nlde
