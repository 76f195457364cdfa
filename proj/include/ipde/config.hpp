// Flat sectioned key=value configuration with one level of {...} maps for the
// kernel and quadrature blocks; line-precise parse and validation errors.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "ipde/expr.hpp"
#include "ipde/grid.hpp"
#include "ipde/kernel.hpp"
#include "ipde/operators.hpp"
#include "ipde/quadrature.hpp"

namespace ipde {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raw parsed file: "section/key" -> (value, line number). Section-less keys
/// live under "".
class ConfigFile {
public:
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_text(const std::string& text, const std::string& label = "<text>");

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key) const;
    double get_double_or(const std::string& section, const std::string& key,
                         double fallback) const;
    long get_int_or(const std::string& section, const std::string& key, long fallback) const;
    std::vector<double> get_doubles(const std::string& section, const std::string& key) const;
    /// "{ k = v, k = v }" value parsed into a flat map.
    std::map<std::string, std::string> get_map(const std::string& section,
                                               const std::string& key) const;
    std::vector<std::string> sections_matching(const std::string& prefix) const;

    [[noreturn]] void fail(const std::string& section, const std::string& key,
                           const std::string& message) const;
    const std::string& label() const { return label_; }

private:
    struct Entry {
        std::string value;
        int line;
    };
    std::string label_;
    std::map<std::string, Entry> entries_;  // "section/key"
    std::vector<std::string> section_order_;
};

/// Validated experiment description shared by every task.
struct ExperimentConfig {
    ConfigFile file;
    int dim = 1;
    BoxDomain grid_box;
    std::vector<int> nodes;
    Region domain;  // ball or box inside the grid box
    LevyKernel kernel;
    QuadratureParams quad;
    EllipticityParams ellip;
    Expr dirichlet;        // exterior data g
    std::string task;      // solve | verify-barrier | abp | harnack | holder | envelope | selftest
    std::uint64_t seed = 1;
    int threads = 1;
};

/// Parse + validate; throws ConfigError with the offending field and line.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig load_config_text(const std::string& text, const std::string& label = "<text>");

/// Kernel block: kernel = { family = ..., sigma/cutoff/radius/height/table_path }.
LevyKernel kernel_from_map(int dim, const std::map<std::string, std::string>& kv,
                           const ConfigFile& file);

}  // namespace ipde
