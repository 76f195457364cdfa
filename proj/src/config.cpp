#include "ipde/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace ipde {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str(), path);
}

ConfigFile ConfigFile::parse_text(const std::string& text, const std::string& label) {
    ConfigFile cf;
    cf.label_ = label;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(label + ":" + std::to_string(lineno) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            cf.section_order_.push_back(section);
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(label + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(label + ":" + std::to_string(lineno) + ": empty key");
        std::string full = section + "/" + key;
        if (cf.entries_.count(full))
            throw ConfigError(label + ":" + std::to_string(lineno) + ": duplicate key '" + full +
                              "'");
        cf.entries_[full] = {value, lineno};
    }
    return cf;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    return entries_.count(section + "/" + key) > 0;
}

std::string ConfigFile::get(const std::string& section, const std::string& key) const {
    auto it = entries_.find(section + "/" + key);
    if (it == entries_.end())
        throw ConfigError(label_ + ": missing required key '" +
                          (section.empty() ? key : section + "." + key) + "'");
    return it->second.value;
}

std::string ConfigFile::get_or(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
    auto it = entries_.find(section + "/" + key);
    return it == entries_.end() ? fallback : it->second.value;
}

double ConfigFile::get_double(const std::string& section, const std::string& key) const {
    std::string v = get(section, key);
    try {
        std::size_t used = 0;
        double x = std::stod(v, &used);
        if (trim(v.substr(used)).empty()) return x;
    } catch (const std::exception&) {
    }
    fail(section, key, "expected a number, got '" + v + "'");
}

double ConfigFile::get_double_or(const std::string& section, const std::string& key,
                                 double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
}

long ConfigFile::get_int_or(const std::string& section, const std::string& key,
                            long fallback) const {
    if (!has(section, key)) return fallback;
    double v = get_double(section, key);
    long r = long(v);
    if (double(r) != v) fail(section, key, "expected an integer");
    return r;
}

std::vector<double> ConfigFile::get_doubles(const std::string& section,
                                            const std::string& key) const {
    std::istringstream ss(get(section, key));
    std::vector<double> out;
    double v;
    while (ss >> v) out.push_back(v);
    if (out.empty()) fail(section, key, "expected one or more numbers");
    return out;
}

std::map<std::string, std::string> ConfigFile::get_map(const std::string& section,
                                                       const std::string& key) const {
    std::string v = get(section, key);
    if (v.size() < 2 || v.front() != '{' || v.back() != '}')
        fail(section, key, "expected a { k = v, ... } block");
    std::map<std::string, std::string> out;
    std::string body = v.substr(1, v.size() - 2);
    std::istringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        auto eq = item.find('=');
        if (eq == std::string::npos) fail(section, key, "expected k = v inside the block");
        out[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
    }
    return out;
}

std::vector<std::string> ConfigFile::sections_matching(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const std::string& s : section_order_)
        if (s.rfind(prefix, 0) == 0) out.push_back(s);
    return out;
}

void ConfigFile::fail(const std::string& section, const std::string& key,
                      const std::string& message) const {
    auto it = entries_.find(section + "/" + key);
    std::string where = it == entries_.end() ? "" : (":" + std::to_string(it->second.line));
    throw ConfigError(label_ + where + ": field '" +
                      (section.empty() ? key : section + "." + key) + "': " + message);
}

LevyKernel kernel_from_map(int dim, const std::map<std::string, std::string>& kv,
                           const ConfigFile& file) {
    auto need = [&](const std::string& k) {
        auto it = kv.find(k);
        if (it == kv.end())
            throw ConfigError(file.label() + ": kernel block missing '" + k + "'");
        return std::stod(it->second);
    };
    auto family = kv.count("family") ? kv.at("family") : "zero";
    if (family == "zero") return LevyKernel::zero(dim);
    if (family == "fractional") return LevyKernel::fractional(dim, need("sigma"));
    if (family == "truncated-fractional")
        return LevyKernel::truncated_fractional(dim, need("sigma"), need("cutoff"));
    if (family == "compact-uniform")
        return LevyKernel::compact_uniform(dim, need("radius"), need("height"));
    if (family == "tabulated") {
        auto it = kv.find("table_path");
        if (it == kv.end())
            throw ConfigError(file.label() + ": tabulated kernel needs table_path");
        return LevyKernel::tabulated_from_csv(dim, it->second);
    }
    throw ConfigError(file.label() + ": unknown kernel family '" + family + "'");
}

ExperimentConfig load_config_text(const std::string& text, const std::string& label) {
    ConfigFile file = ConfigFile::parse_text(text, label);
    ExperimentConfig cfg{file};

    cfg.dim = int(file.get_int_or("domain", "dim", 1));
    if (cfg.dim < 1 || cfg.dim > kMaxDim)
        file.fail("domain", "dim", "dimension must be between 1 and " + std::to_string(kMaxDim));

    auto lo = file.get_doubles("domain", "lo");
    auto hi = file.get_doubles("domain", "hi");
    if (int(lo.size()) != cfg.dim || int(hi.size()) != cfg.dim)
        file.fail("domain", "lo", "lo/hi must have 'dim' entries");
    Vec vlo(cfg.dim), vhi(cfg.dim);
    for (int i = 0; i < cfg.dim; ++i) {
        vlo[i] = lo[i];
        vhi[i] = hi[i];
        if (!(lo[i] < hi[i])) file.fail("domain", "hi", "need lo < hi componentwise");
    }
    cfg.grid_box = BoxDomain(vlo, vhi);

    std::string kind = file.get_or("domain", "kind", "box");
    if (kind == "box") {
        cfg.domain = Region::box(cfg.grid_box);
    } else if (kind == "ball") {
        auto c = file.get_doubles("domain", "center");
        double r = file.get_double("domain", "radius");
        if (int(c.size()) != cfg.dim) file.fail("domain", "center", "center must have dim entries");
        Vec vc(cfg.dim);
        for (int i = 0; i < cfg.dim; ++i) vc[i] = c[i];
        if (!(r > 0)) file.fail("domain", "radius", "radius must be positive");
        cfg.domain = Region::ball(vc, r);
    } else {
        file.fail("domain", "kind", "must be 'box' or 'ball'");
    }

    auto nodes = file.get_doubles("grid", "nodes");
    if (int(nodes.size()) != cfg.dim) file.fail("grid", "nodes", "need 'dim' node counts");
    for (double n : nodes) {
        if (n < 3 || n != std::floor(n)) file.fail("grid", "nodes", "node counts must be >= 3");
        cfg.nodes.push_back(int(n));
    }
    long cap = cfg.dim == 1 ? 4097 : 257;
    for (int n : cfg.nodes)
        if (n > cap)
            file.fail("grid", "nodes",
                      "desk-scale cap exceeded (" + std::to_string(cap) + " per axis)");

    cfg.kernel = file.has("", "kernel")
                     ? kernel_from_map(cfg.dim, file.get_map("", "kernel"), file)
                     : LevyKernel::zero(cfg.dim);

    if (file.has("", "quadrature")) {
        auto q = file.get_map("", "quadrature");
        if (q.count("inner_radius_cells")) {
            double cells = std::stod(q.at("inner_radius_cells"));
            double h = 0;
            for (int i = 0; i < cfg.dim; ++i)
                h = std::max(h, (vhi[i] - vlo[i]) / (cfg.nodes[i] - 1));
            cfg.quad.inner_radius = cells * h;
        }
        if (q.count("shells")) cfg.quad.shells_per_octave = int(std::stod(q.at("shells")));
        if (q.count("nodes_per_shell"))
            cfg.quad.nodes_per_shell = int(std::stod(q.at("nodes_per_shell")));
        if (q.count("tail_tol")) cfg.quad.tail_tol = std::stod(q.at("tail_tol"));
        if (cfg.quad.shells_per_octave < 1)
            file.fail("", "quadrature", "shells must be >= 1");
        if (cfg.quad.tail_tol <= 0) file.fail("", "quadrature", "tail_tol must be > 0");
    }

    double lambda = file.get_double_or("ellipticity", "lambda", 1.0);
    double Lambda = file.get_double_or("ellipticity", "Lambda", lambda);
    double C0 = file.get_double_or("ellipticity", "C0", 0.0);
    if (!(lambda > 0)) file.fail("ellipticity", "lambda", "lambda must be positive");
    if (Lambda < lambda)
        file.fail("ellipticity", "Lambda", "Lambda must be >= lambda");
    if (C0 < 0) file.fail("ellipticity", "C0", "C0 must be nonnegative");
    cfg.ellip = EllipticityParams(lambda, Lambda, C0);

    std::string gtext = file.get_or("problem", "g", "0");
    try {
        cfg.dirichlet = Expr::parse(gtext);
    } catch (const ExprParseError& e) {
        file.fail("problem", "g", e.what());
    }

    cfg.task = file.get("task", "kind");
    const char* known[] = {"solve", "verify-barrier", "abp", "harnack",
                           "holder", "envelope", "selftest"};
    if (std::find(std::begin(known), std::end(known), cfg.task) == std::end(known))
        file.fail("task", "kind", "unknown task '" + cfg.task + "'");

    cfg.seed = std::uint64_t(file.get_int_or("task", "seed", 1));
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_config_text(ss.str(), path);
}

}  // namespace ipde
