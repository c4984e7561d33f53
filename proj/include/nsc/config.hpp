#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nsc/errors.hpp"
#include "nsc/scenario.hpp"

namespace nsc {

// ===================== Flat sectioned key-value files =======================
//
// Scenario files use a small TOML-style dialect: [section] headers, one
// key = value pair per line, '#' comments.  Vectors are whitespace- or
// comma-separated numbers ("0 0.5"); matrices separate rows with ';'
// ("1 0; 0 1"); seed ranges use "a..b".  The full schema is documented in the
// README next to the shipped scenario files.

namespace detail {

inline std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline std::string strip_quotes(const std::string& s) {
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                          (s.front() == '\'' && s.back() == '\'')))
        return s.substr(1, s.size() - 2);
    return s;
}

} // namespace detail

/// Raw parsed file: section -> key -> value string.
class ConfigFile {
public:
    static ConfigFile parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse_string(ss.str(), path);
    }

    static ConfigFile parse_string(const std::string& text, const std::string& origin = "<string>") {
        ConfigFile cf;
        std::istringstream in(text);
        std::string line, section;
        long lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError(origin + ":" + std::to_string(lineno) +
                                      ": unterminated section header");
                section = detail::trim(line.substr(1, line.size() - 2));
                continue;
            }
            const size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
            const std::string key = detail::trim(line.substr(0, eq));
            const std::string val = detail::strip_quotes(detail::trim(line.substr(eq + 1)));
            if (key.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
            data_of(cf)[section][key] = val;
        }
        return cf;
    }

    bool has(const std::string& section, const std::string& key) const {
        auto s = data_.find(section);
        return s != data_.end() && s->second.count(key) > 0;
    }

    std::string get(const std::string& section, const std::string& key) const {
        auto s = data_.find(section);
        if (s == data_.end() || !s->second.count(key))
            throw ConfigError("missing config key [" + section + "] " + key);
        return s->second.at(key);
    }

    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& dflt) const {
        return has(section, key) ? get(section, key) : dflt;
    }

    double get_double(const std::string& section, const std::string& key) const {
        return to_double(get(section, key), section, key);
    }
    double get_double_or(const std::string& section, const std::string& key, double dflt) const {
        return has(section, key) ? get_double(section, key) : dflt;
    }
    long get_long(const std::string& section, const std::string& key) const {
        const std::string v = get(section, key);
        try {
            size_t pos = 0;
            const long out = std::stol(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return out;
        } catch (const std::exception&) {
            throw ConfigError("config key [" + section + "] " + key + " = '" + v +
                              "' is not an integer");
        }
    }
    long get_long_or(const std::string& section, const std::string& key, long dflt) const {
        return has(section, key) ? get_long(section, key) : dflt;
    }
    bool get_bool_or(const std::string& section, const std::string& key, bool dflt) const {
        if (!has(section, key)) return dflt;
        const std::string v = get(section, key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError("config key [" + section + "] " + key + " = '" + v +
                          "' is not a boolean");
    }

    Vector get_vector(const std::string& section, const std::string& key) const {
        return to_vector(get(section, key), section, key);
    }
    Matrix get_matrix(const std::string& section, const std::string& key) const {
        const std::string v = get(section, key);
        std::vector<Vector> rows;
        std::string chunk;
        std::istringstream in(v);
        while (std::getline(in, chunk, ';')) rows.push_back(to_vector(chunk, section, key));
        if (rows.empty()) throw ConfigError("config key [" + section + "] " + key + " is empty");
        Matrix m(static_cast<Eigen::Index>(rows.size()), rows[0].size());
        for (size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != m.cols())
                throw ConfigError("config key [" + section + "] " + key +
                                  ": ragged matrix rows");
            m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
        }
        return m;
    }

    std::vector<std::string> get_list(const std::string& section, const std::string& key) const {
        std::vector<std::string> out;
        std::istringstream in(get(section, key));
        std::string tok;
        while (std::getline(in, tok, ',')) {
            tok = detail::trim(tok);
            if (!tok.empty()) out.push_back(tok);
        }
        return out;
    }

    /// "a..b" inclusive range, or a single value "a" meaning a..a.
    std::pair<long, long> get_range(const std::string& section, const std::string& key) const {
        const std::string v = get(section, key);
        const size_t dots = v.find("..");
        try {
            if (dots == std::string::npos) {
                const long a = std::stol(v);
                return {a, a};
            }
            return {std::stol(v.substr(0, dots)), std::stol(v.substr(dots + 2))};
        } catch (const std::exception&) {
            throw ConfigError("config key [" + section + "] " + key + " = '" + v +
                              "' is not a range");
        }
    }

    const std::map<std::string, std::map<std::string, std::string>>& sections() const {
        return data_;
    }

private:
    static std::map<std::string, std::map<std::string, std::string>>& data_of(ConfigFile& cf) {
        return cf.data_;
    }
    static double to_double(const std::string& v, const std::string& section,
                            const std::string& key) {
        try {
            size_t pos = 0;
            const double out = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return out;
        } catch (const std::exception&) {
            throw ConfigError("config key [" + section + "] " + key + " = '" + v +
                              "' is not a number");
        }
    }
    static Vector to_vector(const std::string& s, const std::string& section,
                            const std::string& key) {
        std::vector<double> vals;
        std::string cleaned = s;
        for (char& c : cleaned)
            if (c == ',') c = ' ';
        std::istringstream in(cleaned);
        std::string tok;
        while (in >> tok) vals.push_back(to_double(tok, section, key));
        if (vals.empty())
            throw ConfigError("config key [" + section + "] " + key + " has no numbers");
        Vector v(static_cast<Eigen::Index>(vals.size()));
        for (size_t i = 0; i < vals.size(); ++i) v(static_cast<Eigen::Index>(i)) = vals[i];
        return v;
    }

    std::map<std::string, std::map<std::string, std::string>> data_;
};

// ===================== Scenario assembly ====================================

namespace detail {

inline NoiseSpec parse_noise_spec(const ConfigFile& cf, const std::string& name,
                                  NoiseSpec::Centering centering) {
    NoiseSpec spec;
    spec.kind = noise_kind_from_string(name);
    spec.centering = centering;
    // documented defaults per family
    switch (spec.kind) {
        case NoiseKind::Gaussian: spec.a = 0.0; spec.b = 0.5; break;
        case NoiseKind::Uniform: spec.a = -1.0; spec.b = 1.0; break;
        case NoiseKind::Gamma: spec.a = 2.0; spec.b = 0.5; break;
        case NoiseKind::Beta: spec.a = 2.0; spec.b = 2.0; spec.lo = -1.0; spec.hi = 1.0; break;
        case NoiseKind::Exponential: spec.a = 1.0; break;
        case NoiseKind::Weibull: spec.a = 1.5; spec.b = 1.0; break;
        case NoiseKind::Laplace: spec.a = 0.0; spec.b = 1.0; break;
    }
    if (cf.has("noise", name)) {
        const Vector prm = cf.get_vector("noise", name);
        if (prm.size() >= 1) spec.a = prm(0);
        if (prm.size() >= 2) spec.b = prm(1);
        if (prm.size() >= 4) { spec.lo = prm(2); spec.hi = prm(3); }
        if (spec.kind == NoiseKind::Beta && prm.size() == 2) { spec.lo = -1.0; spec.hi = 1.0; }
    }
    spec.validate();
    return spec;
}

inline Polytope parse_polytope(const ConfigFile& cf, const std::string& box_key,
                               const std::string& L_key, const std::string& l_key,
                               Eigen::Index dim, const char* what) {
    if (cf.has("constraints", box_key)) {
        Vector bound = cf.get_vector("constraints", box_key);
        if (bound.size() == 1 && dim > 1) bound = Vector::Constant(dim, bound(0));
        if (bound.size() != dim)
            throw ConfigError(std::string("constraints: ") + box_key + " dim vs plant");
        return Polytope::box(bound);
    }
    if (cf.has("constraints", L_key) && cf.has("constraints", l_key)) {
        Matrix L = cf.get_matrix("constraints", L_key);
        Vector l = cf.get_vector("constraints", l_key);
        if (L.cols() != dim)
            throw ConfigError(std::string("constraints: ") + L_key + " cols vs plant dim");
        return Polytope(std::move(L), std::move(l));
    }
    throw ConfigError(std::string("constraints: provide either ") + box_key + " or " + L_key +
                      "/" + l_key + " for the " + what + " polytope");
}

} // namespace detail

/// Assemble a full scenario from a parsed file.  `literal_dynamics` switches
/// registered plants to their literally-printed update where one exists.
inline ScenarioConfig load_scenario(const ConfigFile& cf, const std::string& fallback_name,
                                    bool literal_dynamics = false) {
    ScenarioConfig cfg;
    cfg.name = cf.get_or("run", "name", fallback_name);

    // ---- plant ----
    const std::string type = cf.get_or("system", "type", "ltv");
    if (type == "ltv") {
        cfg.is_ltv = true;
        const Matrix A = cf.get_matrix("system", "A");
        const Matrix B0 = cf.get_matrix("system", "B");
        Matrix B = B0;
        if (B.rows() != A.rows() && B.cols() == A.rows()) B = B0.transpose();
        const double kA = cf.get_double_or("system", "kappa_A", spectral_norm(A) + 1e-9);
        const double kB = cf.get_double_or("system", "kappa_B", spectral_norm(B) + 1e-9);
        cfg.ltv = LtvSystem(Schedule<Matrix>(A), Schedule<Matrix>(B), kA, kB);
    } else if (type == "affine") {
        cfg.is_ltv = false;
        cfg.affine_name = cf.get("system", "name");
        auto it = affine_registry().find(cfg.affine_name);
        if (it == affine_registry().end())
            throw ConfigError("system: no registered plant named '" + cfg.affine_name + "'");
        auto sect = cf.sections().find("system");
        for (const auto& [k, v] : sect->second) {
            if (k == "type" || k == "name") continue;
            try {
                cfg.affine_params[k] = std::stod(v);
            } catch (const std::exception&) {
                throw ConfigError("system: parameter " + k + " = '" + v + "' is not a number");
            }
        }
        cfg.affine = it->second(cfg.affine_params, literal_dynamics);
    } else {
        throw ConfigError("system: type must be 'ltv' or 'affine', got '" + type + "'");
    }

    const OneStepModel model = cfg.is_ltv ? make_view(*cfg.ltv) : make_view(*cfg.affine);

    // ---- constraints ----
    cfg.state_con = detail::parse_polytope(cf, "x_max", "Lx", "lx", model.dx, "state");
    cfg.input_con = detail::parse_polytope(cf, "u_max", "Lu", "lu", model.du, "input");

    // ---- loss ----
    Matrix Q = cf.has("loss", "Q") ? cf.get_matrix("loss", "Q")
                                   : Matrix::Identity(model.dx, model.dx);
    Matrix R = cf.has("loss", "R") ? cf.get_matrix("loss", "R")
                                   : Matrix::Identity(model.du, model.du);
    if (Q.rows() == 1 && model.dx > 1) Q = Matrix(Q(0, 0) * Matrix::Identity(model.dx, model.dx));
    if (R.rows() == 1 && model.du > 1) R = Matrix(R(0, 0) * Matrix::Identity(model.du, model.du));
    cfg.loss = QuadraticLoss(Schedule<Matrix>(Q), Schedule<Matrix>(R));

    // ---- learner knobs ----
    cfg.algo.policy =
        policy_kind_from_string(cf.get_or("algorithm", "policy", "state-feedback"));
    cfg.algo.kappa = cf.get_double_or("algorithm", "kappa", 5.0);
    cfg.algo.gamma = cf.get_double_or("algorithm", "gamma", 0.1);
    cfg.algo.alpha = cf.get_double_or("algorithm", "alpha", 0.5);
    if (cf.has("algorithm", "eta")) cfg.algo.eta = cf.get_double("algorithm", "eta");
    if (cf.has("algorithm", "D_f")) cfg.algo.D_f = cf.get_double("algorithm", "D_f");
    if (cf.has("algorithm", "G_f")) cfg.algo.G_f = cf.get_double("algorithm", "G_f");
    cfg.algo.horizon_H = static_cast<int>(cf.get_long_or("algorithm", "H", 1));
    if (cf.has("algorithm", "init")) cfg.algo.init_decision = cf.get_matrix("algorithm", "init");
    cfg.algo.row_norm_tightening = cf.get_bool_or("algorithm", "row_norm_tightening", true);
    cfg.algo.ader_full_meta = cf.get_bool_or("algorithm", "ader_full_meta", false);
    cfg.algo_kind = algo_kind_from_string(cf.get_or("algorithm", "algo", "safe-ogd"));

    // ---- noise ----
    cfg.W = cf.get_double("noise", "W");
    const std::string centering_s = cf.get_or("noise", "centering", "mean");
    NoiseSpec::Centering centering;
    if (centering_s == "mean") centering = NoiseSpec::Centering::Mean;
    else if (centering_s == "none") centering = NoiseSpec::Centering::None;
    else throw ConfigError("noise: centering must be 'mean' or 'none'");
    std::vector<std::string> dists;
    if (cf.has("noise", "distributions")) dists = cf.get_list("noise", "distributions");
    else dists = {"gaussian"};
    for (const std::string& d : dists) {
        cfg.noise_names.push_back(d);
        cfg.noise_menu.push_back(detail::parse_noise_spec(cf, d, centering));
    }

    // ---- run geometry ----
    cfg.T = cf.get_long("run", "T");
    cfg.x1 = cf.get_vector("run", "x1");
    if (cf.has("run", "seeds")) {
        auto [lo, hi] = cf.get_range("run", "seeds");
        cfg.seed_lo = lo;
        cfg.seed_hi = hi;
    }
    cfg.out_dir = cf.get_or("run", "out", cfg.out_dir);
    if (cfg.x1.size() != model.dx) throw ConfigError("run: x1 dim vs plant dx");
    return cfg;
}

inline ScenarioConfig load_scenario_file(const std::string& path, bool literal_dynamics = false) {
    std::string base = path;
    const size_t slash = base.find_last_of('/');
    if (slash != std::string::npos) base = base.substr(slash + 1);
    const size_t dot = base.find_last_of('.');
    if (dot != std::string::npos) base = base.substr(0, dot);
    return load_scenario(ConfigFile::parse_file(path), base, literal_dynamics);
}

} // namespace nsc
