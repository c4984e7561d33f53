#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nsc/errors.hpp"
#include "nsc/linalg.hpp"
#include "nsc/metrics.hpp"

namespace nsc {

// ======================== Run logs on disk ==================================
//
// One file per (scenario, algorithm, distribution, seed).  Layout:
//
//   # key=value ... metadata line
//   t,x,u,w,loss,zeta,safe_state,safe_input
//   1,1;0,-0.5,0.03;0.01,1.25,0,1,1
//   ...
//   # cumulative_loss = <g17>
//   # S_T = <g17>
//   # regret = <g17>          (only when a comparator was attached)
//   # C_T = <g17>             (ditto)
//   # x_final = <v1;v2;...>
//
// Vector-valued columns join components with ';'.  Every number is printed
// with %.17g so a reader can re-derive each safety flag and the summary
// lines exactly: row t's safe_state refers to the state on row t+1, the
// last row's to x_final.

namespace detail {

inline std::string join_components(const Vector& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ';';
        out += fmt_g17(v(i));
    }
    return out;
}

inline Vector split_components(const std::string& s, const char* what) {
    std::vector<double> vals;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ';')) {
        try {
            vals.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw IoError(std::string("csv: bad number '") + tok + "' in " + what);
        }
    }
    if (vals.empty()) throw IoError(std::string("csv: empty vector field in ") + what);
    Vector v(static_cast<Eigen::Index>(vals.size()));
    for (size_t i = 0; i < vals.size(); ++i) v(static_cast<Eigen::Index>(i)) = vals[i];
    return v;
}

inline std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (std::getline(in, tok, ',')) out.push_back(tok);
    return out;
}

} // namespace detail

/// Identifying metadata carried in the file's first comment line.
struct RunMeta {
    std::string scenario;
    std::string algo;
    std::string dist;
    long seed = 0;
    long T = 0;
};

/// Comparator-derived quantities, present only when one was computed.
struct RunSummaryExtras {
    std::optional<double> regret;
    std::optional<double> C_T;
};

inline void write_run_csv(std::ostream& out, const RunMeta& meta, const RunLog& log,
                          const RunSummaryExtras& extras = {}) {
    if (!log.states.empty()) log.validate();
    out << "# scenario=" << meta.scenario << " algo=" << meta.algo << " dist=" << meta.dist
        << " seed=" << meta.seed << " T=" << meta.T << "\n";
    out << "t,x,u,w,loss,zeta,safe_state,safe_input\n";
    for (long t = 1; t <= log.T(); ++t) {
        const size_t i = static_cast<size_t>(t - 1);
        out << t << ',' << detail::join_components(log.states[i]) << ','
            << detail::join_components(log.inputs[i]) << ','
            << detail::join_components(log.noises[i]) << ',' << fmt_g17(log.losses[i]) << ','
            << fmt_g17(log.zetas[i]) << ',' << (log.safe_state[i] ? 1 : 0) << ','
            << (log.safe_input[i] ? 1 : 0) << "\n";
    }
    out << "# cumulative_loss = " << fmt_g17(log.cumulative_loss()) << "\n";
    out << "# S_T = " << fmt_g17(set_variation_ST(log)) << "\n";
    if (extras.regret) out << "# regret = " << fmt_g17(*extras.regret) << "\n";
    if (extras.C_T) out << "# C_T = " << fmt_g17(*extras.C_T) << "\n";
    if (log.aborted) out << "# aborted = " << log.abort_reason << "\n";
    if (!log.states.empty())
        out << "# x_final = " << detail::join_components(log.states.back()) << "\n";
}

inline void write_run_csv_file(const std::string& path, const RunMeta& meta, const RunLog& log,
                               const RunSummaryExtras& extras = {}) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_run_csv(out, meta, log, extras);
}

struct ParsedRun {
    RunMeta meta;
    RunLog log;
    RunSummaryExtras extras;
};

/// Parse a run CSV back into (meta, log, extras).  The cumulative-loss
/// summary line is cross-checked against the recomputed value.
inline ParsedRun read_run_csv(std::istream& in) {
    ParsedRun pr;
    std::map<std::string, std::string> summary;
    std::string line;
    bool header_seen = false;
    bool meta_seen = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') {
            std::string body = line.substr(1);
            const size_t eq = body.find('=');
            if (!meta_seen) {
                // metadata line: space-separated key=value pairs
                std::istringstream ms(body);
                std::string kv;
                while (ms >> kv) {
                    const size_t p = kv.find('=');
                    if (p == std::string::npos) continue;
                    const std::string k = kv.substr(0, p), v = kv.substr(p + 1);
                    if (k == "scenario") pr.meta.scenario = v;
                    else if (k == "algo") pr.meta.algo = v;
                    else if (k == "dist") pr.meta.dist = v;
                    else if (k == "seed") pr.meta.seed = std::stol(v);
                    else if (k == "T") pr.meta.T = std::stol(v);
                }
                meta_seen = true;
            } else if (eq != std::string::npos) {
                std::string k = body.substr(0, eq), v = body.substr(eq + 1);
                k.erase(0, k.find_first_not_of(' '));
                k.erase(k.find_last_not_of(' ') + 1);
                v.erase(0, v.find_first_not_of(' '));
                summary[k] = v;
            }
            continue;
        }
        if (!header_seen) {
            if (line.rfind("t,", 0) != 0) throw IoError("csv: missing header row");
            header_seen = true;
            continue;
        }
        const auto cells = detail::split_csv_row(line);
        if (cells.size() != 8) throw IoError("csv: expected 8 columns, got row '" + line + "'");
        RunLog& log = pr.log;
        log.states.push_back(detail::split_components(cells[1], "x"));
        log.inputs.push_back(detail::split_components(cells[2], "u"));
        log.noises.push_back(detail::split_components(cells[3], "w"));
        log.losses.push_back(std::stod(cells[4]));
        log.zetas.push_back(std::stod(cells[5]));
        log.safe_state.push_back(cells[6] == "1");
        log.safe_input.push_back(cells[7] == "1");
    }
    auto it = summary.find("x_final");
    if (it != summary.end()) {
        pr.log.states.push_back(detail::split_components(it->second, "x_final"));
    } else if (!pr.log.inputs.empty()) {
        throw IoError("csv: missing x_final summary line");
    }
    if (!pr.log.states.empty()) pr.log.validate();
    it = summary.find("aborted");
    if (it != summary.end()) {
        pr.log.aborted = true;
        pr.log.abort_reason = it->second;
    }
    it = summary.find("regret");
    if (it != summary.end()) pr.extras.regret = std::stod(it->second);
    it = summary.find("C_T");
    if (it != summary.end()) pr.extras.C_T = std::stod(it->second);
    it = summary.find("cumulative_loss");
    if (it != summary.end()) {
        const double stated = std::stod(it->second);
        if (std::abs(stated - pr.log.cumulative_loss()) > 1e-9 * (1.0 + std::abs(stated)))
            throw IoError("csv: cumulative_loss summary disagrees with rows");
    }
    return pr;
}

inline ParsedRun read_run_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return read_run_csv(in);
}

} // namespace nsc
