#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nsc/csv.hpp"
#include "nsc/errors.hpp"

namespace nsc {

// ==================== Cross-run summaries ===================================
//
// `run` appends one SummaryRow per (algo, dist, seed) to summary.csv;
// `report` groups those rows by (algo, dist) and prints mean +/- std
// cumulative loss, mean regret, mean set variation, and the safety rate.

struct SummaryRow {
    std::string scenario;
    std::string algo;
    std::string dist;
    long seed = 0;
    long T = 0;
    double cum_loss = 0.0;
    double S_T = 0.0;
    double regret = std::numeric_limits<double>::quiet_NaN();
    bool all_safe = true;
};

inline void write_summary_header(std::ostream& out) {
    out << "scenario,algo,dist,seed,T,cumulative_loss,S_T,regret,all_safe\n";
}

inline void write_summary_row(std::ostream& out, const SummaryRow& r) {
    out << r.scenario << ',' << r.algo << ',' << r.dist << ',' << r.seed << ',' << r.T << ','
        << fmt_g17(r.cum_loss) << ',' << fmt_g17(r.S_T) << ',' << fmt_g17(r.regret) << ','
        << (r.all_safe ? 1 : 0) << "\n";
}

inline std::vector<SummaryRow> read_summary_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<SummaryRow> rows;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line.front() == '#') continue;
        if (header) { header = false; continue; }
        const auto cells = detail::split_csv_row(line);
        if (cells.size() != 9) throw IoError("summary.csv: bad row '" + line + "'");
        SummaryRow r;
        r.scenario = cells[0];
        r.algo = cells[1];
        r.dist = cells[2];
        r.seed = std::stol(cells[3]);
        r.T = std::stol(cells[4]);
        r.cum_loss = std::stod(cells[5]);
        r.S_T = std::stod(cells[6]);
        r.regret = std::stod(cells[7]);
        r.all_safe = cells[8] == "1";
        rows.push_back(std::move(r));
    }
    return rows;
}

struct GroupStats {
    std::string algo;
    std::string dist;
    long n = 0;
    double loss_mean = 0.0, loss_std = 0.0;
    double regret_mean = 0.0;
    double S_T_mean = 0.0;
    double safety = 1.0;
};

inline std::vector<GroupStats> aggregate_summary(const std::vector<SummaryRow>& rows) {
    std::map<std::pair<std::string, std::string>, std::vector<const SummaryRow*>> groups;
    for (const SummaryRow& r : rows) groups[{r.algo, r.dist}].push_back(&r);
    std::vector<GroupStats> out;
    for (const auto& [key, members] : groups) {
        GroupStats g;
        g.algo = key.first;
        g.dist = key.second;
        g.n = static_cast<long>(members.size());
        double sum = 0, sum2 = 0, rsum = 0, ssum = 0;
        long safe = 0, rn = 0;
        for (const SummaryRow* r : members) {
            sum += r->cum_loss;
            sum2 += r->cum_loss * r->cum_loss;
            ssum += r->S_T;
            if (std::isfinite(r->regret)) { rsum += r->regret; ++rn; }
            if (r->all_safe) ++safe;
        }
        const double n = static_cast<double>(g.n);
        g.loss_mean = sum / n;
        g.loss_std = g.n > 1 ? std::sqrt(std::max(0.0, (sum2 - sum * sum / n) / (n - 1))) : 0.0;
        g.regret_mean = rn ? rsum / static_cast<double>(rn)
                           : std::numeric_limits<double>::quiet_NaN();
        g.S_T_mean = ssum / n;
        g.safety = static_cast<double>(safe) / n;
        out.push_back(std::move(g));
    }
    return out;
}

/// Fixed-width text table, one line per (algo, dist) group.
inline std::string format_report(const std::vector<GroupStats>& groups) {
    std::ostringstream out;
    out << std::left << std::setw(14) << "algo" << std::setw(13) << "dist" << std::right
        << std::setw(5) << "n" << std::setw(14) << "loss mean" << std::setw(12) << "loss std"
        << std::setw(14) << "regret" << std::setw(12) << "S_T" << std::setw(9) << "safe"
        << "\n";
    out << std::string(93, '-') << "\n";
    auto num = [](double v, int prec) {
        std::ostringstream s;
        if (std::isnan(v)) { s << "-"; return s.str(); }
        s << std::fixed << std::setprecision(prec) << v;
        return s.str();
    };
    for (const GroupStats& g : groups) {
        out << std::left << std::setw(14) << g.algo << std::setw(13) << g.dist << std::right
            << std::setw(5) << g.n << std::setw(14) << num(g.loss_mean, 3) << std::setw(12)
            << num(g.loss_std, 3) << std::setw(14) << num(g.regret_mean, 3) << std::setw(12)
            << num(g.S_T_mean, 4) << std::setw(9) << num(100.0 * g.safety, 1) << "\n";
    }
    return out.str();
}

} // namespace nsc
