// Command-line front end: run scenarios, sweep horizons, summarize results.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "nsc/nsc.hpp"

namespace fs = std::filesystem;
using namespace nsc;

namespace {

std::pair<long, long> parse_seed_range(const std::string& s) {
    const size_t dots = s.find("..");
    if (dots == std::string::npos) {
        const long a = std::stol(s);
        return {a, a};
    }
    return {std::stol(s.substr(0, dots)), std::stol(s.substr(dots + 2))};
}

void append_summary(const fs::path& dir, const std::vector<SummaryRow>& rows) {
    const fs::path path = dir / "summary.csv";
    const bool fresh = !fs::exists(path);
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    if (fresh) write_summary_header(out);
    for (const SummaryRow& r : rows) write_summary_row(out, r);
}

std::vector<double> cumulative(const std::vector<double>& v) {
    std::vector<double> out;
    out.reserve(v.size());
    double s = 0.0;
    for (double x : v) out.push_back(s += x);
    return out;
}

std::vector<double> iota_steps(size_t n) {
    std::vector<double> t(n);
    for (size_t i = 0; i < n; ++i) t[i] = static_cast<double>(i + 1);
    return t;
}

int cmd_run(const std::string& scenario_path, const std::string& seeds_arg,
            const std::string& algo_arg, const std::string& out_arg,
            const std::vector<std::string>& dist_args, bool with_regret,
            bool literal_dynamics) {
    ScenarioConfig cfg = load_scenario_file(scenario_path, literal_dynamics);
    if (!seeds_arg.empty()) {
        auto [lo, hi] = parse_seed_range(seeds_arg);
        cfg.seed_lo = lo;
        cfg.seed_hi = hi;
    }
    const AlgoKind algo = algo_arg.empty() ? cfg.algo_kind : algo_kind_from_string(algo_arg);
    const fs::path out_dir = out_arg.empty() ? fs::path(cfg.out_dir) : fs::path(out_arg);
    fs::create_directories(out_dir);

    std::vector<std::string> dists = dist_args.empty() ? cfg.noise_names : dist_args;

    std::vector<SummaryRow> rows;
    std::vector<Series> loss_series;          // one per distribution (first seed)
    std::vector<Series> state_series;         // first distribution, first seed
    for (const std::string& dist : dists) {
        const NoiseSpec& spec = cfg.spec_for(dist);
        for (long seed = cfg.seed_lo; seed <= cfg.seed_hi; ++seed) {
            const RunLog log = run_scenario(cfg, algo, spec, static_cast<std::uint64_t>(seed));
            RunSummaryExtras extras;
            if (with_regret && !log.aborted) {
                const ComparatorTrajectory comp = scenario_comparator(cfg, log);
                extras.regret = dynamic_regret(log, comp);
                extras.C_T = path_length_CT(comp);
            }
            RunMeta meta{cfg.name, to_string(algo), dist, seed, log.T()};
            const std::string base = cfg.name + "_" + to_string(algo) + "_" + dist + "_seed" +
                                     std::to_string(seed);
            write_run_csv_file((out_dir / (base + ".csv")).string(), meta, log, extras);

            SummaryRow r;
            r.scenario = cfg.name;
            r.algo = to_string(algo);
            r.dist = dist;
            r.seed = seed;
            r.T = log.T();
            r.cum_loss = log.cumulative_loss();
            r.S_T = set_variation_ST(log);
            if (extras.regret) r.regret = *extras.regret;
            r.all_safe = log.all_safe();
            rows.push_back(std::move(r));

            if (seed == cfg.seed_lo) {
                Series s;
                s.label = dist;
                s.x = iota_steps(log.losses.size());
                s.y = cumulative(log.losses);
                loss_series.push_back(std::move(s));
                if (state_series.empty()) {
                    const Eigen::Index dx = log.states.empty() ? 0 : log.states[0].size();
                    for (Eigen::Index c = 0; c < dx; ++c) {
                        Series sc;
                        sc.label = "x" + std::to_string(c + 1);
                        for (size_t i = 0; i < log.states.size(); ++i) {
                            sc.x.push_back(static_cast<double>(i + 1));
                            sc.y.push_back(log.states[i](c));
                        }
                        state_series.push_back(std::move(sc));
                    }
                }
            }
            std::cout << cfg.name << " " << to_string(algo) << " " << dist << " seed=" << seed
                      << " loss=" << log.cumulative_loss()
                      << (log.all_safe() ? " safe" : " UNSAFE") << "\n";
        }
    }
    append_summary(out_dir, rows);
    const std::string prefix = cfg.name + "_" + to_string(algo);
    if (!state_series.empty())
        write_line_chart_file((out_dir / (prefix + "_state.svg")).string(),
                              "State trajectory (" + prefix + ")", "t", "x_t", state_series);
    if (!loss_series.empty())
        write_line_chart_file((out_dir / (prefix + "_cumloss.svg")).string(),
                              "Cumulative loss (" + prefix + ")", "t", "cumulative loss",
                              loss_series);
    return 0;
}

int cmd_sweep(const std::string& scenario_path, const std::string& horizons_arg,
              const std::string& algos_arg, const std::string& dist_arg,
              const std::string& out_arg, bool literal_dynamics) {
    ScenarioConfig cfg = load_scenario_file(scenario_path, literal_dynamics);
    const fs::path out_dir = out_arg.empty() ? fs::path(cfg.out_dir) : fs::path(out_arg);
    fs::create_directories(out_dir);

    std::vector<long> horizons;
    {
        std::istringstream in(horizons_arg);
        std::string tok;
        while (std::getline(in, tok, ',')) horizons.push_back(std::stol(tok));
        if (horizons.empty()) throw ConfigError("sweep: no horizons given");
    }
    std::vector<AlgoKind> algos;
    {
        std::istringstream in(algos_arg);
        std::string tok;
        while (std::getline(in, tok, ',')) algos.push_back(algo_kind_from_string(tok));
    }
    std::string dist = dist_arg;
    if (dist.empty()) {
        dist = cfg.noise_names.front();
        for (const std::string& d : cfg.noise_names)
            if (d == "uniform") dist = d;
    }
    const NoiseSpec& spec = cfg.spec_for(dist);

    std::ofstream sum(out_dir / "sweep_summary.csv");
    if (!sum) throw IoError("cannot open sweep_summary.csv for writing");
    sum << "algo,T,dist,mean_regret,mean_regret_per_T,mean_loss,safety\n";

    std::vector<Series> series;
    for (AlgoKind algo : algos) {
        Series s;
        s.label = to_string(algo);
        for (long T : horizons) {
            ScenarioConfig c = cfg;
            c.T = T;
            double regret_sum = 0.0, loss_sum = 0.0;
            long safe = 0, n = 0;
            for (long seed = cfg.seed_lo; seed <= cfg.seed_hi; ++seed) {
                const RunLog log = run_scenario(c, algo, spec, static_cast<std::uint64_t>(seed));
                const ComparatorTrajectory comp = scenario_comparator(c, log);
                regret_sum += dynamic_regret(log, comp);
                loss_sum += log.cumulative_loss();
                safe += log.all_safe() ? 1 : 0;
                ++n;
            }
            const double mean_regret = regret_sum / static_cast<double>(n);
            const double per_T = mean_regret / static_cast<double>(T);
            sum << to_string(algo) << ',' << T << ',' << dist << ',' << fmt_g17(mean_regret)
                << ',' << fmt_g17(per_T) << ',' << fmt_g17(loss_sum / static_cast<double>(n))
                << ',' << fmt_g17(static_cast<double>(safe) / static_cast<double>(n)) << "\n";
            std::cout << to_string(algo) << " T=" << T << " regret/T=" << per_T << "\n";
            s.x.push_back(static_cast<double>(T));
            s.y.push_back(per_T);
        }
        series.push_back(std::move(s));
    }
    write_line_chart_file((out_dir / (cfg.name + "_regret_vs_T.svg")).string(),
                          "Average regret vs horizon (" + dist + " noise)", "T", "Regret / T",
                          series);
    return 0;
}

int cmd_report(const std::string& in_dir) {
    const std::vector<SummaryRow> rows = read_summary_csv((fs::path(in_dir) / "summary.csv").string());
    if (rows.empty()) {
        std::cout << "no runs recorded in " << in_dir << "\n";
        return 0;
    }
    std::cout << format_report(aggregate_summary(rows));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Safe online control simulator: run scenarios, sweep horizons, report results"};
    app.require_subcommand(1);
    bool literal_dynamics = false;
    app.add_flag("--literal-pendulum", literal_dynamics,
                 "use the literally-printed pendulum velocity update");

    auto* run = app.add_subcommand("run", "execute a scenario and write CSV/SVG artifacts");
    std::string run_scenario_path, run_seeds, run_algo, run_out;
    std::vector<std::string> run_dists;
    bool run_regret = false;
    run->add_option("--scenario", run_scenario_path, "scenario file")->required();
    run->add_option("--seeds", run_seeds, "seed range a..b (default: scenario's)");
    run->add_option("--algo", run_algo,
                    "safe-ogd | safe-ader | lqr | greedy-oracle (default: scenario's)");
    run->add_option("--out", run_out, "output directory (default: scenario's)");
    run->add_option("--dist", run_dists, "restrict to these noise distributions");
    run->add_flag("--regret", run_regret, "also compute the greedy-comparator regret per run");

    auto* sweep = app.add_subcommand("sweep", "rerun at several horizons and chart regret/T");
    std::string sw_scenario_path, sw_horizons = "200,800,3200";
    std::string sw_algos = "safe-ogd,safe-ader", sw_dist, sw_out;
    sweep->add_option("--scenario", sw_scenario_path, "scenario file")->required();
    sweep->add_option("--horizons", sw_horizons, "comma-separated T values");
    sweep->add_option("--algos", sw_algos, "comma-separated algorithms");
    sweep->add_option("--dist", sw_dist, "noise distribution (default: uniform if listed)");
    sweep->add_option("--out", sw_out, "output directory (default: scenario's)");

    auto* report = app.add_subcommand("report", "print the summary table for a results directory");
    std::string rep_in;
    report->add_option("--in", rep_in, "directory containing summary.csv")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(run_scenario_path, run_seeds, run_algo, run_out, run_dists,
                           run_regret, literal_dynamics);
        if (sweep->parsed())
            return cmd_sweep(sw_scenario_path, sw_horizons, sw_algos, sw_dist, sw_out,
                             literal_dynamics);
        if (report->parsed()) return cmd_report(rep_in);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const SafeSetEmpty& e) {
        std::cerr << "safe set empty: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
