#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <optional>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "pme/csv.hpp"
#include "pme/error.hpp"
#include "pme/experiment.hpp"
#include "pme/filters.hpp"
#include "pme/long_run.hpp"
#include "pme/moments.hpp"
#include "pme/rank_select.hpp"
#include "pme/report.hpp"

namespace {

using namespace pme;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InputOptions {
    std::string input;
    std::string unit_col = "unit";
    std::string time_col = "time";
    std::vector<std::string> variables;
};

struct DesignOptions {
    std::string design = "var1";
    int r0 = 1;
    std::string model;
    std::string dist = "gaussian";
    double pr2 = 0.2;
    std::string speed = "moderate";
    bool factors = false;
    std::string persistence = "high";
    std::size_t n = 500;
    std::size_t t = 50;
    std::uint64_t seed = 1;
};

void add_input_options(CLI::App* cmd, InputOptions& o) {
    cmd->add_option("--input,-i", o.input, "long-format CSV file");
    cmd->add_option("--unit-col", o.unit_col, "unit identifier column")->capture_default_str();
    cmd->add_option("--time-col", o.time_col, "integer time column")->capture_default_str();
    cmd->add_option("--vars", o.variables, "value columns (default: all other columns)")->delimiter(',');
}

void add_design_options(CLI::App* cmd, DesignOptions& o) {
    cmd->add_option("--design", o.design, "var1 | varma | var_diff | pb")
        ->check(CLI::IsMember({"var1", "varma", "var_diff", "pb"}))
        ->capture_default_str();
    cmd->add_option("--r0", o.r0, "long-run relations for var1/varma (1 or 2)")->check(CLI::Range(1, 2))->capture_default_str();
    cmd->add_option("--model", o.model, "var1 | varma11 (overrides the design's model)")
        ->check(CLI::IsMember({"var1", "varma11"}));
    cmd->add_option("--dist", o.dist, "gaussian | chi2")->check(CLI::IsMember({"gaussian", "chi2"}))->capture_default_str();
    cmd->add_option("--pr2", o.pr2, "target pooled fit")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    cmd->add_option("--speed", o.speed, "moderate | slow")->check(CLI::IsMember({"moderate", "slow"}))->capture_default_str();
    cmd->add_flag("--factors", o.factors, "add interactive time effects");
    cmd->add_option("--persistence", o.persistence, "low | moderate | high (var_diff only)")
        ->check(CLI::IsMember({"low", "moderate", "high"}))
        ->capture_default_str();
    cmd->add_option("--n", o.n, "cross-section units")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--t", o.t, "time periods")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--seed", o.seed, "random seed")->capture_default_str();
}

Design make_design(const DesignOptions& o) {
    if (o.design == "var1" || o.design == "varma") {
        VecmDesign d;
        d.r0 = o.r0;
        d.model = o.design == "varma" ? Model::Varma11 : Model::Var1;
        if (!o.model.empty()) d.model = o.model == "varma11" ? Model::Varma11 : Model::Var1;
        d.errors = o.dist == "chi2" ? ErrorDist::ChiSquared : ErrorDist::Gaussian;
        d.speed = o.speed == "slow" ? Speed::Slow : Speed::Moderate;
        d.pr2_target = o.pr2;
        d.interactive_effects = o.factors;
        return d;
    }
    if (o.design == "var_diff") {
        VarDiffDesign d;
        d.persistence = o.persistence == "low"        ? Persistence::Low
                        : o.persistence == "moderate" ? Persistence::Moderate
                                                      : Persistence::High;
        d.interactive_effects = o.factors;
        return d;
    }
    return BivariateDesign{};
}

PanelDataset load_panel(const InputOptions& o) {
    CsvColumns cols;
    cols.unit = o.unit_col;
    cols.time = o.time_col;
    cols.values = o.variables;
    if (o.input == "-") return to_panel(read_csv_long(std::cin, cols));
    return to_panel(read_csv_long(o.input, cols));
}

SubsampleRule parse_q(const std::string& q) {
    if (q == "auto") return SubsampleRule::automatic();
    int v = 0;
    try {
        std::size_t used = 0;
        v = std::stoi(q, &used);
        if (used != q.size()) throw std::invalid_argument(q);
    } catch (const std::exception&) {
        throw UsageError("--q must be an integer >= 2 or 'auto', got '" + q + "'");
    }
    if (v < 2) throw UsageError("--q must be at least 2");
    return SubsampleRule::fixed(v);
}

// "a,b;c,d" -> rows separated by ';', entries by ','.
Matrix parse_matrix(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::stringstream rs(text);
    std::string row;
    while (std::getline(rs, row, ';')) {
        std::vector<double> vals;
        std::stringstream cs(row);
        std::string cell;
        while (std::getline(cs, cell, ',')) {
            try {
                std::size_t used = 0;
                vals.push_back(std::stod(cell, &used));
                while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw UsageError("cannot parse '" + cell + "' in --null");
            }
        }
        rows.push_back(std::move(vals));
    }
    if (rows.empty() || rows.front().empty()) throw UsageError("--null is empty");
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size()) throw UsageError("--null rows differ in length");
        for (std::size_t j = 0; j < rows[i].size(); ++j) out(i, j) = rows[i][j];
    }
    return out;
}

// Moves the named variables to the front, keeping the others in their order.
PanelDataset reorder(const PanelDataset& panel, const std::vector<std::string>& first) {
    std::vector<Eigen::Index> order;
    for (const auto& name : first) {
        const auto it = std::find(panel.variable_names.begin(), panel.variable_names.end(), name);
        if (it == panel.variable_names.end()) throw UsageError("--normalize-on: unknown variable '" + name + "'");
        const auto k = static_cast<Eigen::Index>(it - panel.variable_names.begin());
        if (std::find(order.begin(), order.end(), k) != order.end()) throw UsageError("--normalize-on: '" + name + "' repeated");
        order.push_back(k);
    }
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(panel.m()); ++k)
        if (std::find(order.begin(), order.end(), k) == order.end()) order.push_back(k);
    PanelDataset out;
    for (auto k : order) out.variable_names.push_back(panel.variable_names[static_cast<std::size_t>(k)]);
    for (const auto& u : panel.units) out.units.emplace_back(u.unit_id, u.times, Matrix(u.values(Eigen::all, order)));
    return out;
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

void print_matrix(std::ostream& os, const std::string& title, const Matrix& m, const std::vector<std::string>& rows,
                  int prec = 4) {
    os << title << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        os << "  " << std::setw(12) << std::left << (static_cast<std::size_t>(i) < rows.size() ? rows[i] : "") << std::right;
        for (Eigen::Index j = 0; j < m.cols(); ++j) os << std::setw(12) << fmt(m(i, j), prec);
        os << '\n';
    }
}

void print_sample(std::ostream& os, const SampleReport& s) {
    os << "Sample: n = " << s.n << ", m = " << s.m << ", T_i in [" << s.t_min << ", " << s.t_max
       << "], T_ave = " << fmt(s.t_ave, 2) << " (harmonic " << fmt(s.t_ave_harmonic, 2) << ")\n";
}

void print_selection(std::ostream& os, const RankSelectionReport& r) {
    os << "Eigenvalues of the scaled correlation matrix (ascending):\n  ";
    for (double e : r.eigenvalues) os << fmt(e) << "  ";
    os << "\n\n  " << std::setw(8) << "delta" << std::setw(14) << "threshold" << std::setw(10) << "r_tilde" << '\n';
    for (const auto& e : r.by_delta)
        os << "  " << std::setw(8) << fmt(e.delta, 3) << std::setw(14) << fmt(e.threshold) << std::setw(10) << e.r_tilde << '\n';
}

void print_estimate(std::ostream& os, const EstimateReport& e, const std::vector<std::string>& names) {
    os << "Outcome: " << e.outcome << '\n';
    if (e.outcome != "estimated") return;
    os << "Rank r = " << e.r << ", q = " << e.q_used << ", T_ave (variance) = " << fmt(e.t_ave, 2) << "\n\n";
    print_matrix(os, "Long-run matrix (columns are relations):", e.b_hat, names);
    std::vector<std::string> lower(names.begin() + std::min<std::size_t>(names.size(), e.r), names.end());
    if (e.theta_hat) print_matrix(os, "\nFree coefficients:", *e.theta_hat, lower);
    if (e.std_errors) print_matrix(os, "\nStandard errors:", *e.std_errors, lower);
    if (e.t_stats) print_matrix(os, "\nt statistics against the null values:", *e.t_stats, lower, 2);
    for (const auto& d : e.diagnostics) os << "note: " << d << '\n';
}

void print_experiment(std::ostream& os, const ExperimentReport& x) {
    os << "Design: " << x.description << "\nGenerator: " << x.generator << ", seed " << x.seed << ", "
       << x.replications << " replications, true rank " << x.r0 << "\n";
    for (const auto& c : x.cells) {
        os << "\nn = " << c.n << ", T = " << c.t << ": mean fit " << fmt(c.mean_pr2);
        if (c.mean_kappa) os << ", kappa " << fmt(*c.mean_kappa);
        if (c.generation_failures) os << ", generation failures " << c.generation_failures;
        os << '\n';
        for (const auto& q : c.by_q) {
            os << "  q = " << q.q << (q.failures ? " (failures " + std::to_string(q.failures) + ")" : "") << '\n';
            for (const auto& s : q.selection) {
                os << "    delta " << fmt(s.delta, 3) << " selection frequency r = 0.." << x.m << ":";
                for (double f : s.frequency) os << ' ' << fmt(f, 3);
                os << '\n';
            }
            if (!q.coefficients.empty())
                os << "    " << std::setw(8) << "coef" << std::setw(10) << "bias*100" << std::setw(10) << "rmse*100"
                   << std::setw(8) << "size" << std::setw(8) << "power" << '\n';
            for (const auto& k : q.coefficients)
                os << "    " << std::setw(8) << k.name << std::setw(10) << fmt(100 * k.bias, 2) << std::setw(10)
                   << fmt(100 * k.rmse, 2) << std::setw(8) << fmt(100 * k.size, 2) << std::setw(8) << fmt(100 * k.power, 2)
                   << '\n';
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pooled minimum eigenvalue estimation of long-run relations in panels"};
    app.require_subcommand(1);
    app.fallthrough();
    bool json = false;
    app.add_flag("--json", json, "emit a JSON report instead of a table");

    // select-rank
    auto* sel = app.add_subcommand("select-rank", "eigenvalue thresholding estimate of the number of relations");
    InputOptions sel_in;
    DesignOptions sel_sim;
    bool sel_simulate = false;
    std::string sel_q = "2";
    double sel_c = 1.0;
    std::vector<double> sel_deltas{0.25, 0.5};
    add_input_options(sel, sel_in);
    sel->add_flag("--simulate", sel_simulate, "use one simulated panel instead of --input");
    add_design_options(sel, sel_sim);
    sel->add_option("--q", sel_q, "sub-samples per unit, or 'auto'")->capture_default_str();
    sel->add_option("--c", sel_c, "threshold constant")->check(CLI::PositiveNumber)->capture_default_str();
    sel->add_option("--delta", sel_deltas, "threshold exponents")->delimiter(',')->check(CLI::Range(0.0, 1.0))->capture_default_str();

    // estimate
    auto* est = app.add_subcommand("estimate", "select the rank and estimate the long-run relations");
    InputOptions est_in;
    std::string est_q = "2";
    double est_c = 1.0;
    double est_delta = 0.25;
    std::optional<int> est_rank;
    std::vector<std::string> est_norm;
    std::string est_null;
    std::size_t est_min_t = 0;
    add_input_options(est, est_in);
    est->add_option("--q", est_q, "sub-samples per unit, or 'auto'")->capture_default_str();
    est->add_option("--delta", est_delta, "threshold exponent")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    est->add_option("--c", est_c, "threshold constant")->check(CLI::PositiveNumber)->capture_default_str();
    est->add_option("--rank", est_rank, "fix the number of relations instead of selecting it");
    est->add_option("--normalize-on", est_norm, "variables normalised to the identity block")->delimiter(',');
    est->add_option("--null", est_null, "null values for the free coefficients, rows split by ';'");
    est->add_option("--min-t", est_min_t, "drop units with fewer observations");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Monte Carlo experiment");
    DesignOptions sim_opt;
    sim_opt.n = 500;
    int sim_reps = 100;
    std::vector<int> sim_qs{2};
    std::vector<double> sim_deltas{0.25};
    double sim_c = 1.0;
    unsigned sim_threads = 0;
    std::optional<double> sim_kappa;
    add_design_options(sim, sim_opt);
    sim->add_option("--reps", sim_reps, "replications")->check(CLI::PositiveNumber)->capture_default_str();
    sim->add_option("--q", sim_qs, "sub-sample counts evaluated on the same panels")->delimiter(',')->check(CLI::Range(2, 1000))->capture_default_str();
    sim->add_option("--delta", sim_deltas, "threshold exponents")->delimiter(',')->check(CLI::Range(0.0, 1.0))->capture_default_str();
    sim->add_option("--c", sim_c, "threshold constant")->check(CLI::PositiveNumber)->capture_default_str();
    sim->add_option("--threads", sim_threads, "worker threads (0 = all cores)")->capture_default_str();
    sim->add_option("--kappa", sim_kappa, "fix the loading scale instead of calibrating it");

    // filter
    auto* fil = app.add_subcommand("filter", "clean a panel and log excluded units");
    InputOptions fil_in;
    std::string fil_out = "-";
    std::string fil_log;
    std::size_t fil_min_t = 20;
    bool fil_positive = false;
    bool fil_logt = false;
    std::vector<std::string> fil_trim;
    double fil_lower = 1.0;
    double fil_upper = 99.0;
    std::string fil_gaps = "drop";
    add_input_options(fil, fil_in);
    fil->add_option("--output,-o", fil_out, "cleaned CSV ('-' for stdout)")->capture_default_str();
    fil->add_option("--log", fil_log, "write the exclusion log as CSV to this file");
    fil->add_option("--min-t", fil_min_t, "minimum consecutive observations")->capture_default_str();
    fil->add_flag("--positive", fil_positive, "drop units with non-positive values");
    fil->add_flag("--log-transform", fil_logt, "take natural logs of the surviving values");
    fil->add_option("--trim", fil_trim, "ratio NUM/DEN whose unit means are trimmed")->delimiter(',');
    fil->add_option("--trim-lower", fil_lower, "lower percentile")->check(CLI::Range(0.0, 100.0))->capture_default_str();
    fil->add_option("--trim-upper", fil_upper, "upper percentile")->check(CLI::Range(0.0, 100.0))->capture_default_str();
    fil->add_option("--gaps", fil_gaps, "drop | longest")->check(CLI::IsMember({"drop", "longest"}))->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        RunReport report;
        std::ostringstream table;

        if (*sel) {
            if (sel_simulate == !sel_in.input.empty()) throw UsageError("select-rank needs exactly one of --input or --simulate");
            report.config.command = "select-rank";
            report.config.q = sel_q;
            report.config.c = sel_c;
            report.config.deltas = sel_deltas;
            PanelDataset panel;
            if (sel_simulate) {
                panel = simulate_panel(make_design(sel_sim), sel_sim.n, sel_sim.t, {sel_sim.seed, 0, 0}).panel;
                report.config.seed = sel_sim.seed;
            } else {
                panel = load_panel(sel_in);
                report.config.input = sel_in.input;
            }
            report.config.variables = panel.variable_names;
            EstimationConfig cfg;
            cfg.q = parse_q(sel_q);
            cfg.c = sel_c;
            require_valid(panel, cfg);
            const auto scaled = scale_by_diff_sd(panel);
            const auto plan = make_plan(scaled.panel, cfg.q);
            const auto corr = correlation_from_covariance(pooled_covariance(scaled.panel, plan).q);
            const auto eig = symmetric_eigen(corr);
            report.sample = describe_sample(panel);
            report.rank_selection = describe_selection(eig.values, plan.t_ave_arith, sel_deltas, sel_c);
            print_sample(table, *report.sample);
            table << '\n';
            print_selection(table, *report.rank_selection);
        } else if (*est) {
            if (est_in.input.empty()) throw UsageError("estimate needs --input");
            report.config.command = "estimate";
            report.config.q = est_q;
            report.config.c = est_c;
            report.config.deltas = {est_delta};
            report.config.rank = est_rank;
            report.config.input = est_in.input;
            PanelDataset panel = load_panel(est_in);
            if (est_min_t > 0) {
                FilterSpec fs;
                fs.min_t = est_min_t;
                auto filtered = apply_filters(to_raw(panel), fs);
                panel = std::move(filtered.panel);
                report.exclusions = std::move(filtered.exclusions);
            }
            if (!est_norm.empty()) panel = reorder(panel, est_norm);
            report.config.variables = panel.variable_names;
            const int m = static_cast<int>(panel.m());
            if (est_rank && (*est_rank < 1 || *est_rank >= m))
                throw UsageError("--rank must lie in 1.." + std::to_string(m - 1) + " for " + std::to_string(m) + " variables");
            if (!est_norm.empty() && est_rank && static_cast<int>(est_norm.size()) != *est_rank)
                throw UsageError("--normalize-on must name exactly r variables");
            EstimationConfig cfg;
            cfg.q = parse_q(est_q);
            cfg.delta = est_delta;
            cfg.c = est_c;
            cfg.rank = est_rank;
            if (!est_null.empty()) cfg.null_values = parse_matrix(est_null);
            const auto result = estimate(panel, cfg);
            if (!est_norm.empty() && result.estimate && static_cast<int>(est_norm.size()) != result.estimate->r)
                throw UsageError("--normalize-on names " + std::to_string(est_norm.size()) + " variables but r = " +
                                 std::to_string(result.estimate->r));
            report.sample = describe_sample(panel);
            if (result.selection)
                report.rank_selection = describe_selection(result.selection->eigenvalues, result.selection->t_ave, {est_delta}, est_c);
            report.estimate = describe_estimate(result);
            print_sample(table, *report.sample);
            if (report.exclusions && !report.exclusions->empty())
                table << "Excluded units: " << report.exclusions->size() << '\n';
            if (report.rank_selection) {
                table << '\n';
                print_selection(table, *report.rank_selection);
            }
            table << '\n';
            print_estimate(table, *report.estimate, panel.variable_names);
        } else if (*sim) {
            report.config.command = "simulate";
            report.config.q.clear();
            for (std::size_t k = 0; k < sim_qs.size(); ++k) report.config.q += (k ? "," : "") + std::to_string(sim_qs[k]);
            report.config.c = sim_c;
            report.config.deltas = sim_deltas;
            report.config.seed = sim_opt.seed;
            ExperimentSpec spec;
            spec.design = make_design(sim_opt);
            spec.cells = {{sim_opt.n, sim_opt.t}};
            spec.replications = sim_reps;
            spec.qs = sim_qs;
            spec.deltas = sim_deltas;
            spec.c = sim_c;
            spec.seed = sim_opt.seed;
            spec.threads = sim_threads;
            spec.kappa = sim_kappa;
            report.experiment = run_experiment(spec);
            print_experiment(table, *report.experiment);
        } else if (*fil) {
            if (fil_in.input.empty()) throw UsageError("filter needs --input");
            report.config.command = "filter";
            report.config.input = fil_in.input;
            CsvColumns cols{fil_in.unit_col, fil_in.time_col, fil_in.variables};
            const RawPanel raw = fil_in.input == "-" ? read_csv_long(std::cin, cols) : read_csv_long(fil_in.input, cols);
            FilterSpec fs;
            fs.min_t = fil_min_t;
            fs.require_positive = fil_positive;
            fs.log_transform = fil_logt;
            fs.gap_policy = fil_gaps == "longest" ? GapPolicy::LongestRun : GapPolicy::Drop;
            for (const auto& t : fil_trim) {
                const auto slash = t.find('/');
                if (slash == std::string::npos) throw UsageError("--trim expects NUM/DEN, got '" + t + "'");
                fs.trim_ratios.push_back({t.substr(0, slash), t.substr(slash + 1), fil_lower, fil_upper});
            }
            auto result = apply_filters(raw, fs);
            report.config.variables = result.panel.variable_names;
            report.sample = describe_sample(result.panel);
            report.exclusions = result.exclusions;
            if (fil_out == "-" && !json) {
                write_csv_long(std::cout, result.panel, fil_in.unit_col, fil_in.time_col);
            } else if (fil_out != "-") {
                std::ofstream out(fil_out);
                if (!out) throw InputError("cannot write " + fil_out);
                write_csv_long(out, result.panel, fil_in.unit_col, fil_in.time_col);
            }
            if (!fil_log.empty()) {
                std::ofstream log(fil_log);
                if (!log) throw InputError("cannot write " + fil_log);
                log << "unit,filter,reason\n";
                for (const auto& e : result.exclusions) log << e.unit_id << ',' << e.filter << ",\"" << e.reason << "\"\n";
            }
            print_sample(table, *report.sample);
            table << "Excluded units: " << result.exclusions.size() << '\n';
            for (const auto& e : result.exclusions)
                table << "  " << e.unit_id << " (filter " << e.filter << "): " << e.reason << '\n';
            // The cleaned data already occupies stdout in table mode.
            if (fil_out == "-" && !json) {
                std::cerr << table.str();
                return 0;
            }
        }

        if (json) std::cout << to_json(report);
        else std::cout << table.str();
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
