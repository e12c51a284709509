#include "pme/experiment.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "pme/error.hpp"
#include "pme/long_run.hpp"
#include "pme/moments.hpp"
#include "pme/rank_select.hpp"

namespace pme {

std::string design_name(const Design& d) {
    if (const auto* v = std::get_if<VecmDesign>(&d)) return v->model == Model::Var1 ? "var1" : "varma";
    if (std::holds_alternative<VarDiffDesign>(d)) return "var_diff";
    return "pb";
}

std::string design_description(const Design& d) {
    std::ostringstream os;
    if (const auto* v = std::get_if<VecmDesign>(&d)) {
        os << to_string(v->model) << " r0=" << v->r0 << " errors=" << to_string(v->errors) << " pr2=" << v->pr2_target
           << " speed=" << to_string(v->speed) << " factors=" << (v->interactive_effects ? "yes" : "no");
    } else if (const auto* v = std::get_if<VarDiffDesign>(&d)) {
        os << "var_diff r0=0 persistence=" << to_string(v->persistence)
           << " factors=" << (v->interactive_effects ? "yes" : "no");
    } else {
        os << "pb r0=1 m=2";
    }
    return os.str();
}

int true_rank(const Design& d) {
    if (const auto* v = std::get_if<VecmDesign>(&d)) return v->r0;
    if (std::holds_alternative<VarDiffDesign>(d)) return 0;
    return 1;
}

int variable_count(const Design& d) {
    return std::holds_alternative<BivariateDesign>(d) ? BivariateDesign::m : VecmDesign::m;
}

SimulatedPanel simulate_panel(const Design& d, std::size_t n, std::size_t t, const SimulationKey& key,
                              std::optional<double> kappa, const KappaSearch& search) {
    if (const auto* v = std::get_if<VecmDesign>(&d)) return dgp_vecm(*v, n, t, key, kappa, search);
    if (const auto* v = std::get_if<VarDiffDesign>(&d)) return dgp_var_diff(*v, n, t, key);
    return dgp_pb(n, t, key);
}

namespace {

struct QOutcome {
    bool selected = false;
    std::vector<int> r_tilde;
    bool estimated = false;
    std::vector<double> theta;
    std::vector<double> se;
};

struct RepOutcome {
    bool generated = false;
    double pr2 = 0.0;
    std::optional<double> kappa;
    std::vector<QOutcome> by_q;
};

RepOutcome run_replication(const ExperimentSpec& spec, const Cell& cell, std::uint64_t cell_index, int rep,
                           std::optional<double> kappa) {
    RepOutcome out;
    out.by_q.resize(spec.qs.size());
    SimulatedPanel sim;
    try {
        sim = simulate_panel(spec.design, cell.n, cell.t,
                             SimulationKey{spec.seed, cell_index, static_cast<std::uint64_t>(rep)}, kappa,
                             spec.kappa_search);
    } catch (const Error&) {
        return out;
    }
    out.generated = true;
    out.pr2 = sim.realized_pr2;
    out.kappa = sim.kappa;

    std::optional<ScaledPanel> scaled;
    try {
        scaled = scale_by_diff_sd(sim.panel);
    } catch (const Error&) {
    }

    for (std::size_t k = 0; k < spec.qs.size(); ++k) {
        auto& res = out.by_q[k];
        try {
            const auto plan = make_plan(sim.panel, SubsampleRule::fixed(spec.qs[k]));
            const auto moments = pooled_covariance(sim.panel, plan);
            if (scaled) {
                const auto corr = correlation_from_covariance(pooled_covariance(scaled->panel, plan).q);
                const auto eig = symmetric_eigen(corr);
                for (double delta : spec.deltas) {
                    res.r_tilde.push_back(
                        select_rank(eig.values, plan.t_ave(TimeAverage::Arithmetic), delta, spec.c).r_tilde);
                }
                res.selected = true;
            }
            if (sim.r0 > 0) {
                const Matrix b = exact_identify(pme_basis(moments, sim.r0), Normalized{});
                const auto cov = estimate_covariance(moments, b);
                const Matrix theta = b.bottomRows(b.rows() - sim.r0);
                res.theta.assign(theta.data(), theta.data() + theta.size());
                res.se.assign(cov.std_errors.data(), cov.std_errors.data() + cov.std_errors.size());
                res.estimated = true;
            }
        } catch (const Error&) {
        }
    }
    return out;
}

std::vector<RepOutcome> run_cell(const ExperimentSpec& spec, const Cell& cell, std::uint64_t cell_index,
                                 std::optional<double> kappa) {
    std::vector<RepOutcome> outcomes(static_cast<std::size_t>(spec.replications));
    unsigned threads = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(spec.replications));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int rep = next++; rep < spec.replications; rep = next++) {
            outcomes[static_cast<std::size_t>(rep)] = run_replication(spec, cell, cell_index, rep, kappa);
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    }
    return outcomes;
}

CellReport summarise(const ExperimentSpec& spec, const Cell& cell, const std::vector<RepOutcome>& outcomes,
                     const Matrix& theta0) {
    const int m = variable_count(spec.design);
    const int r0 = true_rank(spec.design);
    CellReport report;
    report.n = cell.n;
    report.t = cell.t;
    report.replications = spec.replications;

    double pr2_sum = 0.0;
    double kappa_sum = 0.0;
    int kappa_count = 0;
    int generated = 0;
    for (const auto& o : outcomes) {
        if (!o.generated) continue;
        ++generated;
        pr2_sum += o.pr2;
        if (o.kappa) {
            kappa_sum += *o.kappa;
            ++kappa_count;
        }
    }
    report.generation_failures = spec.replications - generated;
    report.mean_pr2 = generated ? pr2_sum / generated : 0.0;
    if (kappa_count) report.mean_kappa = kappa_sum / kappa_count;

    for (std::size_t k = 0; k < spec.qs.size(); ++k) {
        QSummary qs;
        qs.q = spec.qs[k];
        for (std::size_t d = 0; d < spec.deltas.size(); ++d) {
            SelectionSummary sel;
            sel.delta = spec.deltas[d];
            sel.frequency.assign(static_cast<std::size_t>(m) + 1, 0.0);
            int count = 0;
            for (const auto& o : outcomes) {
                if (!o.by_q[k].selected) continue;
                sel.frequency[static_cast<std::size_t>(o.by_q[k].r_tilde[d])] += 1.0;
                ++count;
            }
            if (count) {
                for (auto& f : sel.frequency) f /= count;
            }
            qs.selection.push_back(std::move(sel));
        }

        int failed = 0;
        for (const auto& o : outcomes) {
            if (!o.generated || !o.by_q[k].selected || (r0 > 0 && !o.by_q[k].estimated)) ++failed;
        }
        qs.failures = failed;

        if (r0 > 0) {
            for (Eigen::Index col = 0; col < theta0.cols(); ++col) {
                for (Eigen::Index row = 0; row < theta0.rows(); ++row) {
                    const auto idx = static_cast<std::size_t>(col * theta0.rows() + row);
                    CoefficientSummary c;
                    c.name = "beta" + std::to_string(col + 1) + std::to_string(row + r0 + 1);
                    c.truth = theta0(row, col);
                    double err = 0.0;
                    double err2 = 0.0;
                    double se = 0.0;
                    int reject_null = 0;
                    int reject_alt = 0;
                    const double alt = c.truth + spec.power_shift;
                    for (const auto& o : outcomes) {
                        const auto& res = o.by_q[k];
                        if (!res.estimated) continue;
                        const double e = res.theta[idx] - c.truth;
                        err += e;
                        err2 += e * e;
                        se += res.se[idx];
                        if (std::abs(e / res.se[idx]) > kNormalCritical5) ++reject_null;
                        if (std::abs((res.theta[idx] - alt) / res.se[idx]) > kNormalCritical5) ++reject_alt;
                        ++c.count;
                    }
                    if (c.count) {
                        const double cnt = c.count;
                        c.bias = err / cnt;
                        c.rmse = std::sqrt(err2 / cnt);
                        c.mean_se = se / cnt;
                        c.size = reject_null / cnt;
                        c.power = reject_alt / cnt;
                    }
                    qs.coefficients.push_back(std::move(c));
                }
            }
        }
        report.by_q.push_back(std::move(qs));
    }
    return report;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentSpec& spec) {
    if (spec.replications < 1) throw InputError("replications must be at least 1");
    if (spec.cells.empty()) throw InputError("experiment needs at least one (n, T) cell");
    if (spec.qs.empty() || spec.deltas.empty()) throw InputError("experiment needs at least one q and one delta");
    for (int q : spec.qs)
        if (q < 2) throw InputError("q must be at least 2");

    ExperimentReport report;
    report.design = design_name(spec.design);
    report.description = design_description(spec.design);
    report.generator = kGeneratorName;
    report.seed = spec.seed;
    report.replications = spec.replications;
    report.r0 = true_rank(spec.design);
    report.m = variable_count(spec.design);
    report.power_shift = spec.power_shift;

    // Resolve simulated calibration once, before any worker thread starts.
    std::optional<double> kappa = spec.kappa;
    if (const auto* v = std::get_if<VecmDesign>(&spec.design); v && !kappa && v->model == Model::Varma11) {
        kappa = solve_kappa_simulated(*v, spec.kappa_search);
    }
    Matrix theta0;
    if (const auto* v = std::get_if<VecmDesign>(&spec.design)) theta0 = v->theta0();
    if (std::holds_alternative<BivariateDesign>(spec.design)) theta0 = Matrix::Constant(1, 1, -1.0);

    for (std::size_t c = 0; c < spec.cells.size(); ++c) {
        const auto outcomes = run_cell(spec, spec.cells[c], c, kappa);
        auto cell = summarise(spec, spec.cells[c], outcomes, theta0);
        for (const auto& q : cell.by_q) {
            if (q.failures > spec.max_failure_rate * spec.replications) {
                throw NumericalError("cell n=" + std::to_string(cell.n) + " T=" + std::to_string(cell.t) + " q=" +
                                     std::to_string(q.q) + ": " + std::to_string(q.failures) + " of " +
                                     std::to_string(spec.replications) + " replications failed");
            }
        }
        report.cells.push_back(std::move(cell));
    }
    return report;
}

}  // namespace pme
