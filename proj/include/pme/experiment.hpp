#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pme/dgp.hpp"

namespace pme {

using Design = std::variant<VecmDesign, VarDiffDesign, BivariateDesign>;

/// Short tag such as "var1", "varma", "var_diff" or "pb".
std::string design_name(const Design& d);
/// Human-readable summary of every design parameter.
std::string design_description(const Design& d);
int true_rank(const Design& d);
int variable_count(const Design& d);

/// One simulated panel for replication `key`; kappa is resolved as in dgp_vecm.
SimulatedPanel simulate_panel(const Design& d, std::size_t n, std::size_t t, const SimulationKey& key,
                              std::optional<double> kappa = std::nullopt, const KappaSearch& search = {});

struct Cell {
    std::size_t n = 0;
    std::size_t t = 0;
};

struct ExperimentSpec {
    Design design = VecmDesign{};
    std::vector<Cell> cells;
    int replications = 100;
    std::vector<int> qs{2};           ///< each q is evaluated on the same simulated panels
    std::vector<double> deltas{0.25};
    double c = 1.0;
    std::uint64_t seed = 1;
    double power_shift = 0.03;        ///< alternative = truth + power_shift
    unsigned threads = 0;             ///< 0 selects the hardware concurrency
    std::optional<double> kappa;      ///< overrides calibration of the loadings
    KappaSearch kappa_search;
    double max_failure_rate = 0.01;   ///< above this share of failed replications the run fails
};

struct CoefficientSummary {
    std::string name;   ///< beta{relation}{variable}
    double truth = 0.0;
    double bias = 0.0;
    double rmse = 0.0;
    double size = 0.0;  ///< rejection rate of the true value at 5%
    double power = 0.0; ///< rejection rate of truth + power_shift at 5%
    double mean_se = 0.0;
    int count = 0;      ///< replications entering the averages

    friend bool operator==(const CoefficientSummary&, const CoefficientSummary&) = default;
};

struct SelectionSummary {
    double delta = 0.0;
    std::vector<double> frequency;  ///< index r = 0..m

    friend bool operator==(const SelectionSummary&, const SelectionSummary&) = default;
};

struct QSummary {
    int q = 2;
    std::vector<SelectionSummary> selection;
    std::vector<CoefficientSummary> coefficients;
    int failures = 0;

    friend bool operator==(const QSummary&, const QSummary&) = default;
};

struct CellReport {
    std::size_t n = 0;
    std::size_t t = 0;
    int replications = 0;
    int generation_failures = 0;
    double mean_pr2 = 0.0;
    std::optional<double> mean_kappa;
    std::vector<QSummary> by_q;

    friend bool operator==(const CellReport&, const CellReport&) = default;
};

struct ExperimentReport {
    std::string design;
    std::string description;
    std::string generator;
    std::uint64_t seed = 0;
    int replications = 0;
    int r0 = 0;
    int m = 0;
    double power_shift = 0.0;
    std::vector<CellReport> cells;

    friend bool operator==(const ExperimentReport&, const ExperimentReport&) = default;
};

/// Runs every cell. Replications may execute on several threads; each draws from
/// streams keyed by (seed, cell, replication) and results are reduced in
/// replication order, so the report does not depend on the thread count.
/// Throws Error when more than max_failure_rate of a cell's replications fail.
ExperimentReport run_experiment(const ExperimentSpec& spec);

}  // namespace pme
