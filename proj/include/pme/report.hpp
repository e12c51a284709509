#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pme/experiment.hpp"
#include "pme/filters.hpp"
#include "pme/long_run.hpp"

namespace pme {

inline constexpr const char* kReportVersion = "pme-report/1";

struct ConfigEcho {
    std::string command;
    std::string q = "2";  ///< fixed value or "auto"
    double c = 1.0;
    std::vector<double> deltas;
    std::optional<int> rank;
    std::string identification = "normalized";
    std::vector<std::string> variables;
    bool scale_for_selection = true;
    std::string threshold_average = "arithmetic";
    std::optional<std::string> input;
    std::optional<std::uint64_t> seed;

    friend bool operator==(const ConfigEcho&, const ConfigEcho&) = default;
};

struct ThresholdEntry {
    double delta = 0.0;
    double threshold = 0.0;
    int r_tilde = 0;

    friend bool operator==(const ThresholdEntry&, const ThresholdEntry&) = default;
};

struct RankSelectionReport {
    std::vector<double> eigenvalues;  ///< ascending, correlation form
    double t_ave = 0.0;
    std::vector<ThresholdEntry> by_delta;

    friend bool operator==(const RankSelectionReport&, const RankSelectionReport&) = default;
};

struct EstimateReport {
    std::string outcome;
    int r = 0;
    Matrix b_hat;
    std::optional<Matrix> theta_hat;
    std::optional<Matrix> std_errors;
    std::optional<Matrix> t_stats;
    std::optional<Matrix> null_values;
    std::optional<Matrix> var_vec_theta;
    int q_used = 0;
    double t_ave = 0.0;
    std::vector<std::string> diagnostics;

    /// Exact comparison, matrices included.
    friend bool operator==(const EstimateReport& a, const EstimateReport& b);
};

struct SampleReport {
    std::size_t n = 0;
    std::size_t m = 0;
    double t_ave = 0.0;           ///< arithmetic
    double t_ave_harmonic = 0.0;
    std::size_t t_min = 0;
    std::size_t t_max = 0;
    std::size_t t_sum = 0;

    friend bool operator==(const SampleReport&, const SampleReport&) = default;
};

struct RunReport {
    ConfigEcho config;
    std::optional<RankSelectionReport> rank_selection;
    std::optional<EstimateReport> estimate;
    std::optional<SampleReport> sample;
    std::optional<std::vector<Exclusion>> exclusions;
    std::optional<ExperimentReport> experiment;

    friend bool operator==(const RunReport&, const RunReport&) = default;
};

SampleReport describe_sample(const PanelDataset& panel);
RankSelectionReport describe_selection(const Vector& eigenvalues, double t_ave, const std::vector<double>& deltas,
                                       double c);
EstimateReport describe_estimate(const EstimationResult& result);

/// Pretty-printed JSON; doubles use the shortest text that reads back exactly.
std::string to_json(const RunReport& report);
/// Throws ParseError on malformed input or an unknown version.
RunReport run_report_from_json(const std::string& text);

}  // namespace pme
