#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace pme {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One cross-section unit: T_i consecutive observations of m variables.
/// Row t of `values` is the observation at `times[t]`.
struct UnitSeries {
    std::string unit_id;
    std::vector<std::int64_t> times;
    Matrix values;

    UnitSeries() = default;
    UnitSeries(std::string id, std::vector<std::int64_t> t, Matrix v);
    /// Consecutive times start_time, start_time + 1, ...
    UnitSeries(std::string id, std::int64_t start_time, Matrix v);

    std::int64_t start_time() const { return times.empty() ? 0 : times.front(); }
    std::size_t length() const { return static_cast<std::size_t>(values.rows()); }
};

struct PanelDataset {
    std::vector<std::string> variable_names;
    std::vector<UnitSeries> units;

    std::size_t n() const { return units.size(); }
    std::size_t m() const { return variable_names.size(); }

    /// Panel with generic names w1..wm.
    static PanelDataset with_default_names(std::vector<UnitSeries> units);
};

/// Number of sub-samples per unit: a fixed q >= 2, or floor(max(2, T_i^(1/3))).
class SubsampleRule {
public:
    static SubsampleRule fixed(int q) { return SubsampleRule(q); }
    static SubsampleRule automatic() { return SubsampleRule(std::nullopt); }

    bool is_automatic() const { return !q_.has_value(); }
    std::optional<int> fixed_value() const { return q_; }
    int for_length(std::size_t t) const;

private:
    explicit SubsampleRule(std::optional<int> q) : q_(q) {}
    std::optional<int> q_;
};

/// Normalisation B = (I_r, Theta')'.
struct Normalized {};

/// General exact identification R * B = A with R: r x m and A: r x r.
struct General {
    Matrix R;
    Matrix A;
};

using IdentificationScheme = std::variant<Normalized, General>;

/// Which panel-average time dimension enters the selection threshold.
enum class TimeAverage { Arithmetic, Harmonic };

struct EstimationConfig {
    SubsampleRule q = SubsampleRule::fixed(2);
    double delta = 0.25;
    double c = 1.0;
    std::optional<int> rank;
    IdentificationScheme identification = Normalized{};
    std::optional<Matrix> null_values;
    bool scale_for_selection = true;
    TimeAverage threshold_average = TimeAverage::Arithmetic;
    /// Units shorter than this fraction of max T_i are reported as warnings (0 disables).
    double relative_length_warning = 0.0;
};

/// Result for a normalised (or general) exactly identified long-run matrix.
struct LongRunEstimate {
    int r = 0;
    Matrix b_hat;  ///< m x r identified matrix
    /// Lower (m - r) x r block; present for the normalised scheme only.
    std::optional<Matrix> theta_hat;
    std::optional<Matrix> var_vec_theta;
    std::optional<Matrix> std_errors;
    std::optional<Matrix> t_stats;
    std::optional<Matrix> null_values;
    int q_used = 0;  ///< largest q_i across units
    std::size_t n = 0;
    double t_ave = 0.0;  ///< time average used in the variance scaling
};

enum class ViolationKind { Gap, TooShort, NonFinite, Shape, Config };

struct Violation {
    ViolationKind kind;
    std::optional<std::size_t> unit;  ///< empty for panel- or config-level problems
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    std::vector<std::string> warnings;

    bool ok() const { return violations.empty(); }
};

/// Reports every reason the panel cannot be estimated with `config`. Never throws.
ValidationReport validate(const PanelDataset& panel, const EstimationConfig& config);

/// Throws InputError carrying the first violation when `validate` is not clean.
void require_valid(const PanelDataset& panel, const EstimationConfig& config);

const char* to_string(ViolationKind kind);

}  // namespace pme
