#include "pme/panel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pme/error.hpp"

namespace pme {

UnitSeries::UnitSeries(std::string id, std::vector<std::int64_t> t, Matrix v)
    : unit_id(std::move(id)), times(std::move(t)), values(std::move(v)) {
    if (times.size() != static_cast<std::size_t>(values.rows())) {
        throw InputError("unit " + unit_id + ": time index length does not match rows");
    }
}

UnitSeries::UnitSeries(std::string id, std::int64_t start_time, Matrix v)
    : unit_id(std::move(id)), values(std::move(v)) {
    times.resize(static_cast<std::size_t>(values.rows()));
    for (std::size_t t = 0; t < times.size(); ++t) times[t] = start_time + static_cast<std::int64_t>(t);
}

PanelDataset PanelDataset::with_default_names(std::vector<UnitSeries> units) {
    PanelDataset p;
    const auto m = units.empty() ? 0 : units.front().values.cols();
    for (Eigen::Index k = 0; k < m; ++k) p.variable_names.push_back("w" + std::to_string(k + 1));
    p.units = std::move(units);
    return p;
}

int SubsampleRule::for_length(std::size_t t) const {
    if (q_) return *q_;
    // cbrt is exact on perfect cubes; the epsilon guards values such as 64^(1/3).
    const double root = std::cbrt(static_cast<double>(t));
    return static_cast<int>(std::floor(std::max(2.0, root + 1e-12)));
}

const char* to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::Gap: return "gap";
        case ViolationKind::TooShort: return "too_short";
        case ViolationKind::NonFinite: return "non_finite";
        case ViolationKind::Shape: return "shape";
        case ViolationKind::Config: return "config";
    }
    return "unknown";
}

ValidationReport validate(const PanelDataset& panel, const EstimationConfig& config) {
    ValidationReport report;
    auto add = [&](ViolationKind kind, std::optional<std::size_t> unit, std::string msg) {
        report.violations.push_back({kind, unit, std::move(msg)});
    };

    if (auto q = config.q.fixed_value(); q && *q < 2) add(ViolationKind::Config, {}, "q must be at least 2");
    if (!(config.delta > 0.0)) add(ViolationKind::Config, {}, "delta must be positive");
    if (!(config.c > 0.0)) add(ViolationKind::Config, {}, "c must be positive");

    const std::size_t m = panel.m();
    if (m < 1) add(ViolationKind::Shape, {}, "panel has no variables");
    if (panel.n() < 1) add(ViolationKind::Shape, {}, "panel has no units");

    std::size_t t_max = 0;
    for (const auto& u : panel.units) t_max = std::max(t_max, u.length());

    for (std::size_t i = 0; i < panel.n(); ++i) {
        const auto& u = panel.units[i];
        const std::string who = "unit " + u.unit_id;
        if (static_cast<std::size_t>(u.values.cols()) != m) {
            add(ViolationKind::Shape, i, who + " has " + std::to_string(u.values.cols()) + " columns, expected " +
                                             std::to_string(m));
            continue;
        }
        if (u.times.size() != u.length()) {
            add(ViolationKind::Shape, i, who + ": time index length does not match rows");
            continue;
        }
        for (std::size_t t = 1; t < u.times.size(); ++t) {
            if (u.times[t] != u.times[t - 1] + 1) {
                std::ostringstream os;
                os << who << " has a gap between t=" << u.times[t - 1] << " and t=" << u.times[t];
                add(ViolationKind::Gap, i, os.str());
                break;
            }
        }
        const int q = config.q.for_length(u.length());
        if (u.length() < static_cast<std::size_t>(2 * q)) {
            add(ViolationKind::TooShort, i,
                who + " has T_i=" + std::to_string(u.length()) + " < 2q=" + std::to_string(2 * q));
        }
        if (!u.values.allFinite()) add(ViolationKind::NonFinite, i, who + " contains non-finite values");

        if (config.relative_length_warning > 0.0 && t_max > 0 &&
            static_cast<double>(u.length()) < config.relative_length_warning * static_cast<double>(t_max)) {
            report.warnings.push_back(who + " is short relative to the longest unit (T_i=" +
                                      std::to_string(u.length()) + ", max=" + std::to_string(t_max) + ")");
        }
    }
    return report;
}

void require_valid(const PanelDataset& panel, const EstimationConfig& config) {
    const auto report = validate(panel, config);
    if (report.ok()) return;
    const auto& v = report.violations.front();
    if (v.kind == ViolationKind::TooShort) throw LengthError(v.message);
    throw InputError(v.message + (report.violations.size() > 1
                                      ? " (and " + std::to_string(report.violations.size() - 1) + " more)"
                                      : std::string()));
}

}  // namespace pme
