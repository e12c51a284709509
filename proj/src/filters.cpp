#include "pme/filters.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "pme/error.hpp"

namespace pme {

namespace {

std::size_t variable_index(const RawPanel& raw, const std::string& name) {
    const auto it = std::find(raw.variables.begin(), raw.variables.end(), name);
    if (it == raw.variables.end()) throw InputError("ratio variable '" + name + "' not in panel");
    return static_cast<std::size_t>(it - raw.variables.begin());
}

// [begin, end) of the longest consecutive run; earliest wins ties.
std::pair<std::size_t, std::size_t> longest_run(const std::vector<std::int64_t>& times) {
    std::size_t best_begin = 0;
    std::size_t best_len = times.empty() ? 0 : 1;
    std::size_t begin = 0;
    for (std::size_t t = 1; t <= times.size(); ++t) {
        if (t == times.size() || times[t] != times[t - 1] + 1) {
            if (t - begin > best_len) {
                best_len = t - begin;
                best_begin = begin;
            }
            begin = t;
        }
    }
    return {best_begin, best_begin + best_len};
}

bool has_gap(const std::vector<std::int64_t>& times) {
    for (std::size_t t = 1; t < times.size(); ++t)
        if (times[t] != times[t - 1] + 1) return true;
    return false;
}

}  // namespace

double nearest_rank_percentile(const std::vector<double>& sorted, double pct) {
    if (sorted.empty()) throw InputError("percentile of an empty set");
    if (pct < 0.0 || pct > 100.0) throw InputError("percentile must lie in [0, 100]");
    const auto n = static_cast<double>(sorted.size());
    const auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * n - 1e-9));
    return sorted[rank == 0 ? 0 : std::min(rank, sorted.size()) - 1];
}

FilterResult apply_filters(const RawPanel& raw, const FilterSpec& spec) {
    for (const auto& tr : spec.trim_ratios) {
        if (!(tr.lower >= 0.0 && tr.lower < tr.upper && tr.upper <= 100.0)) {
            throw InputError("ratio trimming needs 0 <= lower < upper <= 100");
        }
    }
    FilterResult result;
    std::vector<RawUnit> kept;
    kept.reserve(raw.units.size());

    // Filter 1: gaps and minimum length.
    for (const auto& u : raw.units) {
        RawUnit unit = u;
        if (has_gap(unit.times)) {
            if (spec.gap_policy == GapPolicy::Drop) {
                result.exclusions.push_back({u.unit_id, 1, "gap in time index"});
                continue;
            }
            const auto [b, e] = longest_run(unit.times);
            unit.times = std::vector<std::int64_t>(u.times.begin() + static_cast<std::ptrdiff_t>(b),
                                                   u.times.begin() + static_cast<std::ptrdiff_t>(e));
            unit.values = u.values.middleRows(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b));
        }
        if (unit.times.size() < spec.min_t) {
            result.exclusions.push_back({u.unit_id, 1,
                                         "T_i=" + std::to_string(unit.times.size()) + " below minimum " +
                                             std::to_string(spec.min_t)});
            continue;
        }
        kept.push_back(std::move(unit));
    }

    // Filter 2: positivity.
    if (spec.require_positive) {
        std::vector<RawUnit> next;
        next.reserve(kept.size());
        for (auto& u : kept) {
            if ((u.values.array() > 0.0).all()) {
                next.push_back(std::move(u));
            } else {
                result.exclusions.push_back({u.unit_id, 2, "non-positive value"});
            }
        }
        kept = std::move(next);
    }

    // Filter 3: percentile trimming of unit-average ratios, on untransformed values.
    for (const auto& tr : spec.trim_ratios) {
        if (kept.empty()) break;
        const auto num = variable_index(raw, tr.numerator);
        const auto den = variable_index(raw, tr.denominator);
        std::vector<std::optional<double>> ratio(kept.size());
        std::vector<double> finite;
        for (std::size_t i = 0; i < kept.size(); ++i) {
            const auto& v = kept[i].values;
            const double r = (v.col(static_cast<Eigen::Index>(num)).array() /
                              v.col(static_cast<Eigen::Index>(den)).array())
                                 .mean();
            if (std::isfinite(r)) {
                ratio[i] = r;
                finite.push_back(r);
            }
        }
        std::sort(finite.begin(), finite.end());
        const std::string label = tr.numerator + "/" + tr.denominator;
        std::vector<RawUnit> next;
        next.reserve(kept.size());
        double lo = 0.0;
        double hi = 0.0;
        if (!finite.empty()) {
            // Lower bound mirrors the upper one, so each tail loses the same share of units.
            std::vector<double> mirrored(finite.rbegin(), finite.rend());
            for (double& v : mirrored) v = -v;
            lo = -nearest_rank_percentile(mirrored, 100.0 - tr.lower);
            hi = nearest_rank_percentile(finite, tr.upper);
        }
        for (std::size_t i = 0; i < kept.size(); ++i) {
            if (!ratio[i]) {
                result.exclusions.push_back({kept[i].unit_id, 3, "undefined ratio " + label});
            } else if (*ratio[i] < lo || *ratio[i] > hi) {
                result.exclusions.push_back({kept[i].unit_id, 3,
                                             "ratio " + label + "=" + format_double(*ratio[i]) + " outside [" +
                                                 format_double(lo) + ", " + format_double(hi) + "]"});
            } else {
                next.push_back(std::move(kept[i]));
            }
        }
        kept = std::move(next);
    }

    if (kept.empty()) throw InputError("no unit survives the filters");
    if (spec.log_transform) {
        for (auto& u : kept) {
            if (!(u.values.array() > 0.0).all()) {
                throw InputError("log transform of non-positive values in unit " + u.unit_id);
            }
            u.values = u.values.array().log().matrix();
        }
    }
    RawPanel out;
    out.variables = raw.variables;
    out.units = std::move(kept);
    result.panel = to_panel(out);
    return result;
}

}  // namespace pme
