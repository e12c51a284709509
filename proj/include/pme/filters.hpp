#pragma once

#include <string>
#include <vector>

#include "pme/csv.hpp"
#include "pme/panel.hpp"

namespace pme {

/// How the length filter treats a unit whose time index has gaps.
enum class GapPolicy {
    Drop,        ///< remove the unit
    LongestRun,  ///< keep its longest consecutive run (earliest on ties)
};

/// Trims units whose time-averaged ratio numerator/denominator falls outside the
/// [lower, upper] percentiles of the surviving units. The upper bound is the
/// nearest-rank percentile; the lower bound is its mirror image taken from the top,
/// so trimming is symmetric. Units equal to a bound are kept.
struct RatioTrim {
    std::string numerator;
    std::string denominator;
    double lower = 1.0;
    double upper = 99.0;
};

struct FilterSpec {
    std::size_t min_t = 20;
    bool require_positive = false;
    bool log_transform = false;
    std::vector<RatioTrim> trim_ratios;
    GapPolicy gap_policy = GapPolicy::Drop;
};

struct Exclusion {
    std::string unit_id;
    int filter = 0;  ///< 1 gaps/length, 2 positivity, 3 ratio trimming
    std::string reason;

    friend bool operator==(const Exclusion&, const Exclusion&) = default;
};

struct FilterResult {
    PanelDataset panel;
    std::vector<Exclusion> exclusions;
};

/// Nearest-rank percentile of already sorted values: element ceil(p/100 * N), 1-based;
/// p = 0 gives the minimum.
double nearest_rank_percentile(const std::vector<double>& sorted, double pct);

/// Applies, in order: gaps and minimum length, positivity, the optional log transform,
/// then ratio trimming on the untransformed values. Throws InputError when no unit survives.
FilterResult apply_filters(const RawPanel& raw, const FilterSpec& spec);

}  // namespace pme
