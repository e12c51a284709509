#pragma once

#include <span>
#include <vector>

#include "pme/panel.hpp"

namespace pme {

/// Rows [offset, offset + count) of a unit's series.
struct Block {
    std::size_t offset = 0;
    std::size_t count = 0;

    friend bool operator==(const Block&, const Block&) = default;
};

/// Splits T_i observations into q contiguous blocks. When q does not divide T_i
/// the first (T_i mod q) blocks carry one extra observation.
/// Throws LengthError when T_i < 2q.
std::vector<Block> partition(std::size_t length, int q);

/// Per-unit block layout and weights.
///
/// phi_i = T_harm / T_i where T_harm is the harmonic mean of the T_i; for a
/// balanced panel phi_i == 1 and both averages equal T exactly.
struct SubsamplePlan {
    std::vector<std::vector<Block>> blocks;
    std::vector<std::size_t> lengths;
    std::vector<double> phi;
    double t_ave_arith = 0.0;
    double t_ave_harm = 0.0;
    bool balanced = true;

    std::size_t n() const { return blocks.size(); }
    int q_of(std::size_t i) const { return static_cast<int>(blocks[i].size()); }
    int q_max() const;
    double t_ave(TimeAverage which) const {
        return which == TimeAverage::Arithmetic ? t_ave_arith : t_ave_harm;
    }
};

SubsamplePlan make_plan(const PanelDataset& panel, const SubsampleRule& rule);

/// q_i x m matrix whose row l is the block-l mean minus the unit's
/// block-length-weighted grand mean.
Matrix subsample_deviations(const UnitSeries& series, std::span<const Block> blocks);

struct SubsampleMoments {
    std::vector<Matrix> deviations;  ///< per unit, q_i x m
    std::vector<Matrix> unit_q;      ///< per unit T_i^-1 q_i^-1 sum_l d d'
    Matrix q;                        ///< pooled m x m
    SubsamplePlan plan;
};

/// Q = n^-1 sum_i T_i^-1 q_i^-1 sum_l d_il d_il'. Units are accumulated in index order.
SubsampleMoments pooled_covariance(const PanelDataset& panel, const SubsamplePlan& plan);

struct ScaledPanel {
    PanelDataset panel;
    Vector factors;  ///< pooled standard deviation of first differences, per variable
};

/// Divides each variable by the standard deviation of its first differences,
/// pooled over all units. Throws DegenerateError on a zero standard deviation.
ScaledPanel scale_by_diff_sd(const PanelDataset& panel);

/// R = D^-1/2 Q D^-1/2 with D = diag(Q).
Matrix correlation_from_covariance(const Matrix& q);

}  // namespace pme
