#include "pme/moments.hpp"

#include <algorithm>
#include <cmath>

#include "pme/error.hpp"

namespace pme {

std::vector<Block> partition(std::size_t length, int q) {
    if (q < 2) throw InputError("number of sub-samples must be at least 2");
    const auto uq = static_cast<std::size_t>(q);
    if (length < 2 * uq) {
        throw LengthError("T_i=" + std::to_string(length) + " is shorter than 2q=" + std::to_string(2 * uq));
    }
    const std::size_t base = length / uq;
    const std::size_t extra = length % uq;
    std::vector<Block> blocks;
    blocks.reserve(uq);
    std::size_t offset = 0;
    for (std::size_t l = 0; l < uq; ++l) {
        const std::size_t count = base + (l < extra ? 1 : 0);
        blocks.push_back({offset, count});
        offset += count;
    }
    return blocks;
}

int SubsamplePlan::q_max() const {
    int q = 0;
    for (const auto& b : blocks) q = std::max(q, static_cast<int>(b.size()));
    return q;
}

SubsamplePlan make_plan(const PanelDataset& panel, const SubsampleRule& rule) {
    if (panel.n() == 0) throw InputError("panel has no units");
    SubsamplePlan plan;
    plan.blocks.reserve(panel.n());
    plan.lengths.reserve(panel.n());
    double sum_t = 0.0;
    double sum_inv_t = 0.0;
    for (const auto& u : panel.units) {
        const std::size_t t = u.length();
        plan.blocks.push_back(partition(t, rule.for_length(t)));
        plan.lengths.push_back(t);
        sum_t += static_cast<double>(t);
        sum_inv_t += 1.0 / static_cast<double>(t);
    }
    const auto n = static_cast<double>(panel.n());
    plan.balanced = std::all_of(plan.lengths.begin(), plan.lengths.end(),
                                [&](std::size_t t) { return t == plan.lengths.front(); });
    if (plan.balanced) {
        plan.t_ave_arith = plan.t_ave_harm = static_cast<double>(plan.lengths.front());
    } else {
        plan.t_ave_arith = sum_t / n;
        plan.t_ave_harm = n / sum_inv_t;
    }
    plan.phi.reserve(panel.n());
    for (std::size_t t : plan.lengths) {
        plan.phi.push_back(plan.balanced ? 1.0 : plan.t_ave_harm / static_cast<double>(t));
    }
    return plan;
}

Matrix subsample_deviations(const UnitSeries& series, std::span<const Block> blocks) {
    const auto m = series.values.cols();
    const auto q = static_cast<Eigen::Index>(blocks.size());
    Matrix means(q, m);
    Eigen::RowVectorXd grand = Eigen::RowVectorXd::Zero(m);
    std::size_t total = 0;
    for (Eigen::Index l = 0; l < q; ++l) {
        const auto& b = blocks[static_cast<std::size_t>(l)];
        if (b.count == 0 || b.offset + b.count > series.length()) {
            throw InputError("block outside unit " + series.unit_id);
        }
        const auto rows = series.values.middleRows(static_cast<Eigen::Index>(b.offset),
                                                   static_cast<Eigen::Index>(b.count));
        means.row(l) = rows.colwise().mean();
        grand += static_cast<double>(b.count) * means.row(l);
        total += b.count;
    }
    grand /= static_cast<double>(total);
    return means.rowwise() - grand;
}

SubsampleMoments pooled_covariance(const PanelDataset& panel, const SubsamplePlan& plan) {
    if (plan.n() != panel.n()) throw InputError("plan does not match panel");
    const auto m = static_cast<Eigen::Index>(panel.m());
    SubsampleMoments out;
    out.deviations.reserve(panel.n());
    out.unit_q.reserve(panel.n());
    out.q = Matrix::Zero(m, m);
    for (std::size_t i = 0; i < panel.n(); ++i) {
        const auto& u = panel.units[i];
        if (u.values.cols() != m) throw InputError("unit " + u.unit_id + " has the wrong number of variables");
        Matrix d = subsample_deviations(u, plan.blocks[i]);
        const double scale = 1.0 / (static_cast<double>(plan.lengths[i]) * static_cast<double>(d.rows()));
        Matrix qi = scale * (d.transpose() * d);
        out.q += qi;
        out.deviations.push_back(std::move(d));
        out.unit_q.push_back(std::move(qi));
    }
    out.q /= static_cast<double>(panel.n());
    // Symmetrise away rounding so downstream symmetric solvers see an exact mirror.
    out.q = 0.5 * (out.q + out.q.transpose()).eval();
    out.plan = plan;
    return out;
}

ScaledPanel scale_by_diff_sd(const PanelDataset& panel) {
    const auto m = static_cast<Eigen::Index>(panel.m());
    Vector sum = Vector::Zero(m);
    Vector sum_sq = Vector::Zero(m);
    double count = 0.0;
    for (const auto& u : panel.units) {
        if (u.length() < 3) throw LengthError("unit " + u.unit_id + " needs at least 3 observations for scaling");
        const auto t = static_cast<Eigen::Index>(u.length());
        const Matrix diff = u.values.bottomRows(t - 1) - u.values.topRows(t - 1);
        sum += diff.colwise().sum().transpose();
        count += static_cast<double>(t - 1);
    }
    const Vector mean = sum / count;
    for (const auto& u : panel.units) {
        const auto t = static_cast<Eigen::Index>(u.length());
        const Matrix diff = u.values.bottomRows(t - 1) - u.values.topRows(t - 1);
        sum_sq += (diff.rowwise() - mean.transpose()).colwise().squaredNorm().transpose();
    }
    ScaledPanel out;
    out.factors = (sum_sq / (count - 1.0)).cwiseSqrt();
    for (Eigen::Index k = 0; k < m; ++k) {
        if (!(out.factors(k) > 0.0) || !std::isfinite(out.factors(k))) {
            throw DegenerateError("variable " + panel.variable_names[static_cast<std::size_t>(k)] +
                                  " has zero first-difference standard deviation");
        }
    }
    out.panel.variable_names = panel.variable_names;
    out.panel.units.reserve(panel.n());
    const Eigen::RowVectorXd inv = out.factors.cwiseInverse().transpose();
    for (const auto& u : panel.units) {
        Matrix scaled = u.values.array().rowwise() * inv.array();
        out.panel.units.emplace_back(u.unit_id, u.times, std::move(scaled));
    }
    return out;
}

Matrix correlation_from_covariance(const Matrix& q) {
    if (q.rows() != q.cols()) throw InputError("covariance matrix must be square");
    const Vector d = q.diagonal();
    for (Eigen::Index k = 0; k < d.size(); ++k) {
        if (!(d(k) > 0.0)) throw DegenerateError("non-positive diagonal entry in covariance matrix");
    }
    const Vector s = d.cwiseSqrt().cwiseInverse();
    Matrix r = s.asDiagonal() * q * s.asDiagonal();
    r = 0.5 * (r + r.transpose()).eval();
    r.diagonal().setOnes();
    return r;
}

}  // namespace pme
