#include "pme/long_run.hpp"

#include <cmath>

#include <Eigen/SVD>

#include "pme/error.hpp"

namespace pme {

namespace {

constexpr double kMaxCondition = 1e12;

double condition_number(const Matrix& a) {
    Eigen::JacobiSVD<Matrix> svd(a);
    const auto& s = svd.singularValues();
    const double smallest = s(s.size() - 1);
    if (!(smallest > 0.0)) return std::numeric_limits<double>::infinity();
    return s(0) / smallest;
}

}  // namespace

Matrix pme_basis(const Matrix& q, int r) {
    const auto m = static_cast<int>(q.rows());
    if (r < 1 || r > m - 1) {
        throw InputError("rank " + std::to_string(r) + " outside 1.." + std::to_string(m - 1));
    }
    return symmetric_eigen(q).vectors.leftCols(r);
}

Matrix pme_basis(const SubsampleMoments& moments, int r) { return pme_basis(moments.q, r); }

Matrix exact_identify(const Matrix& b_hat, const IdentificationScheme& scheme) {
    const auto m = b_hat.rows();
    const auto r = b_hat.cols();
    if (r < 1 || r >= m) throw InputError("identification needs 1 <= r <= m-1");

    if (std::holds_alternative<Normalized>(scheme)) {
        const Matrix top = b_hat.topRows(r);
        if (condition_number(top) > kMaxCondition) {
            throw IdentificationError("leading r x r block of the eigenvector basis is singular");
        }
        Matrix out = b_hat * top.inverse();
        out.topRows(r).setIdentity();
        return out;
    }

    const auto& g = std::get<General>(scheme);
    if (g.R.rows() != r || g.R.cols() != m || g.A.rows() != r || g.A.cols() != r) {
        throw InputError("identification matrices have the wrong shape");
    }
    const Matrix rb = g.R * b_hat;
    if (condition_number(rb) > kMaxCondition) throw IdentificationError("R B_hat is singular or ill-conditioned");
    if (condition_number(g.A) > kMaxCondition) throw IdentificationError("A is singular");
    return b_hat * rb.partialPivLu().solve(g.A);
}

ThetaCovariance estimate_covariance(const SubsampleMoments& moments, const Matrix& b_ring) {
    const auto m = b_ring.rows();
    const auto r = b_ring.cols();
    if (r < 1 || r >= m) throw InputError("covariance needs 1 <= r <= m-1");
    if (!b_ring.topRows(r).isIdentity(0.0)) throw InputError("covariance requires the normalised form");
    const auto& plan = moments.plan;
    const std::size_t n = moments.deviations.size();
    const auto p = m - r;

    ThetaCovariance out;
    auto& comp = out.components;
    comp.omega_hat = Matrix::Zero(m * r, m * r);
    comp.error_corrections.reserve(n);
    Vector zeta(m * r);
    for (std::size_t i = 0; i < n; ++i) {
        const Matrix& d = moments.deviations[i];
        Matrix e = d * b_ring;  // q_i x r
        // zeta_i = sum_l (E_il kron I_m) d_il = vec(sum_l d_il E_il')
        const Matrix de = d.transpose() * e;  // m x r
        zeta = Eigen::Map<const Vector>(de.data(), m * r);
        const double qi = static_cast<double>(d.rows());
        const double w = plan.phi[i] * plan.phi[i] / (qi * qi);
        comp.omega_hat.noalias() += w * zeta * zeta.transpose();
        comp.error_corrections.push_back(std::move(e));
    }
    comp.omega_hat /= static_cast<double>(n);

    std::vector<Eigen::Index> idx;
    idx.reserve(static_cast<std::size_t>(p * r));
    for (Eigen::Index j = 0; j < r; ++j)
        for (Eigen::Index k = r; k < m; ++k) idx.push_back(j * m + k);
    comp.omega_22 = comp.omega_hat(idx, idx);

    comp.q22 = moments.q.bottomRightCorner(p, p);
    if (condition_number(comp.q22) > kMaxCondition) {
        throw DegenerateError("lower-right block of Q is singular; variance is undefined");
    }
    const Matrix q22_inv = comp.q22.inverse();
    Matrix sandwich = Matrix::Zero(p * r, p * r);
    for (Eigen::Index j = 0; j < r; ++j)
        for (Eigen::Index k = 0; k < r; ++k)
            sandwich.block(j * p, k * p, p, p) = q22_inv * comp.omega_22.block(j * p, k * p, p, p) * q22_inv;

    out.t_ave = plan.t_ave_harm;
    const double scale = 1.0 / (static_cast<double>(n) * out.t_ave * out.t_ave);
    out.var_vec_theta = scale * sandwich;
    out.var_vec_theta = 0.5 * (out.var_vec_theta + out.var_vec_theta.transpose()).eval();
    const Vector se = out.var_vec_theta.diagonal().cwiseMax(0.0).cwiseSqrt();
    out.std_errors = Eigen::Map<const Matrix>(se.data(), p, r);
    return out;
}

Matrix t_statistics(const Matrix& theta_hat, const Matrix& std_errors, const Matrix& nulls) {
    if (theta_hat.rows() != std_errors.rows() || theta_hat.cols() != std_errors.cols() ||
        theta_hat.rows() != nulls.rows() || theta_hat.cols() != nulls.cols()) {
        throw InputError("t_statistics: shape mismatch");
    }
    if (!(std_errors.array() > 0.0).all()) throw DegenerateError("t_statistics: zero standard error");
    return (theta_hat - nulls).cwiseQuotient(std_errors);
}

const char* to_string(EstimationOutcome outcome) {
    switch (outcome) {
        case EstimationOutcome::Estimated: return "estimated";
        case EstimationOutcome::NoRelations: return "no_long_run_relations";
        case EstimationOutcome::AllBelowThreshold: return "all_eigenvalues_below_threshold";
    }
    return "unknown";
}

EstimationResult estimate(const PanelDataset& panel, const EstimationConfig& config) {
    require_valid(panel, config);
    const int m = static_cast<int>(panel.m());
    if (config.rank && (*config.rank < 1 || *config.rank > m - 1)) {
        throw InputError("fixed rank must lie in 1.." + std::to_string(m - 1));
    }
    if (const auto* g = std::get_if<General>(&config.identification); g && config.rank && g->R.rows() != *config.rank) {
        throw InputError("identification restrictions do not match the fixed rank");
    }

    EstimationResult result;
    for (const auto& w : validate(panel, config).warnings) result.diagnostics.push_back(w);

    const SubsamplePlan plan = make_plan(panel, config.q);
    const SubsampleMoments moments = pooled_covariance(panel, plan);
    result.q = moments.q;

    int r = 0;
    if (config.rank) {
        r = *config.rank;
        result.correlation = correlation_from_covariance(moments.q);
    } else {
        Matrix selection_q = moments.q;
        if (config.scale_for_selection) selection_q = pooled_covariance(scale_by_diff_sd(panel).panel, plan).q;
        result.correlation = correlation_from_covariance(selection_q);
        const auto eig = symmetric_eigen(result.correlation);
        result.selection = select_rank(eig.values, plan.t_ave(config.threshold_average), config.delta, config.c);
        r = result.selection->r_tilde;
        if (r == 0) {
            result.outcome = EstimationOutcome::NoRelations;
            result.diagnostics.push_back("no long-run relations detected");
            return result;
        }
        if (r == m) {
            result.outcome = EstimationOutcome::AllBelowThreshold;
            result.diagnostics.push_back("all eigenvalues fall below the threshold; rank m is not admissible");
            return result;
        }
    }

    LongRunEstimate est;
    est.r = r;
    est.n = panel.n();
    est.q_used = plan.q_max();
    est.t_ave = plan.t_ave_harm;
    est.b_hat = exact_identify(pme_basis(moments, r), config.identification);

    if (std::holds_alternative<Normalized>(config.identification)) {
        const Matrix theta = est.b_hat.bottomRows(m - r);
        const auto cov = estimate_covariance(moments, est.b_hat);
        est.theta_hat = theta;
        est.var_vec_theta = cov.var_vec_theta;
        est.std_errors = cov.std_errors;
        Matrix nulls = Matrix::Zero(m - r, r);
        if (config.null_values) {
            if (config.null_values->rows() != m - r || config.null_values->cols() != r) {
                throw InputError("null values must be (m-r) x r");
            }
            nulls = *config.null_values;
        }
        est.null_values = nulls;
        if ((cov.std_errors.array() > 0.0).all()) {
            est.t_stats = t_statistics(theta, cov.std_errors, nulls);
        } else {
            result.diagnostics.push_back("zero standard error; t statistics omitted");
        }
    } else {
        result.diagnostics.push_back("standard errors are only available for the normalised scheme");
    }
    result.estimate = std::move(est);
    return result;
}

}  // namespace pme
