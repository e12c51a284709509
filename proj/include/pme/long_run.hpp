#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pme/moments.hpp"
#include "pme/panel.hpp"
#include "pme/rank_select.hpp"

namespace pme {

/// Two-sided 5% critical value of the standard normal.
inline constexpr double kNormalCritical5 = 1.96;

/// The r eigenvectors of Q with the smallest eigenvalues, ascending.
Matrix pme_basis(const Matrix& q, int r);
Matrix pme_basis(const SubsampleMoments& moments, int r);

/// B_ring = B_hat (R B_hat)^-1 A. For the normalised scheme R = (I_r, 0), A = I_r and
/// the top r x r block of the result is set to the identity exactly.
/// Throws IdentificationError when R B_hat has condition number above 1e12.
Matrix exact_identify(const Matrix& b_hat, const IdentificationScheme& scheme);

struct CovarianceComponents {
    Matrix omega_hat;                      ///< mr x mr
    Matrix omega_22;                       ///< (m-r)r x (m-r)r
    Matrix q22;                            ///< lower-right (m-r) x (m-r) block of Q
    std::vector<Matrix> error_corrections; ///< per unit, q_i x r; row l is E_il'
};

struct ThetaCovariance {
    CovarianceComponents components;
    Matrix var_vec_theta;  ///< covariance of column-major vec(Theta)
    Matrix std_errors;     ///< (m-r) x r
    double t_ave = 0.0;
};

/// Plug-in covariance of the normalised long-run coefficients.
/// Unit weights are phi_i^2 / q_i^2 and the scale is 1 / (n T^2) with T the harmonic
/// mean of the T_i (T itself for balanced panels).
/// Throws DegenerateError when Q22 is singular.
ThetaCovariance estimate_covariance(const SubsampleMoments& moments, const Matrix& b_ring);

/// (theta - nulls) / se entrywise. Throws DegenerateError on a non-positive se.
Matrix t_statistics(const Matrix& theta_hat, const Matrix& std_errors, const Matrix& nulls);

enum class EstimationOutcome {
    Estimated,
    NoRelations,        ///< r_tilde == 0
    AllBelowThreshold,  ///< r_tilde == m, not a valid rank
};

const char* to_string(EstimationOutcome outcome);

struct EstimationResult {
    EstimationOutcome outcome = EstimationOutcome::Estimated;
    std::optional<RankSelection> selection;  ///< empty when the rank was fixed
    std::optional<LongRunEstimate> estimate;
    Matrix q;                                ///< pooled covariance of the original data
    Matrix correlation;                      ///< correlation form used for selection
    std::vector<std::string> diagnostics;
};

/// Full pipeline: validate, select the rank on (optionally scaled) data, then estimate
/// and identify the long-run matrix on the original data.
EstimationResult estimate(const PanelDataset& panel, const EstimationConfig& config);

}  // namespace pme
