#pragma once

#include "pme/panel.hpp"

namespace pme {

/// Ascending eigenvalues with paired orthonormal eigenvectors (column j <-> values(j)).
/// In every column the entry of largest magnitude is positive (first such row on ties).
struct EigenDecomposition {
    Vector values;
    Matrix vectors;
    int sweeps = 0;
};

/// Cyclic Jacobi eigensolver for small dense symmetric matrices (m <= 64).
/// Iterates until the off-diagonal Frobenius norm is at most 1e-13 * ||S||_F.
/// Throws InputError on asymmetric input and NumericalError after 100 sweeps.
EigenDecomposition symmetric_eigen(const Matrix& s);

struct RankSelection {
    Vector eigenvalues;  ///< ascending eigenvalues of the correlation matrix
    double threshold = 0.0;
    int r_tilde = 0;
    double delta = 0.0;
    double c = 0.0;
    double t_ave = 0.0;
};

/// Counts eigenvalues strictly below c * t_ave^-delta.
RankSelection select_rank(const Vector& eigenvalues, double t_ave, double delta, double c = 1.0);

}  // namespace pme
