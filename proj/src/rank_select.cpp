#include "pme/rank_select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pme/error.hpp"

namespace pme {

namespace {

constexpr int kMaxSweeps = 100;
constexpr double kOffDiagonalTolerance = 1e-13;
constexpr double kSymmetryTolerance = 1e-10;

double off_diagonal_norm(const Matrix& a) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            if (i != j) sum += a(i, j) * a(i, j);
    return std::sqrt(sum);
}

void rotate(Matrix& a, Matrix& v, Eigen::Index p, Eigen::Index q) {
    const double apq = a(p, q);
    if (apq == 0.0) return;
    const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
    const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
    const double c = 1.0 / std::sqrt(t * t + 1.0);
    const double s = t * c;

    a(p, p) -= t * apq;
    a(q, q) += t * apq;
    a(p, q) = a(q, p) = 0.0;
    for (Eigen::Index k = 0; k < a.rows(); ++k) {
        if (k == p || k == q) continue;
        const double akp = a(k, p);
        const double akq = a(k, q);
        a(k, p) = a(p, k) = c * akp - s * akq;
        a(k, q) = a(q, k) = s * akp + c * akq;
    }
    for (Eigen::Index k = 0; k < v.rows(); ++k) {
        const double vkp = v(k, p);
        const double vkq = v(k, q);
        v(k, p) = c * vkp - s * vkq;
        v(k, q) = s * vkp + c * vkq;
    }
}

}  // namespace

EigenDecomposition symmetric_eigen(const Matrix& s) {
    if (s.rows() != s.cols()) throw InputError("symmetric_eigen: matrix must be square");
    const Eigen::Index m = s.rows();
    if (m == 0) throw InputError("symmetric_eigen: empty matrix");
    if (m > 64) throw InputError("symmetric_eigen: dimension above 64");
    if (!s.allFinite()) throw InputError("symmetric_eigen: non-finite entries");
    const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * scale) {
        throw InputError("symmetric_eigen: matrix is not symmetric");
    }

    Matrix a = 0.5 * (s + s.transpose());
    Matrix v = Matrix::Identity(m, m);
    const double norm = a.norm();
    int sweeps = 0;
    while (off_diagonal_norm(a) > kOffDiagonalTolerance * norm) {
        if (sweeps == kMaxSweeps) throw NumericalError("symmetric_eigen: Jacobi sweeps did not converge");
        for (Eigen::Index p = 0; p + 1 < m; ++p)
            for (Eigen::Index q = p + 1; q < m; ++q) rotate(a, v, p, q);
        ++sweeps;
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) < a(j, j); });

    EigenDecomposition out;
    out.sweeps = sweeps;
    out.values.resize(m);
    out.vectors.resize(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto src = order[static_cast<std::size_t>(j)];
        out.values(j) = a(src, src);
        Vector col = v.col(src);
        Eigen::Index pivot = 0;
        for (Eigen::Index k = 1; k < m; ++k)
            if (std::abs(col(k)) > std::abs(col(pivot))) pivot = k;
        if (col(pivot) < 0.0) col = -col;
        out.vectors.col(j) = col;
    }
    return out;
}

RankSelection select_rank(const Vector& eigenvalues, double t_ave, double delta, double c) {
    if (!(t_ave > 1.0)) throw InputError("select_rank: T_ave must exceed 1");
    RankSelection out;
    out.eigenvalues = eigenvalues;
    out.delta = delta;
    out.c = c;
    out.t_ave = t_ave;
    out.threshold = c * std::pow(t_ave, -delta);
    out.r_tilde = static_cast<int>(
        std::count_if(eigenvalues.begin(), eigenvalues.end(), [&](double l) { return l < out.threshold; }));
    return out;
}

}  // namespace pme
