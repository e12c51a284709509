#pragma once

// Reference computations written independently of the library, used as test oracles.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "pme/panel.hpp"

namespace oracle {

using pme::Matrix;
using pme::Vector;

// Block means of one unit with blocks laid out by hand: the first (T mod q) blocks
// take one extra observation. Returns q x m means and the block lengths.
inline Matrix block_means(const Matrix& x, int q, std::vector<double>& lengths) {
    const long t = x.rows();
    const long base = t / q;
    const long extra = t % q;
    Matrix means = Matrix::Zero(q, x.cols());
    lengths.assign(static_cast<std::size_t>(q), 0.0);
    long row = 0;
    for (int l = 0; l < q; ++l) {
        const long len = base + (l < extra ? 1 : 0);
        for (long s = 0; s < len; ++s, ++row)
            for (long k = 0; k < x.cols(); ++k) means(l, k) += x(row, k);
        means.row(l) /= static_cast<double>(len);
        lengths[static_cast<std::size_t>(l)] = static_cast<double>(len);
    }
    return means;
}

// Row l: block mean minus the full-sample mean computed directly from the raw rows.
inline Matrix deviations(const Matrix& x, int q) {
    std::vector<double> lengths;
    Matrix d = block_means(x, q, lengths);
    Vector grand = Vector::Zero(x.cols());
    for (long s = 0; s < x.rows(); ++s)
        for (long k = 0; k < x.cols(); ++k) grand(k) += x(s, k);
    grand /= static_cast<double>(x.rows());
    for (int l = 0; l < q; ++l)
        for (long k = 0; k < x.cols(); ++k) d(l, k) -= grand(k);
    return d;
}

// Q = n^-1 sum_i T_i^-1 q^-1 sum_l d_il d_il' by explicit entry loops.
inline Matrix naive_q(const pme::PanelDataset& p, int q) {
    const long m = static_cast<long>(p.m());
    Matrix out = Matrix::Zero(m, m);
    for (const auto& u : p.units) {
        const Matrix d = deviations(u.values, q);
        const double t = static_cast<double>(u.values.rows());
        for (long j = 0; j < m; ++j)
            for (long k = 0; k < m; ++k) {
                double s = 0.0;
                for (int l = 0; l < q; ++l) s += d(l, j) * d(l, k);
                out(j, k) += s / (t * q);
            }
    }
    return out / static_cast<double>(p.n());
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (long i = 0; i < a.rows(); ++i)
        for (long j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// Literal quadruple sum over (i, l, l'):
//   Omega = n^-1 sum_i w_i sum_l sum_l' (E_il (x) I_m) d_il d_il'' (E_il'' (x) I_m),
// with w_i = phi_i^2 / q^2, phi_i = T_h / T_i and T_h the harmonic mean of the T_i.
// Returns (n T_h^2)^-1 (I_r (x) Q22^-1) Omega_22 (I_r (x) Q22^-1).
inline Matrix naive_theta_variance(const pme::PanelDataset& p, int q, const Matrix& b_ring) {
    const long m = static_cast<long>(p.m());
    const long r = b_ring.cols();
    const double n = static_cast<double>(p.n());
    double inv_sum = 0.0;
    for (const auto& u : p.units) inv_sum += 1.0 / static_cast<double>(u.values.rows());
    const double t_h = n / inv_sum;
    const Matrix eye_m = Matrix::Identity(m, m);

    Matrix omega = Matrix::Zero(m * r, m * r);
    for (const auto& u : p.units) {
        const Matrix d = deviations(u.values, q);
        const double phi = t_h / static_cast<double>(u.values.rows());
        const double w = phi * phi / (static_cast<double>(q) * q);
        for (int l = 0; l < q; ++l) {
            const Vector dl = d.row(l).transpose();
            const Matrix el = b_ring.transpose() * dl;
            for (int l2 = 0; l2 < q; ++l2) {
                const Vector dl2 = d.row(l2).transpose();
                const Matrix el2 = b_ring.transpose() * dl2;
                omega += w * kron(el, eye_m) * (dl * dl2.transpose()) * kron(el2.transpose(), eye_m);
            }
        }
    }
    omega /= n;

    std::vector<long> idx;
    for (long j = 0; j < r; ++j)
        for (long k = r; k < m; ++k) idx.push_back(j * m + k);
    Matrix omega22(idx.size(), idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = 0; b < idx.size(); ++b) omega22(a, b) = omega(idx[a], idx[b]);

    const Matrix qbar = naive_q(p, q);
    const Matrix q22inv = qbar.bottomRightCorner(m - r, m - r).inverse();
    const Matrix k = kron(Matrix::Identity(r, r), q22inv);
    return k * omega22 * k / (n * t_h * t_h);
}

// Roots of the characteristic polynomial, ascending.
inline std::vector<double> eig2(long double a, long double b, long double d) {
    const long double tr = a + d;
    const long double disc = std::sqrt((a - d) * (a - d) + 4 * b * b);
    return {static_cast<double>((tr - disc) / 2), static_cast<double>((tr + disc) / 2)};
}

// Closed-form trigonometric roots of a symmetric 3x3 characteristic polynomial.
inline std::vector<double> eig3(const Matrix& s) {
    using ld = long double;
    const ld a = s(0, 0), b = s(1, 1), c = s(2, 2), d = s(0, 1), e = s(1, 2), f = s(0, 2);
    const ld p1 = d * d + e * e + f * f;
    std::vector<double> out;
    if (p1 == 0) {
        out = {static_cast<double>(a), static_cast<double>(b), static_cast<double>(c)};
    } else {
        const ld q = (a + b + c) / 3;
        const ld p2 = (a - q) * (a - q) + (b - q) * (b - q) + (c - q) * (c - q) + 2 * p1;
        const ld p = std::sqrt(p2 / 6);
        const ld ba = (a - q) / p, bb = (b - q) / p, bc = (c - q) / p, bd = d / p, be = e / p, bf = f / p;
        ld det = ba * (bb * bc - be * be) - bd * (bd * bc - be * bf) + bf * (bd * be - bb * bf);
        ld rr = std::clamp(det / 2, ld(-1), ld(1));
        const ld phi = std::acos(rr) / 3;
        const ld pi = std::numbers::pi_v<long double>;
        const ld l1 = q + 2 * p * std::cos(phi);
        const ld l3 = q + 2 * p * std::cos(phi + 2 * pi / 3);
        const ld l2 = 3 * q - l1 - l3;
        out = {static_cast<double>(l1), static_cast<double>(l2), static_cast<double>(l3)};
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace oracle
