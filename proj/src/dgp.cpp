#include "pme/dgp.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <string>

#include <Eigen/Cholesky>

#include "pme/error.hpp"

namespace pme {

const char* to_string(Model v) { return v == Model::Var1 ? "var1" : "varma11"; }
const char* to_string(ErrorDist v) { return v == ErrorDist::Gaussian ? "gaussian" : "chi2"; }
const char* to_string(Speed v) { return v == Speed::Moderate ? "moderate" : "slow"; }
const char* to_string(Persistence v) {
    switch (v) {
        case Persistence::Low: return "low";
        case Persistence::Moderate: return "moderate";
        case Persistence::High: return "high";
    }
    return "unknown";
}

Matrix VecmDesign::b0() const {
    if (r0 == 1) return (Matrix(3, 1) << 1, 0, -1).finished();
    if (r0 == 2) return (Matrix(3, 2) << 1, 0, 0, 1, -1, -1).finished();
    throw DesignError("error-correction design needs r0 in {1, 2}");
}

Matrix VecmDesign::theta0() const { return b0().bottomRows(m - r0); }

namespace {

constexpr int kMaxCovarianceDraws = 100;

double draw_shock(ErrorDist errors, RandomStream& rng) {
    return errors == ErrorDist::Gaussian ? rng.normal() : rng.centred_chi2();
}

// u = L * eps with L lower triangular; out must have size m.
void lower_times(const Matrix& l, const double* eps, double* out) {
    const auto m = l.rows();
    for (Eigen::Index j = 0; j < m; ++j) {
        double s = 0.0;
        for (Eigen::Index k = 0; k <= j; ++k) s += l(j, k) * eps[k];
        out[j] = s;
    }
}

std::pair<double, double> speed_range(Speed s) {
    return s == Speed::Moderate ? std::pair{0.1, 0.3} : std::pair{0.1, 0.2};
}

void add_factors(std::vector<UnitSeries>& units, const FactorDesign& f, std::size_t t, const SimulationKey& key) {
    auto rng = key.stream(StreamTag::Factors);
    const Matrix path = draw_factor_path(f, t, rng);
    for (auto& u : units) {
        Matrix g(u.values.cols(), f.count);
        for (Eigen::Index j = 0; j < g.rows(); ++j)
            for (Eigen::Index k = 0; k < g.cols(); ++k) g(j, k) = rng.uniform(0.0, f.loading_max);
        u.values.noalias() += path * g.transpose();
    }
}

std::string cache_key(const VecmDesign& d, const KappaSearch& s) {
    std::ostringstream os;
    os.precision(17);
    os << d.r0 << '|' << static_cast<int>(d.model) << '|' << static_cast<int>(d.errors) << '|'
       << static_cast<int>(d.speed) << '|' << d.pr2_target << '|' << d.presample << '|' << s.n << '|' << s.t << '|'
       << s.replications << '|' << s.grid_step << '|' << s.grid_max << '|' << s.tolerance << '|' << s.seed;
    return os.str();
}

}  // namespace

Matrix draw_shock_covariance(int m, RandomStream& rng) {
    for (int attempt = 0; attempt < kMaxCovarianceDraws; ++attempt) {
        Matrix v = Matrix::Identity(m, m);
        for (int j = 0; j < m; ++j)
            for (int k = j + 1; k < m; ++k) v(j, k) = v(k, j) = rng.uniform(0.0, 0.5);
        Eigen::LLT<Matrix> llt(v);
        if (llt.info() == Eigen::Success) return v;
    }
    throw DesignError("no positive definite shock covariance after 100 draws");
}

VecmUnitParams draw_vecm_params(const VecmDesign& design, RandomStream& rng) {
    const int m = VecmDesign::m;
    VecmUnitParams p;
    const auto [lo, hi] = speed_range(design.speed);
    p.rho.resize(design.r0);
    for (int j = 0; j < design.r0; ++j) p.rho(j) = rng.uniform(lo, hi);
    p.v = draw_shock_covariance(m, rng);
    p.v_chol = Eigen::LLT<Matrix>(p.v).matrixL();
    p.theta = Matrix::Zero(m, m);
    if (design.model == Model::Varma11) {
        for (int j = 0; j < m; ++j) p.theta(j, j) = rng.uniform(-0.5, 0.5);
    }
    p.mu.resize(m);
    for (int j = 0; j < m; ++j) p.mu(j) = rng.normal();
    return p;
}

Matrix loadings_r1(double rho, double kappa) {
    const double disc = 2.0 * kappa * kappa - rho * rho;
    if (disc < -1e-12 * std::max(1.0, rho * rho)) {
        throw DesignError("kappa^2 below rho^2/2: loadings have no real solution");
    }
    const double a31 = (-rho + std::sqrt(std::max(0.0, disc))) / 2.0;
    return (Matrix(3, 1) << a31 + rho, 0.0, a31).finished();
}

std::vector<Matrix> build_loadings_r1(std::span<const double> rho, double kappa) {
    std::vector<Matrix> out;
    out.reserve(rho.size());
    for (double r : rho) out.push_back(loadings_r1(r, kappa));
    return out;
}

Matrix loadings_r2(double rho11, double rho22, double kappa) {
    return (Matrix(3, 2) << kappa + rho11, kappa, kappa, kappa + rho22, kappa, kappa).finished();
}

double explained_variance(const Matrix& a, const Matrix& b0, const Matrix& v) {
    const auto r = b0.cols();
    const Matrix q = Matrix::Identity(r, r) - b0.transpose() * a;
    const Matrix s = b0.transpose() * v * b0;
    Matrix kron(r * r, r * r);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < r; ++j) kron.block(i * r, j * r, r, r) = q(i, j) * q;
    const Matrix lhs = Matrix::Identity(r * r, r * r) - kron;
    const Vector vec_s = Eigen::Map<const Vector>(s.data(), r * r);
    const Vector vec_omega = lhs.partialPivLu().solve(vec_s);
    const Matrix omega = Eigen::Map<const Matrix>(vec_omega.data(), r, r);
    return (a * omega * a.transpose()).trace();
}

double solve_kappa_var1(const VecmDesign& design, std::span<const VecmUnitParams> units) {
    const double pr2 = design.pr2_target;
    if (!(pr2 > 0.0 && pr2 < 1.0)) throw DesignError("fit target must lie in (0, 1)");
    if (units.empty()) throw DesignError("no units to calibrate");
    const Matrix b0 = design.b0();
    double sum_tr = 0.0;
    for (const auto& u : units) sum_tr += u.v.trace();
    const double target = sum_tr * pr2 / (1.0 - pr2);

    if (design.r0 == 1) {
        double denom = 0.0;
        double rho_sq_max = 0.0;
        for (const auto& u : units) {
            const double rho = u.rho(0);
            const double bvb = (b0.transpose() * u.v * b0)(0, 0);
            denom += bvb / (1.0 - (1.0 - rho) * (1.0 - rho));
            rho_sq_max = std::max(rho_sq_max, rho * rho);
        }
        const double kappa_sq = target / denom;
        if (kappa_sq < rho_sq_max / 2.0) throw DesignError("fit target too low for real loadings");
        return std::sqrt(kappa_sq);
    }

    // Weights 1 / (1 - rho_j rho_k) on vec(A'A)' vec(b0' V b0).
    auto excess = [&](double kappa) {
        double s = 0.0;
        for (const auto& u : units) {
            const Matrix a = loadings_r2(u.rho(0), u.rho(1), kappa);
            const Matrix ata = a.transpose() * a;
            const Matrix bvb = b0.transpose() * u.v * b0;
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k) s += ata(j, k) * bvb(j, k) / (1.0 - u.rho(j) * u.rho(k));
        }
        return s - target;
    };
    double lo = 0.0;
    double hi = 10.0;
    if (excess(lo) > 0.0 || excess(hi) < 0.0) throw DesignError("no kappa in (0, 10] attains the fit target");
    while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        (excess(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

MaCoefficients ma_coefficients(const Matrix& psi, const Matrix& theta, const Matrix& b0, int presample) {
    if (presample < 1) throw InputError("moving-average truncation must be at least 1");
    const auto m = psi.rows();
    MaCoefficients out;
    out.upsilon.reserve(static_cast<std::size_t>(presample) + 1);
    out.b0_cstar.reserve(static_cast<std::size_t>(presample) + 1);
    const Matrix eye = Matrix::Identity(m, m);
    out.upsilon.push_back(eye);
    out.upsilon.push_back(psi - eye - theta);
    for (int l = 2; l <= presample; ++l) {
        Matrix next = psi * out.upsilon.back();
        if (l == 2) next += theta;
        out.upsilon.push_back(std::move(next));
    }
    out.upsilon.resize(static_cast<std::size_t>(presample) + 1);
    Matrix cum = Matrix::Zero(b0.cols(), m);
    for (const auto& u : out.upsilon) {
        cum += b0.transpose() * u;
        out.b0_cstar.push_back(cum);
    }
    return out;
}

InitialState initial_state(const VecmUnitParams& p, const Matrix& b0, const MaCoefficients& ma, const Matrix& shocks) {
    const auto m = b0.rows();
    InitialState s;
    s.dw0 = Vector::Zero(m);
    s.xi0 = b0.transpose() * p.mu;
    for (std::size_t l = 0; l < ma.upsilon.size(); ++l) {
        const auto col = shocks.col(static_cast<Eigen::Index>(l));
        s.dw0 += ma.upsilon[l] * col;
        s.xi0 += ma.b0_cstar[l] * col;
    }
    s.w0 = b0 * (b0.transpose() * b0).ldlt().solve(s.xi0);
    return s;
}

UnitPath simulate_vecm_unit(const VecmUnitParams& p, const Matrix& b0, std::size_t t, ErrorDist errors, int presample,
                            RandomStream& shocks) {
    const auto m = b0.rows();
    const auto r = b0.cols();
    if (p.a.rows() != m || p.a.cols() != r) throw DesignError("loadings have not been set");
    const Matrix pi = p.a * b0.transpose();
    const Matrix psi = Matrix::Identity(m, m) - pi;
    const Vector d = pi * p.mu;

    // Pre-sample shocks u_{-M}, ..., u_0, column l holding u_{-l}.
    const auto mm = static_cast<Eigen::Index>(presample);
    Matrix pre(m, mm + 1);
    Vector eps(m);
    for (Eigen::Index l = mm; l >= 0; --l) {
        for (Eigen::Index j = 0; j < m; ++j) eps(j) = draw_shock(errors, shocks);
        lower_times(p.v_chol, eps.data(), pre.col(l).data());
    }

    // b0' w_0 from the truncated moving-average representation, accumulated on the fly.
    Matrix ups = Matrix::Identity(m, m);
    Matrix next(m, m);
    Matrix cstar = b0.transpose();
    Vector xi = b0.transpose() * p.mu;
    xi.noalias() += cstar * pre.col(0);
    for (Eigen::Index l = 1; l <= mm; ++l) {
        if (l == 1) {
            ups = psi - Matrix::Identity(m, m) - p.theta;
        } else {
            next.noalias() = psi * ups;
            if (l == 2) next += p.theta;
            ups.swap(next);
        }
        cstar.noalias() += b0.transpose() * ups;
        xi.noalias() += cstar * pre.col(l);
    }
    const Vector w0 = b0 * (b0.transpose() * b0).ldlt().solve(xi);

    UnitPath out;
    out.levels.resize(static_cast<Eigen::Index>(t), m);
    std::vector<double> w_prev(w0.data(), w0.data() + m);
    std::vector<double> u_prev(pre.col(0).data(), pre.col(0).data() + m);
    std::vector<double> u(static_cast<std::size_t>(m));
    std::vector<double> w(static_cast<std::size_t>(m));
    std::vector<double> dw_sum(static_cast<std::size_t>(m), 0.0);
    Matrix dw(static_cast<Eigen::Index>(t), m);
    for (std::size_t s = 0; s < t; ++s) {
        for (Eigen::Index j = 0; j < m; ++j) eps(j) = draw_shock(errors, shocks);
        lower_times(p.v_chol, eps.data(), u.data());
        for (Eigen::Index j = 0; j < m; ++j) {
            double acc = d(j) + u[j] - p.theta(j, j) * u_prev[j];
            for (Eigen::Index k = 0; k < m; ++k) acc += psi(j, k) * w_prev[k];
            w[j] = acc;
        }
        const auto row = static_cast<Eigen::Index>(s);
        for (Eigen::Index j = 0; j < m; ++j) {
            out.levels(row, j) = w[j];
            dw(row, j) = w[j] - w_prev[j];
            out.sum_u2 += u[j] * u[j];
        }
        std::swap(w_prev, w);
        std::swap(u_prev, u);
    }
    out.sum_dev2 = (dw.rowwise() - dw.colwise().mean()).squaredNorm();
    return out;
}

Matrix draw_factor_path(const FactorDesign& f, std::size_t t, RandomStream& rng) {
    Matrix path(static_cast<Eigen::Index>(t), f.count);
    if (t == 0) return path;
    for (int k = 0; k < f.count; ++k) path(0, k) = rng.normal();
    const std::size_t brk = t / 2;
    for (std::size_t s = 1; s < t; ++s) {
        const double rho = s < brk ? f.rho_first : f.rho_second;
        const double scale = std::sqrt(1.0 - rho * rho);
        const auto row = static_cast<Eigen::Index>(s);
        for (int k = 0; k < f.count; ++k) path(row, k) = rho * path(row - 1, k) + scale * rng.normal();
    }
    return path;
}

SimulatedPanel dgp_vecm(const VecmDesign& design, std::size_t n, std::size_t t, const SimulationKey& key,
                        std::optional<double> kappa, const KappaSearch& search) {
    if (n == 0 || t == 0) throw DesignError("panel needs n >= 1 and T >= 1");
    const Matrix b0 = design.b0();
    auto param_rng = key.stream(StreamTag::Parameters);
    auto shock_rng = key.stream(StreamTag::Shocks);

    std::vector<VecmUnitParams> params;
    params.reserve(n);
    for (std::size_t i = 0; i < n; ++i) params.push_back(draw_vecm_params(design, param_rng));

    double k = 0.0;
    if (kappa) {
        k = *kappa;
    } else if (design.model == Model::Var1) {
        k = solve_kappa_var1(design, params);
    } else {
        k = solve_kappa_simulated(design, search);
    }
    for (auto& p : params) p.a = design.r0 == 1 ? loadings_r1(p.rho(0), k) : loadings_r2(p.rho(0), p.rho(1), k);

    SimulatedPanel out;
    out.r0 = design.r0;
    out.b0 = b0;
    out.theta0 = design.theta0();
    out.kappa = k;
    std::vector<UnitSeries> units;
    units.reserve(n);
    double sum_u2 = 0.0;
    double sum_dev2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto path = simulate_vecm_unit(params[i], b0, t, design.errors, design.presample, shock_rng);
        sum_u2 += path.sum_u2;
        sum_dev2 += path.sum_dev2;
        units.emplace_back(std::to_string(i + 1), std::int64_t{1}, std::move(path.levels));
    }
    out.realized_pr2 = sum_dev2 > 0.0 ? 1.0 - sum_u2 / sum_dev2 : 0.0;
    if (design.interactive_effects) add_factors(units, design.factors, t, key);
    out.panel = PanelDataset::with_default_names(std::move(units));
    return out;
}

double pilot_fit(const VecmDesign& design, double kappa, const KappaSearch& search) {
    VecmDesign plain = design;
    plain.interactive_effects = false;
    double sum = 0.0;
    for (int rep = 0; rep < search.replications; ++rep) {
        const SimulationKey key{search.seed, 0, static_cast<std::uint64_t>(rep)};
        sum += dgp_vecm(plain, search.n, search.t, key, kappa).realized_pr2;
    }
    return sum / static_cast<double>(search.replications);
}

double solve_kappa_simulated(const VecmDesign& design, const KappaSearch& search) {
    static std::mutex mutex;
    static std::map<std::string, double> cache;
    const std::string key = cache_key(design, search);
    {
        std::lock_guard lock(mutex);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
    }
    if (search.replications < 1 || !(search.grid_step > 0.0)) throw InputError("invalid kappa search settings");

    const double target = design.pr2_target;
    auto fit = [&](double k) {
        try {
            return pilot_fit(design, k, search);
        } catch (const DesignError&) {
            return -std::numeric_limits<double>::infinity();  // infeasible loadings
        }
    };

    double best = search.grid_step;
    double best_gap = std::numeric_limits<double>::infinity();
    double lo = 0.0;
    std::optional<double> hi;
    for (double k = search.grid_step; k <= search.grid_max + 1e-12; k += search.grid_step) {
        const double f = fit(k);
        if (std::abs(f - target) < best_gap) {
            best_gap = std::abs(f - target);
            best = k;
        }
        if (f >= target) {
            hi = k;
            break;
        }
        lo = k;
    }
    double result = best;
    if (hi) {
        double a = lo;
        double b = *hi;
        while (b - a > search.tolerance) {
            const double mid = 0.5 * (a + b);
            (fit(mid) < target ? a : b) = mid;
        }
        result = 0.5 * (a + b);
    }
    std::lock_guard lock(mutex);
    cache.emplace(key, result);
    return result;
}

Vector draw_persistence(Persistence p, int m, RandomStream& rng) {
    double lo = 0.0;
    double hi = 0.8;
    if (p == Persistence::Moderate) {
        lo = 0.7;
        hi = 0.9;
    } else if (p == Persistence::High) {
        lo = 0.8;
        hi = 0.95;
    }
    Vector phi(m);
    for (int j = 0; j < m; ++j) phi(j) = rng.uniform(lo, hi);
    return phi;
}

Matrix simulate_var_diff_unit(const Vector& phi, const Matrix& chol, std::size_t t, RandomStream& shocks) {
    const auto m = phi.size();
    Vector dw(m);
    for (Eigen::Index j = 0; j < m; ++j) dw(j) = shocks.normal() / std::sqrt(1.0 - phi(j) * phi(j));
    Vector w = dw;  // w_{-1} = 0
    Vector eps(m);
    Vector u(m);
    Matrix levels(static_cast<Eigen::Index>(t), m);
    for (std::size_t s = 0; s < t; ++s) {
        for (Eigen::Index j = 0; j < m; ++j) eps(j) = shocks.normal();
        lower_times(chol, eps.data(), u.data());
        dw = phi.cwiseProduct(dw) + u;
        w += dw;
        levels.row(static_cast<Eigen::Index>(s)) = w.transpose();
    }
    return levels;
}

SimulatedPanel dgp_var_diff(const VarDiffDesign& design, std::size_t n, std::size_t t, const SimulationKey& key) {
    if (n == 0 || t == 0) throw DesignError("panel needs n >= 1 and T >= 1");
    const int m = VarDiffDesign::m;
    auto param_rng = key.stream(StreamTag::Parameters);
    auto shock_rng = key.stream(StreamTag::Shocks);
    std::vector<UnitSeries> units;
    units.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vector phi = draw_persistence(design.persistence, m, param_rng);
        const Matrix chol = Eigen::LLT<Matrix>(draw_shock_covariance(m, param_rng)).matrixL();
        units.emplace_back(std::to_string(i + 1), std::int64_t{1}, simulate_var_diff_unit(phi, chol, t, shock_rng));
    }
    if (design.interactive_effects) add_factors(units, design.factors, t, key);
    SimulatedPanel out;
    out.r0 = 0;
    out.panel = PanelDataset::with_default_names(std::move(units));
    return out;
}

BivariateUnitParams draw_bivariate_params(RandomStream& rng) {
    BivariateUnitParams p;
    p.a = rng.uniform(0.2, 0.3);
    p.sigma1 = std::sqrt(rng.uniform(0.8, 1.2));
    p.sigma2 = std::sqrt(rng.uniform(0.8, 1.2));
    p.rho_e = rng.uniform(0.3, 0.7);
    p.mu = rng.normal();
    return p;
}

Matrix simulate_bivariate_unit(const BivariateUnitParams& p, std::size_t t, RandomStream& shocks) {
    const double c = p.a * p.mu;
    // z = w1 - w2 follows z_t = c + (1 - a) z_{t-1} + u1 - u2; start it from its stationary law.
    double z0 = 0.0;
    if (p.a > 0.0) {
        const double var_diff = p.sigma1 * p.sigma1 + p.sigma2 * p.sigma2 - 2.0 * p.rho_e * p.sigma1 * p.sigma2;
        const double var_z = var_diff / (1.0 - (1.0 - p.a) * (1.0 - p.a));
        z0 = p.mu + std::sqrt(var_z) * shocks.normal();
    }
    double w1 = z0;
    double w2 = 0.0;
    const double tail = std::sqrt(1.0 - p.rho_e * p.rho_e);
    Matrix levels(static_cast<Eigen::Index>(t), 2);
    for (std::size_t s = 0; s < t; ++s) {
        const double e1 = shocks.normal();
        const double e2 = p.rho_e * e1 + tail * shocks.normal();
        const double dw1 = c - p.a * (w1 - w2) + p.sigma1 * e1;
        w1 += dw1;
        w2 += p.sigma2 * e2;
        levels(static_cast<Eigen::Index>(s), 0) = w1;
        levels(static_cast<Eigen::Index>(s), 1) = w2;
    }
    return levels;
}

SimulatedPanel dgp_pb(std::size_t n, std::size_t t, const SimulationKey& key) {
    if (n == 0 || t == 0) throw DesignError("panel needs n >= 1 and T >= 1");
    auto param_rng = key.stream(StreamTag::Parameters);
    auto shock_rng = key.stream(StreamTag::Shocks);
    std::vector<UnitSeries> units;
    units.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = draw_bivariate_params(param_rng);
        units.emplace_back(std::to_string(i + 1), std::int64_t{1}, simulate_bivariate_unit(p, t, shock_rng));
    }
    SimulatedPanel out;
    out.r0 = 1;
    out.b0 = (Matrix(2, 1) << 1, -1).finished();
    out.theta0 = Matrix::Constant(1, 1, -1.0);
    out.panel = PanelDataset::with_default_names(std::move(units));
    return out;
}

}  // namespace pme
