#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pme/panel.hpp"
#include "pme/random.hpp"

namespace pme {

enum class Model { Var1, Varma11 };
enum class ErrorDist { Gaussian, ChiSquared };
enum class Speed { Moderate, Slow };
enum class Persistence { Low, Moderate, High };

const char* to_string(Model v);
const char* to_string(ErrorDist v);
const char* to_string(Speed v);
const char* to_string(Persistence v);

/// Common AR(1) factors whose coefficient breaks at the sample midpoint.
struct FactorDesign {
    int count = 4;
    double rho_first = 0.6;
    double rho_second = 0.4;
    double loading_max = 0.4;  ///< loadings ~ U[0, loading_max]
};

/// Three-variable error-correction design with r0 in {1, 2} long-run relations.
struct VecmDesign {
    int r0 = 1;
    Model model = Model::Var1;
    ErrorDist errors = ErrorDist::Gaussian;
    Speed speed = Speed::Moderate;
    double pr2_target = 0.2;
    bool interactive_effects = false;
    FactorDesign factors;
    int presample = 50;  ///< truncation of the moving-average initialisation

    static constexpr int m = 3;
    /// (1,0,-1)' for r0 = 1; columns (1,0,-1)' and (0,1,-1)' for r0 = 2.
    Matrix b0() const;
    /// Lower (m - r0) x r0 block of the normalised b0.
    Matrix theta0() const;
};

/// Three-variable VAR(1) in first differences: no long-run relations.
struct VarDiffDesign {
    Persistence persistence = Persistence::High;
    bool interactive_effects = false;
    FactorDesign factors;
    static constexpr int m = 3;
};

/// Bivariate design with one relation w1 - w2 and one-way long-run causality.
struct BivariateDesign {
    static constexpr int m = 2;
};

/// Identifies the random streams of one simulated panel.
struct SimulationKey {
    std::uint64_t seed = 0;
    std::uint64_t cell = 0;
    std::uint64_t replication = 0;

    RandomStream stream(StreamTag tag) const { return RandomStream(seed, cell, replication, tag); }
};

/// Settings for calibrating kappa by pilot simulation.
struct KappaSearch {
    std::size_t n = 500;
    std::size_t t = 100;
    int replications = 200;
    double grid_step = 0.1;
    double grid_max = 3.0;
    double tolerance = 1e-3;  ///< bisection stops once the bracket is this narrow
    std::uint64_t seed = 0x5eedULL;
};

struct VecmUnitParams {
    Vector rho;      ///< per-relation speed of adjustment (r0 entries)
    Matrix v;        ///< shock covariance, unit diagonal
    Matrix v_chol;   ///< lower Cholesky factor of v
    Matrix theta;    ///< diagonal MA matrix (zero for VAR(1))
    Vector mu;       ///< equilibrium level shift
    Matrix a;        ///< m x r0 loadings, filled once kappa is known
};

/// Unit diagonal, off-diagonals U(0, 0.5), redrawn until positive definite.
/// Throws DesignError after 100 failed draws.
Matrix draw_shock_covariance(int m, RandomStream& rng);

/// Draws everything except the loadings, which depend on kappa.
VecmUnitParams draw_vecm_params(const VecmDesign& design, RandomStream& rng);

/// Loadings for r0 = 1: a21 = 0, a11 = a31 + rho and a31 the positive root of
/// a^2 + rho a + (rho^2 - kappa^2) / 2 = 0. Throws DesignError when kappa^2 < rho^2 / 2.
Matrix loadings_r1(double rho, double kappa);
std::vector<Matrix> build_loadings_r1(std::span<const double> rho, double kappa);

/// Loadings for r0 = 2 with a31 = a32 = a21 = a12 = kappa.
Matrix loadings_r2(double rho11, double rho22, double kappa);

/// tr(A Omega A') where Omega is the stationary covariance of b0' w implied by the
/// VAR(1) error-correction dynamics with loadings `a` and shock covariance `v`.
double explained_variance(const Matrix& a, const Matrix& b0, const Matrix& v);

/// Kappa calibrating the loadings of VAR(1) designs to pr2_target.
/// r0 = 1: kappa^2 = pr2/(1-pr2) * sum tr(V_i) / sum[b0'V_i b0 / (1-(1-rho_i)^2)].
/// r0 = 2: bisection on (0, 10] for
///   sum_i sum_jk (A_i'A_i)_jk (b0'V_i b0)_jk / (1 - rho_ij rho_ik) = pr2/(1-pr2) * sum tr(V_i).
double solve_kappa_var1(const VecmDesign& design, std::span<const VecmUnitParams> units);

/// Average realised fit over the pilot panels of `search` at a given kappa.
double pilot_fit(const VecmDesign& design, double kappa, const KappaSearch& search);

/// Kappa matching pr2_target by grid search over pilot simulations, refined by bisection.
/// Results are cached per (design, search).
double solve_kappa_simulated(const VecmDesign& design, const KappaSearch& search = {});

struct MaCoefficients {
    std::vector<Matrix> upsilon;  ///< Upsilon_0..M
    std::vector<Matrix> b0_cstar; ///< b0' C*_0..M (r0 x m)
};

/// Moving-average form of first differences, Psi = I - A b0'.
MaCoefficients ma_coefficients(const Matrix& psi, const Matrix& theta, const Matrix& b0, int presample);

struct InitialState {
    Vector dw0;
    Vector xi0;
    Vector w0;
};

/// `shocks` column l holds u_{-l}, l = 0..M.
InitialState initial_state(const VecmUnitParams& p, const Matrix& b0, const MaCoefficients& ma, const Matrix& shocks);

struct UnitPath {
    Matrix levels;        ///< T x m, observations t = 1..T
    double sum_u2 = 0.0;  ///< sum of squared shocks over t = 1..T
    double sum_dev2 = 0.0;///< sum of squared demeaned first differences
};

UnitPath simulate_vecm_unit(const VecmUnitParams& p, const Matrix& b0, std::size_t t, ErrorDist errors, int presample,
                            RandomStream& shocks);

/// Common factor path, T x count.
Matrix draw_factor_path(const FactorDesign& f, std::size_t t, RandomStream& rng);

struct SimulatedPanel {
    PanelDataset panel;
    int r0 = 0;
    Matrix b0;                     ///< empty when r0 = 0
    std::optional<Matrix> theta0;  ///< normalised truth
    double realized_pr2 = 0.0;     ///< fit of the error-correction part (0 when not applicable)
    std::optional<double> kappa;
};

/// `kappa` overrides calibration; otherwise VAR(1) designs are solved analytically per
/// panel and VARMA designs by cached pilot simulation.
SimulatedPanel dgp_vecm(const VecmDesign& design, std::size_t n, std::size_t t, const SimulationKey& key,
                        std::optional<double> kappa = std::nullopt, const KappaSearch& search = {});

Vector draw_persistence(Persistence p, int m, RandomStream& rng);
Matrix simulate_var_diff_unit(const Vector& phi, const Matrix& chol, std::size_t t, RandomStream& shocks);
SimulatedPanel dgp_var_diff(const VarDiffDesign& design, std::size_t n, std::size_t t, const SimulationKey& key);

struct BivariateUnitParams {
    double a = 0.25;
    double sigma1 = 1.0;
    double sigma2 = 1.0;
    double rho_e = 0.5;
    double mu = 0.0;
};

BivariateUnitParams draw_bivariate_params(RandomStream& rng);
Matrix simulate_bivariate_unit(const BivariateUnitParams& p, std::size_t t, RandomStream& shocks);
SimulatedPanel dgp_pb(std::size_t n, std::size_t t, const SimulationKey& key);

}  // namespace pme
