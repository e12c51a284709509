#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace pme {

/// Generator identity recorded in simulation reports.
inline constexpr const char* kGeneratorName = "mt19937_64/seed_seq(seed,cell,rep,stream)";

/// Purposes for which independent streams are derived from one replication key.
enum class StreamTag : std::uint32_t {
    Parameters = 1,  ///< unit-specific design parameters
    Shocks = 2,      ///< idiosyncratic innovations
    Factors = 3,     ///< common factors and their loadings
};

/// Seeded Mersenne Twister whose state is a deterministic function of a key
/// (seed, cell, replication, tag). Distinct keys give independent streams and
/// results never depend on thread scheduling.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t cell, std::uint64_t replication, StreamTag tag);

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit_(engine_); }
    double normal() { return normal_(engine_); }
    /// Chi-squared with 2 degrees of freedom, centred and scaled to mean 0, variance 1.
    double centred_chi2() { return (chi2_(engine_) - 2.0) / 2.0; }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::chi_squared_distribution<double> chi2_{2.0};
};

}  // namespace pme
