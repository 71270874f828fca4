#ifndef LATPARK_RANDOM_HPP
#define LATPARK_RANDOM_HPP

#include <cstdint>
#include <random>

namespace latpark {

/// Purpose tags for per-trial streams. Each purpose gets its own engine so
/// changing one noise level never shifts the draws of another.
enum class StreamPurpose : std::uint32_t {
    kInitialCondition = 1,
    kLidar = 2,
    kLocalization = 3,
    kHeading = 4,
    kRuler = 5,
};

/// Seeded Gaussian/uniform source. The standard normal draw is always taken,
/// even for std == 0, so streams stay aligned across noise settings.
class NoiseStream {
public:
    explicit NoiseStream(std::uint64_t seed) : engine_(seed) {}

    NoiseStream(std::uint64_t seed, std::uint64_t trial_index, StreamPurpose purpose) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(trial_index),
                          static_cast<std::uint32_t>(trial_index >> 32),
                          static_cast<std::uint32_t>(purpose)};
        engine_.seed(seq);
    }

    double gaussian(double stddev) { return stddev * normal_(engine_); }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * std::generate_canonical<double, 53>(engine_);
    }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace latpark

#endif  // LATPARK_RANDOM_HPP
