#pragma once

// Sectioned key = value run configuration. Every key is range-checked while
// parsing; anything unrecognised is rejected with its line number.

#include "hypmix/family.hpp"
#include "hypmix/flow.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hypmix {

struct FamilySection {
    std::string name = "modular";
    std::array<long long, 4> f0_coeffs{1, 0, -1, 1};
    FamilyConstants constants{};
};

struct MeasureSection {
    // x-strip used when sampling the (infinite) measure m for invariance checks.
    double x_window_lo = 0.05;
    double x_window_hi = 5.0;
    long rejection_cap = 10000;
    std::optional<std::uint64_t> seed;
    long long invariance_samples = 1000000;
    long long transfer_truncation = 200;
    int transfer_points = 20;
};

struct VerifySection {
    std::vector<int> uni_n{1, 2, 3, 4};
    std::size_t uni_grid = 1000;
    long long tails_smax = 100;
    long long tails_qmax = 100;
    std::optional<double> sigma;  // defaults to the family's default_sigma()
    double y_prime = 1.0;
    int truncation_N = 20;
    std::size_t quad_samples = 1000;
    long long distortion_pairs = 100000;
    long long bound_max = 50;  // s, q range of the exact 1/Fhat'(d) bound check
    int cohomology_points = 100;
};

struct SimulateSection {
    long long budget = 10000000;
    double t_max = 10.0;
    double t_step = 0.5;
    CorrelationMode mode = CorrelationMode::ensemble;
    std::size_t streams = 64;
    InducedRoof roof = InducedRoof::birkhoff;
    Bump u = default_bump();
    Bump v = default_bump();

    static Bump default_bump() { return Bump{0.75, 1.0, 1.6, 0.2, 0.8, 1.5, 1.0, Space::sigma_r}; }
    std::vector<double> t_grid() const;
};

struct RunSection {
    std::uint64_t seed = 42;
    std::optional<unsigned> threads;
    std::string out_dir = ".";
};

struct RunConfig {
    FamilySection family;
    MeasureSection measure;
    VerifySection verify;
    SimulateSection simulate;
    RunSection run;

    MapFamily make_family() const;
    unsigned thread_count() const { return run.threads.value_or(default_threads()); }
    double sigma(const MapFamily& fam) const { return verify.sigma.value_or(fam.constants().default_sigma()); }
    RoofConfig roof_config() const { return RoofConfig{verify.y_prime, verify.truncation_N}; }
};

// Throws ConfigError naming the line and key on any problem.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

// Helpers shared with the command-line layer.
std::vector<int> parse_int_list(const std::string& text, const std::string& what);
OmegaSequence parse_omega(const std::string& text, const OmegaSequence& fallback);

}  // namespace hypmix
