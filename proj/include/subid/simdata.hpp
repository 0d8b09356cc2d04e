#pragma once

#include <cstdint>
#include <optional>

#include "subid/ssmodel.hpp"

namespace subid {

struct DataSet {
    Matrix U;  // n_u x N
    Matrix Y;  // n_y x N
    double sample_period = 1.0;
    std::optional<std::uint64_t> seed;
    bool closed_loop = false;

    [[nodiscard]] Index n_samples() const { return Y.cols(); }
    [[nodiscard]] Index n_u() const { return U.rows(); }
    [[nodiscard]] Index n_y() const { return Y.rows(); }
    void validate() const;
};

enum class ExcitationKind { WhiteGaussian, BinarySwitching, Zero };

struct ExcitationSpec {
    ExcitationKind kind = ExcitationKind::Zero;
    double amplitude = 0.0;
    Index switch_period = 1;  // binary only
};

// n_channels x n_samples excitation, deterministic in seed.
Matrix gen_excitation(const ExcitationSpec& spec, Index n_channels, Index n_samples,
                      std::uint64_t seed);

struct NoiseDraw {
    Matrix V;  // measurement noise, n_y x N
    Matrix W;  // process noise, n_x x N
};

// Jointly Gaussian (v, w) with covariance NoiseSpec::joint().
NoiseDraw gen_noise(const NoiseSpec& noise, Index n_samples, std::uint64_t seed);

struct Simulation {
    DataSet data;
    Matrix X;  // n_x x (N+1) true states
    Matrix V;  // measurement noise (innovation sequence in innovation mode)
    Matrix W;  // process noise as it enters the state recursion
    bool unstable_warning = false;
};

// x(t+1) = A x + B u + w(t), y(t) = C x + D u + v(t) with explicit noise sequences.
// Empty V / W mean zero noise.
Simulation simulate_with_noise(const SsModel& m, const Matrix& u, const Matrix& V,
                               const Matrix& W, const Vector& x0);

// Noise-free rollout from x0 (zero when empty).
Simulation simulate_open(const SsModel& m, const Matrix& u, const Vector& x0 = {});

// Process form with noise drawn from NoiseSpec.
Simulation simulate_open(const SsModel& m, const NoiseSpec& noise, const Matrix& u,
                         std::uint64_t seed, const Vector& x0 = {});

// Innovation form: e ~ N(0, Re), w = K e, v = e. Requires m.K.
Simulation simulate_innovation(const SsModel& m, const Matrix& Re, const Matrix& u,
                               std::uint64_t seed, const Vector& x0 = {});

// Open-loop experiment: excitation input plus optional process or innovation noise.
struct OpenExperiment {
    ExcitationSpec input{ExcitationKind::WhiteGaussian, 1.0, 1};
    std::optional<NoiseSpec> noise;
    std::optional<Matrix> innovation_cov;  // takes precedence over noise; needs K
};

Simulation simulate_experiment(const SsModel& m, const OpenExperiment& exp, Index n_samples,
                               std::uint64_t seed);

// All-zero covariance blocks; a loop with such noise is simulated noise-free.
bool is_zero_noise(const NoiseSpec& n);

struct LoopSpec {
    SsModel plant;       // D must be exactly zero
    SsModel controller;  // input r1 - y, output added to r2
    NoiseSpec noise;
    ExcitationSpec r1;
    ExcitationSpec r2;

    // State matrix of [x; xc] for the noise-free loop.
    [[nodiscard]] Matrix loop_matrix() const;
    // Throws BadLoopSpec on dimension mismatch, nonzero plant D or an unstable loop.
    // An all-zero noise block is accepted as a noise-free loop.
    void validate() const;
};

struct ClosedLoopRun {
    DataSet data;
    Matrix X;   // plant states, n_x x (N+1)
    Matrix Xc;  // controller states
    Matrix V;
    Matrix W;
    Matrix R1;
    Matrix R2;
};

ClosedLoopRun simulate_closed(const LoopSpec& loop, Index n_samples, std::uint64_t seed);

}  // namespace subid
