#include "subid/simdata.hpp"

#include <random>
#include <string>

namespace subid {

namespace {

// Independent stream per (seed, purpose).
std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

Matrix standard_normal(Index rows, Index cols, std::mt19937_64& eng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Matrix out(rows, cols);
    // Fill column by column so a sample's channels are drawn together.
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) out(i, j) = dist(eng);
    return out;
}

constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kR1Stream = 2;
constexpr std::uint64_t kR2Stream = 3;
constexpr std::uint64_t kExcitationStream = 4;

}  // namespace

void DataSet::validate() const {
    if (U.cols() != Y.cols()) {
        throw Error(ErrorKind::BadShape, "U has " + std::to_string(U.cols()) + " samples, Y has " +
                                             std::to_string(Y.cols()));
    }
    require_finite(U, "U");
    require_finite(Y, "Y");
}

Matrix gen_excitation(const ExcitationSpec& spec, Index n_channels, Index n_samples,
                      std::uint64_t seed) {
    if (spec.amplitude < 0.0) throw Error(ErrorKind::Precondition, "amplitude must be >= 0");
    Matrix out = Matrix::Zero(n_channels, n_samples);
    auto eng = make_engine(seed, kExcitationStream);
    switch (spec.kind) {
        case ExcitationKind::Zero:
            break;
        case ExcitationKind::WhiteGaussian:
            out = spec.amplitude * standard_normal(n_channels, n_samples, eng);
            break;
        case ExcitationKind::BinarySwitching: {
            if (spec.switch_period < 1) throw Error(ErrorKind::Precondition, "switch_period must be >= 1");
            std::bernoulli_distribution coin(0.5);
            for (Index i = 0; i < n_channels; ++i) {
                double level = spec.amplitude;
                for (Index t = 0; t < n_samples; ++t) {
                    if (t % spec.switch_period == 0) level = coin(eng) ? spec.amplitude : -spec.amplitude;
                    out(i, t) = level;
                }
            }
            break;
        }
    }
    return out;
}

NoiseDraw gen_noise(const NoiseSpec& noise, Index n_samples, std::uint64_t seed) {
    const Index ny = noise.R.rows();
    const Index nx = noise.Q.rows();
    noise.validate(nx, ny);
    const Matrix root = sym_sqrt(noise.joint());
    auto eng = make_engine(seed, kNoiseStream);
    const Matrix joint = root * standard_normal(ny + nx, n_samples, eng);
    return NoiseDraw{joint.topRows(ny), joint.bottomRows(nx)};
}

Simulation simulate_with_noise(const SsModel& m, const Matrix& u, const Matrix& V,
                               const Matrix& W, const Vector& x0) {
    m.validate();
    const Index N = u.cols();
    const Index n = m.n_x();
    if (u.rows() != m.n_u()) throw Error(ErrorKind::BadShape, "input has wrong channel count");
    const bool has_v = V.size() > 0;
    const bool has_w = W.size() > 0;
    if (has_v && (V.rows() != m.n_y() || V.cols() != N)) throw Error(ErrorKind::BadShape, "V shape");
    if (has_w && (W.rows() != n || W.cols() != N)) throw Error(ErrorKind::BadShape, "W shape");
    if (x0.size() != 0 && x0.size() != n) throw Error(ErrorKind::BadShape, "x0 has wrong length");

    Simulation sim;
    sim.X.resize(n, N + 1);
    sim.X.col(0) = x0.size() ? x0 : Vector::Zero(n);
    sim.data.U = u;
    sim.data.Y.resize(m.n_y(), N);
    for (Index t = 0; t < N; ++t) {
        Vector y = m.C * sim.X.col(t) + m.D * u.col(t);
        if (has_v) y += V.col(t);
        sim.data.Y.col(t) = y;
        Vector x = m.A * sim.X.col(t) + m.B * u.col(t);
        if (has_w) x += W.col(t);
        sim.X.col(t + 1) = x;
    }
    sim.V = has_v ? V : Matrix::Zero(m.n_y(), N);
    sim.W = has_w ? W : Matrix::Zero(n, N);
    sim.unstable_warning = N > 10000 && n > 0 && spectral_radius(m.A) >= 1.0;
    return sim;
}

Simulation simulate_open(const SsModel& m, const Matrix& u, const Vector& x0) {
    return simulate_with_noise(m, u, Matrix(), Matrix(), x0);
}

Simulation simulate_open(const SsModel& m, const NoiseSpec& noise, const Matrix& u,
                         std::uint64_t seed, const Vector& x0) {
    m.validate();
    noise.validate(m.n_x(), m.n_y());
    const NoiseDraw draw = gen_noise(noise, u.cols(), seed);
    Simulation sim = simulate_with_noise(m, u, draw.V, draw.W, x0);
    sim.data.seed = seed;
    return sim;
}

Simulation simulate_innovation(const SsModel& m, const Matrix& Re, const Matrix& u,
                               std::uint64_t seed, const Vector& x0) {
    if (!m.K) throw Error(ErrorKind::MissingGain, "innovation simulation needs K");
    m.validate();
    if (Re.rows() != m.n_y() || Re.cols() != m.n_y()) throw Error(ErrorKind::BadShape, "Re shape");
    auto eng = make_engine(seed, kNoiseStream);
    const Matrix e = sym_sqrt(Re) * standard_normal(m.n_y(), u.cols(), eng);
    Simulation sim = simulate_with_noise(m, u, e, (*m.K) * e, x0);
    sim.data.seed = seed;
    return sim;
}

Simulation simulate_experiment(const SsModel& m, const OpenExperiment& exp, Index n_samples,
                               std::uint64_t seed) {
    const Matrix u = gen_excitation(exp.input, m.n_u(), n_samples, seed);
    if (exp.innovation_cov) return simulate_innovation(m, *exp.innovation_cov, u, seed);
    if (exp.noise) return simulate_open(m, *exp.noise, u, seed);
    Simulation sim = simulate_open(m, u);
    sim.data.seed = seed;
    return sim;
}

bool is_zero_noise(const NoiseSpec& n) {
    const auto zero = [](const Matrix& m) { return m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0; };
    return zero(n.Q) && zero(n.R) && zero(n.S);
}

Matrix LoopSpec::loop_matrix() const {
    const Index n = plant.n_x();
    const Index nc = controller.n_x();
    Matrix a(n + nc, n + nc);
    a.topLeftCorner(n, n) = plant.A - plant.B * controller.D * plant.C;
    a.topRightCorner(n, nc) = plant.B * controller.C;
    a.bottomLeftCorner(nc, n) = -controller.B * plant.C;
    a.bottomRightCorner(nc, nc) = controller.A;
    return a;
}

void LoopSpec::validate() const {
    try {
        plant.validate();
        controller.validate();
        if (!is_zero_noise(noise)) noise.validate(plant.n_x(), plant.n_y());
    } catch (const Error& e) {
        throw Error(ErrorKind::BadLoopSpec, e.what());
    }
    if (controller.n_u() != plant.n_y() || controller.n_y() != plant.n_u()) {
        throw Error(ErrorKind::BadLoopSpec, "controller must map n_y plant outputs to n_u plant inputs");
    }
    if (plant.D.size() > 0 && plant.D.cwiseAbs().maxCoeff() != 0.0) {
        throw Error(ErrorKind::BadLoopSpec, "plant D must be zero under feedback");
    }
    if (r1.amplitude < 0.0 || r2.amplitude < 0.0) {
        throw Error(ErrorKind::BadLoopSpec, "excitation amplitude must be >= 0");
    }
    const Matrix a = loop_matrix();
    if (a.size() > 0 && spectral_radius(a) >= 1.0) {
        throw Error(ErrorKind::BadLoopSpec,
                    "closed loop is not asymptotically stable (spectral radius " +
                        std::to_string(spectral_radius(a)) + ")");
    }
}

ClosedLoopRun simulate_closed(const LoopSpec& loop, Index n_samples, std::uint64_t seed) {
    loop.validate();
    const SsModel& p = loop.plant;
    const SsModel& c = loop.controller;
    const Index n = p.n_x();
    const Index nc = c.n_x();

    ClosedLoopRun run;
    if (is_zero_noise(loop.noise)) {
        run.V = Matrix::Zero(p.n_y(), n_samples);
        run.W = Matrix::Zero(n, n_samples);
    } else {
        const NoiseDraw draw = gen_noise(loop.noise, n_samples, seed);
        run.V = draw.V;
        run.W = draw.W;
    }
    run.R1 = gen_excitation(loop.r1, p.n_y(), n_samples, seed ^ kR1Stream);
    run.R2 = gen_excitation(loop.r2, p.n_u(), n_samples, seed ^ (kR2Stream << 1));
    run.X = Matrix::Zero(n, n_samples + 1);
    run.Xc = Matrix::Zero(nc, n_samples + 1);
    run.data.U.resize(p.n_u(), n_samples);
    run.data.Y.resize(p.n_y(), n_samples);
    for (Index t = 0; t < n_samples; ++t) {
        const Vector y = p.C * run.X.col(t) + run.V.col(t);
        const Vector err = run.R1.col(t) - y;
        const Vector u = c.C * run.Xc.col(t) + c.D * err + run.R2.col(t);
        run.data.Y.col(t) = y;
        run.data.U.col(t) = u;
        run.X.col(t + 1) = p.A * run.X.col(t) + p.B * u + run.W.col(t);
        run.Xc.col(t + 1) = c.A * run.Xc.col(t) + c.B * err;
    }
    run.data.seed = seed;
    run.data.closed_loop = true;
    return run;
}

}  // namespace subid
