#include "doctest.h"
#include "subid/simdata.hpp"
#include "subid/ssmodel.hpp"
#include "support.hpp"

using namespace subid;
using testsupport::randn;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

SsModel scalar_model(double a, double b = 1.0, double c = 1.0, double d = 0.0) {
    return SsModel{scalar(a), scalar(b), scalar(c), scalar(d), std::nullopt};
}

NoiseSpec scalar_noise(double q, double r, double s = 0.0) { return NoiseSpec{scalar(q), scalar(r), scalar(s)}; }

// Scalar Riccati fixed point by plain iteration, written out independently.
std::pair<double, double> scalar_riccati_oracle(double a, double c, double q, double r, double s) {
    double p = 1.0;
    for (int i = 0; i < 100000; ++i) {
        const double next = a * p * a + q - (s + a * p * c) * (s + a * p * c) / (r + c * p * c);
        if (std::abs(next - p) < 1e-16) {
            p = next;
            break;
        }
        p = next;
    }
    return {p, (s + a * p * c) / (r + c * p * c)};
}

NoiseSpec random_noise(Index nx, Index ny, std::mt19937_64& g) {
    const Matrix f = randn(nx + ny, nx + ny, g);
    const Matrix j = 0.1 * f * f.transpose() + 0.05 * Matrix::Identity(nx + ny, nx + ny);
    return NoiseSpec{j.bottomRightCorner(nx, nx), j.topLeftCorner(ny, ny), j.bottomLeftCorner(nx, ny)};
}

}  // namespace

TEST_CASE("SsModel validation and similarity") {
    SsModel m = scalar_model(0.5);
    CHECK_NOTHROW(m.validate());
    m.D = Matrix::Zero(2, 1);
    CHECK_THROWS_AS(m.validate(), Error);
    m = scalar_model(0.5);
    m.A(0, 0) = std::nan("");
    CHECK_THROWS_AS(m.validate(), Error);

    std::mt19937_64 g(1);
    SsModel r = testsupport::random_system(3, 2, 2, g);
    r.K = randn(3, 2, g);
    const Matrix t = testsupport::random_invertible(3, g);
    const SsModel s = r.similarity(t);
    CHECK((s.C * s.A * s.B - r.C * r.A * r.B).norm() < 1e-10);
    CHECK((s.C * (*s.K) - r.C * (*r.K)).norm() < 1e-10);
}

TEST_CASE("NoiseSpec validation") {
    CHECK_NOTHROW(scalar_noise(0.1, 1.0).validate(1, 1));
    CHECK_THROWS_AS(scalar_noise(0.1, 0.0).validate(1, 1), Error);
    CHECK_THROWS_AS(scalar_noise(0.1, 1.0, 5.0).validate(1, 1), Error);
    CHECK_THROWS_AS(scalar_noise(0.1, 1.0).validate(2, 1), Error);
    const NoiseSpec inn = NoiseSpec::from_innovation(scalar(0.5), scalar(0.09));
    CHECK(inn.Q(0, 0) == doctest::Approx(0.0225));
    CHECK(inn.S(0, 0) == doctest::Approx(0.045));
    CHECK_NOTHROW(inn.validate(1, 1));
}

TEST_CASE("check_structure") {
    SUBCASE("scalar") {
        const StructureReport r = check_structure(scalar_model(0.5));
        CHECK(r.stable);
        CHECK(r.observable);
        CHECK(r.controllable);
        CHECK(r.minimal);
        CHECK_FALSE(r.minphase.has_value());
    }
    SUBCASE("decoupled invisible state") {
        SsModel m{0.5 * Matrix::Identity(2, 2), Matrix::Ones(2, 1), Matrix(1, 2), Matrix::Zero(1, 1), std::nullopt};
        m.C << 1.0, 0.0;
        CHECK_FALSE(check_structure(m).observable);
    }
    SUBCASE("unstable") { CHECK_FALSE(check_structure(scalar_model(1.1)).stable); }
    SUBCASE("noise makes an input-free state controllable") {
        SsModel m = scalar_model(0.5, 0.0);
        CHECK_FALSE(check_structure(m).controllable);
        const NoiseSpec n = scalar_noise(0.1, 1.0);
        CHECK(check_structure(m, &n).controllable);
    }
    SUBCASE("minimum phase flag") {
        SsModel m = scalar_model(0.9);
        m.K = scalar(0.5);
        CHECK(check_structure(m).minphase.value());
        m.K = scalar(2.0);
        CHECK_FALSE(check_structure(m).minphase.value());
    }
}

TEST_CASE("riccati_solve") {
    SUBCASE("zero process noise") {
        const RiccatiSolution s = riccati_solve(scalar_model(0.5), scalar_noise(0.0, 1.0));
        CHECK(std::abs(s.P(0, 0)) < 1e-12);
        CHECK(std::abs(s.K(0, 0)) < 1e-12);
    }
    SUBCASE("memoryless state") {
        const RiccatiSolution s = riccati_solve(scalar_model(0.0), scalar_noise(0.3, 2.0));
        CHECK(s.P(0, 0) == doctest::Approx(0.3).epsilon(1e-12));
        CHECK(std::abs(s.K(0, 0)) < 1e-14);
    }
    SUBCASE("scalar fixed point oracle") {
        const auto [p, k] = scalar_riccati_oracle(0.9, 1.0, 0.01, 0.1, 0.0);
        const RiccatiSolution s = riccati_solve(scalar_model(0.9), scalar_noise(0.01, 0.1));
        CHECK(std::abs(s.P(0, 0) - p) < 1e-10);
        CHECK(std::abs(s.K(0, 0) - k) < 1e-10);
    }
    SUBCASE("correlated noise oracle") {
        const auto [p, k] = scalar_riccati_oracle(0.7, 2.0, 0.2, 0.5, 0.1);
        const RiccatiSolution s = riccati_solve(scalar_model(0.7, 1.0, 2.0), scalar_noise(0.2, 0.5, 0.1));
        CHECK(std::abs(s.P(0, 0) - p) < 1e-10);
        CHECK(std::abs(s.K(0, 0) - k) < 1e-10);
    }
    SUBCASE("innovation covariances return the generating gain") {
        SsModel m = testsupport::innovation_benchmark();
        const NoiseSpec n = NoiseSpec::from_innovation(*m.K, scalar(0.3));
        const RiccatiSolution s = riccati_solve(m, n);
        CHECK((s.K - *m.K).norm() < 1e-8);
    }
    SUBCASE("random systems: fixed point with stable predictor") {
        std::mt19937_64 g(2);
        for (int trial = 0; trial < 15; ++trial) {
            const SsModel m = testsupport::random_system(3, 1, 2, g);
            const NoiseSpec n = random_noise(3, 2, g);
            const RiccatiSolution s = riccati_solve(m, n);
            const Matrix cross = n.S + m.A * s.P * m.C.transpose();
            const Matrix innov = n.R + m.C * s.P * m.C.transpose();
            const Matrix next = m.A * s.P * m.A.transpose() + n.Q - cross * innov.inverse() * cross.transpose();
            CHECK((next - s.P).norm() < 1e-10 * std::max(1.0, s.P.norm()));
            CHECK((s.K - cross * innov.inverse()).norm() < 1e-10 * std::max(1.0, s.K.norm()));
            CHECK(spectral_radius(m.A - s.K * m.C) < 1.0);
            Eigen::SelfAdjointEigenSolver<Matrix> eig(s.P);
            CHECK(eig.eigenvalues().minCoeff() > -1e-12);
        }
    }
    SUBCASE("divergence is reported") {
        RiccatiOptions o;
        o.max_iter = 3;
        try {
            (void)riccati_solve(scalar_model(0.99), scalar_noise(1.0, 1.0), o);
            FAIL("expected RiccatiDivergence");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::RiccatiDivergence);
        }
    }
}

TEST_CASE("predictor and observer-predictor forms") {
    SsModel m = scalar_model(0.9);
    CHECK_THROWS_AS(to_predictor(m), Error);
    m.K = scalar(0.0);
    CHECK(to_predictor(m).Atil == m.A);
    CHECK(to_predictor(m).Btil == m.B);
    m.K = scalar(0.5);
    CHECK(to_predictor(m).Atil(0, 0) == doctest::Approx(0.4));

    std::mt19937_64 g(3);
    SsModel r = testsupport::random_system(3, 2, 2, g);
    r.K = randn(3, 2, g);
    const PredictorModel p = to_predictor(r);
    CHECK((p.Atil + p.K * p.C - r.A).norm() < 1e-14);
    CHECK((p.Btil + p.K * p.D - r.B).norm() < 1e-14);
    const Matrix lambda = randn(3, 2, g);
    const ObserverPredictorModel o = to_observer_predictor(r, lambda);
    CHECK((o.Abrv + lambda * o.C - r.A).norm() < 1e-14);
    CHECK((o.Bbrv + lambda * o.D - r.B).norm() < 1e-14);
    CHECK(o.K == *r.K);
    CHECK_THROWS_AS(to_observer_predictor(r, randn(2, 2, g)), Error);

    SUBCASE("innovation and predictor simulations agree") {
        const Index N = 200;
        const Matrix u = randn(2, N, g);
        const Matrix e = randn(2, N, g);
        const Matrix y = simulate_with_noise(r, u, e, (*r.K) * e, Vector()).data.Y;
        Vector x = Vector::Zero(3);
        Matrix yp(2, N);
        for (Index t = 0; t < N; ++t) {
            yp.col(t) = p.C * x + p.D * u.col(t) + e.col(t);
            x = p.Atil * x + p.Btil * u.col(t) + p.K * yp.col(t);
        }
        CHECK((y - yp).norm() < 1e-12 * y.norm());
    }
}

TEST_CASE("deadbeat_gain") {
    SUBCASE("scalar") { CHECK(deadbeat_gain(scalar_model(0.7))(0, 0) == doctest::Approx(0.7)); }
    SUBCASE("already nilpotent") {
        Matrix a(2, 2);
        a << 0, 1, 0, 0;
        Matrix c(1, 2);
        c << 1, 0;
        const SsModel m{a, Matrix::Ones(2, 1), c, Matrix::Zero(1, 1), std::nullopt};
        CHECK(deadbeat_gain(m).norm() < 1e-14);
    }
    SUBCASE("random 3-state: characteristic polynomial z^3") {
        std::mt19937_64 g(4);
        for (int trial = 0; trial < 10; ++trial) {
            const SsModel m = testsupport::random_system(3, 1, 1, g);
            const Matrix lambda = deadbeat_gain(m);
            const Matrix ab = m.A - lambda * m.C;
            // Coefficients of det(zI - ab) = z^3 - tr z^2 + c1 z - det.
            const double tr = ab.trace();
            const double c1 = 0.5 * (tr * tr - (ab * ab).trace());
            const double scale = std::pow(m.A.norm(), 3);
            CHECK(std::abs(tr) < 1e-8 * m.A.norm());
            CHECK(std::abs(c1) < 1e-8 * m.A.squaredNorm());
            CHECK(std::abs(ab.determinant()) < 1e-8 * scale);
            CHECK((ab * ab * ab).norm() < 1e-6 * scale);
        }
    }
    SUBCASE("errors") {
        SsModel m = scalar_model(0.5);
        m.C = Matrix::Ones(2, 1);
        m.D = Matrix::Zero(2, 1);
        CHECK_THROWS_AS(deadbeat_gain(m), Error);
        SsModel u{0.5 * Matrix::Identity(2, 2), Matrix::Ones(2, 1), Matrix(1, 2), Matrix::Zero(1, 1), std::nullopt};
        u.C << 1.0, 0.0;
        try {
            (void)deadbeat_gain(u);
            FAIL("expected NotObservable");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::NotObservable);
        }
    }
}

TEST_CASE("kalman_predict") {
    std::mt19937_64 g(5);
    SUBCASE("noise-free data with exact initial state") {
        const SsModel m = testsupport::random_system(3, 2, 1, g);
        const Vector x0 = randn(3, 1, g).col(0);
        const Simulation sim = simulate_open(m, randn(2, 50, g), x0);
        const NoiseSpec n{Matrix::Zero(3, 3), Matrix::Identity(1, 1), Matrix::Zero(3, 1)};
        const KalmanRun run = kalman_predict(m, n, sim.data.U, sim.data.Y, x0, Matrix::Zero(3, 3));
        CHECK((run.xhat - sim.X).norm() < 1e-10 * sim.X.norm());
        for (const auto& k : run.gains) CHECK(k.norm() == 0.0);
    }
    SUBCASE("zero innovation reduces to simulation") {
        const SsModel m = testsupport::random_system(2, 1, 1, g);
        const Vector x0 = randn(2, 1, g).col(0);
        const Simulation sim = simulate_open(m, randn(1, 30, g), x0);
        const KalmanRun run = kalman_predict(m, random_noise(2, 1, g), sim.data.U, sim.data.Y, x0,
                                             Matrix::Identity(2, 2));
        CHECK((run.xhat - sim.X).norm() < 1e-10 * sim.X.norm());
    }
    SUBCASE("gain converges to the Riccati gain") {
        const SsModel m = scalar_model(0.9);
        const NoiseSpec n = scalar_noise(0.01, 0.1);
        const Matrix y = randn(1, 400, g);
        const KalmanRun run = kalman_predict(m, n, randn(1, 400, g), y, Vector::Zero(1), scalar(1.0));
        const RiccatiSolution s = riccati_solve(m, n);
        CHECK(std::abs(run.gains.back()(0, 0) - s.K(0, 0)) < 1e-8);
        CHECK(run.covariances.size() == 401);
    }
    SUBCASE("singular innovation covariance") {
        const SsModel m{scalar(0.5), scalar(1.0), Matrix::Ones(2, 1), Matrix::Zero(2, 1), std::nullopt};
        const NoiseSpec n{scalar(0.0), Matrix::Ones(2, 2), Matrix::Zero(1, 2)};
        CHECK_THROWS_AS(kalman_predict(m, n, Matrix::Zero(1, 3), Matrix::Zero(2, 3), Vector::Zero(1), scalar(0.0)),
                        Error);
    }
}

TEST_CASE("kf_data_form matches the recursive filter") {
    std::mt19937_64 g(6);
    SUBCASE("t = 0 returns the initial estimate") {
        const SsModel m = scalar_model(0.5);
        const Vector x0 = Vector::Constant(1, 0.3);
        CHECK(kf_data_form(m, {}, x0, Matrix::Zero(1, 2), Matrix::Zero(1, 2), 0) == x0);
    }
    SUBCASE("zero gains give the open-loop rollout") {
        const SsModel m = testsupport::random_system(2, 1, 1, g);
        const Matrix u = randn(1, 6, g);
        const Vector x0 = randn(2, 1, g).col(0);
        const std::vector<Matrix> gains(6, Matrix::Zero(2, 1));
        const Vector x = kf_data_form(m, gains, x0, u, randn(1, 6, g), 6);
        Vector rollout = x0;
        for (Index t = 0; t < 6; ++t) rollout = m.A * rollout + m.B * u.col(t);
        CHECK((x - rollout).norm() < 1e-12);
    }
    SUBCASE("random instances, every t") {
        for (int trial = 0; trial < 5; ++trial) {
            const SsModel m = testsupport::random_system(3, 2, 2, g);
            const NoiseSpec n = random_noise(3, 2, g);
            const Index N = 12;
            const Matrix u = randn(2, N, g);
            const Matrix y = randn(2, N, g);
            const Vector x0 = randn(3, 1, g).col(0);
            const KalmanRun run = kalman_predict(m, n, u, y, x0, Matrix::Identity(3, 3));
            for (Index t = 0; t <= N; ++t) {
                const Vector x = kf_data_form(m, run.gains, x0, u, y, t);
                CHECK((x - run.xhat.col(t)).norm() < 1e-9 * std::max(1.0, x.norm()));
            }
        }
    }
    SUBCASE("t beyond the data") {
        const SsModel m = scalar_model(0.5);
        CHECK_THROWS_AS(kf_data_form(m, {}, Vector::Zero(1), Matrix::Zero(1, 2), Matrix::Zero(1, 2), 3), Error);
    }
}

TEST_CASE("exact_state_deterministic") {
    std::mt19937_64 g(7);
    SUBCASE("zero input and state") {
        const SsModel m = testsupport::random_system(2, 1, 1, g);
        CHECK(exact_state_deterministic(m, Matrix::Zero(1, 10), Matrix::Zero(1, 10), 5).norm() == 0.0);
    }
    SUBCASE("scalar impulse") {
        const SsModel m = scalar_model(0.5);
        Matrix u = Matrix::Zero(1, 5);
        u(0, 0) = 1.0;
        const Simulation sim = simulate_open(m, u);
        CHECK(sim.X(0, 3) == doctest::Approx(0.25));
        CHECK(exact_state_deterministic(m, u, sim.data.Y, 3)(0) == doctest::Approx(0.25).epsilon(1e-12));
    }
    SUBCASE("random observable SISO") {
        for (int trial = 0; trial < 5; ++trial) {
            const SsModel m = testsupport::random_system(3, 1, 1, g);
            const Simulation sim = simulate_open(m, randn(1, 40, g), randn(3, 1, g).col(0));
            double worst = 0.0;
            for (Index t = 3; t <= 40; ++t) {
                const Vector x = exact_state_deterministic(m, sim.data.U, sim.data.Y, t);
                worst = std::max(worst, (x - sim.X.col(t)).norm() / std::max(1.0, sim.X.col(t).norm()));
            }
            CHECK(worst < 1e-9);
        }
    }
    SUBCASE("singular leading block") {
        SsModel m{0.5 * Matrix::Identity(2, 2), Matrix::Ones(2, 1), Matrix::Ones(2, 2), Matrix::Zero(2, 1),
                  std::nullopt};
        try {
            (void)exact_state_deterministic(m, Matrix::Zero(1, 5), Matrix::Zero(2, 5), 3);
            FAIL("expected LeadingBlockSingular");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::LeadingBlockSingular);
        }
    }
    SUBCASE("window too short") {
        CHECK_THROWS_AS(exact_state_deterministic(scalar_model(0.5), Matrix::Zero(1, 5), Matrix::Zero(1, 5), 0),
                        Error);
    }
}

TEST_CASE("matrix_power") {
    Matrix a(2, 2);
    a << 1, 1, 0, 1;
    Matrix expected(2, 2);
    expected << 1, 3, 0, 1;
    CHECK(matrix_power(a, 3) == expected);
    CHECK(matrix_power(a, 0) == Matrix::Identity(2, 2));
}
