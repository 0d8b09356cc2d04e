#include "subid/ssmodel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "subid/stacking.hpp"

namespace subid {

namespace {

std::string dims(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void expect_shape(const Matrix& m, Index rows, Index cols, const char* name) {
    if (m.rows() != rows || m.cols() != cols) {
        throw Error(ErrorKind::BadShape, std::string(name) + " is " + dims(m) + ", expected " +
                                             std::to_string(rows) + "x" + std::to_string(cols));
    }
}

// Solve X * M = rhs for X with M symmetric positive definite.
Matrix right_solve_spd(const Matrix& rhs, const Matrix& M, const char* what) {
    Eigen::LLT<Matrix> llt(0.5 * (M + M.transpose()));
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::NumericalFailure, std::string(what) + " is not positive definite");
    }
    return llt.solve(rhs.transpose()).transpose();
}

}  // namespace

void SsModel::validate() const {
    const Index n = A.rows();
    if (A.cols() != n) throw Error(ErrorKind::BadShape, "A must be square, got " + dims(A));
    if (B.rows() != n) throw Error(ErrorKind::BadShape, "B has " + dims(B) + " but n_x = " + std::to_string(n));
    if (C.cols() != n) throw Error(ErrorKind::BadShape, "C has " + dims(C) + " but n_x = " + std::to_string(n));
    expect_shape(D, C.rows(), B.cols(), "D");
    if (K) expect_shape(*K, n, C.rows(), "K");
    require_finite(A, "A");
    require_finite(B, "B");
    require_finite(C, "C");
    require_finite(D, "D");
    if (K) require_finite(*K, "K");
}

SsModel SsModel::similarity(const Matrix& T) const {
    Eigen::PartialPivLU<Matrix> lu(T);
    Matrix t_inv = lu.inverse();
    SsModel out{T * A * t_inv, T * B, C * t_inv, D, std::nullopt};
    if (K) out.K = T * (*K);
    return out;
}

Matrix NoiseSpec::joint() const {
    const Index ny = R.rows();
    const Index nx = Q.rows();
    Matrix j(ny + nx, ny + nx);
    j.topLeftCorner(ny, ny) = R;
    j.topRightCorner(ny, nx) = S.transpose();
    j.bottomLeftCorner(nx, ny) = S;
    j.bottomRightCorner(nx, nx) = Q;
    return j;
}

void NoiseSpec::validate(Index n_x, Index n_y) const {
    expect_shape(Q, n_x, n_x, "Q");
    expect_shape(R, n_y, n_y, "R");
    expect_shape(S, n_x, n_y, "S");
    require_finite(joint(), "noise covariance");
    if ((R - R.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, R.cwiseAbs().maxCoeff())) {
        throw Error(ErrorKind::NotPsd, "R is not symmetric");
    }
    Eigen::LLT<Matrix> llt(R);
    if (n_y > 0 && llt.info() != Eigen::Success) {
        throw Error(ErrorKind::NotPsd, "R is not positive definite");
    }
    const Matrix j = joint();
    if ((j - j.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, j.cwiseAbs().maxCoeff())) {
        throw Error(ErrorKind::NotPsd, "joint noise covariance is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (j + j.transpose()), Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-10) {
        throw Error(ErrorKind::NotPsd, "joint noise covariance has eigenvalue " +
                                           std::to_string(eig.eigenvalues().minCoeff()));
    }
}

NoiseSpec NoiseSpec::from_innovation(const Matrix& K, const Matrix& Re) {
    NoiseSpec out;
    out.Q = K * Re * K.transpose();
    out.R = Re;
    out.S = K * Re;
    return out;
}

Matrix matrix_power(const Matrix& a, Index k) {
    Matrix out = Matrix::Identity(a.rows(), a.cols());
    for (Index i = 0; i < k; ++i) out = out * a;
    return out;
}

StructureReport check_structure(const SsModel& m, const NoiseSpec* noise) {
    m.validate();
    StructureReport rep;
    const Index n = m.n_x();
    rep.stable = spectral_radius(m.A) < 1.0 - 1e-10;
    if (n == 0) {
        rep.observable = rep.controllable = rep.minimal = true;
    } else {
        rep.observable = numerical_rank(ext_observability(m.A, m.C, n)) == n;
        Matrix drive = m.B;
        if (noise) {
            noise->validate(n, m.n_y());
            Matrix q_half = sym_sqrt(noise->Q);
            drive.conservativeResize(n, m.n_u() + n);
            drive.rightCols(n) = q_half;
        }
        rep.controllable = drive.cols() > 0 && numerical_rank(ext_controllability(m.A, drive, n)) == n;
        rep.minimal = rep.observable && rep.controllable;
    }
    if (m.K) rep.minphase = spectral_radius(m.A - (*m.K) * m.C) < 1.0;
    return rep;
}

RiccatiSolution riccati_solve(const SsModel& m, const NoiseSpec& noise, const RiccatiOptions& opts) {
    m.validate();
    const Index n = m.n_x();
    noise.validate(n, m.n_y());
    Matrix P = opts.p0 ? *opts.p0 : Matrix::Identity(n, n);
    expect_shape(P, n, n, "P0");

    const double floor = std::max(noise.Q.norm(), noise.R.norm());
    const Matrix& A = m.A;
    const Matrix& C = m.C;
    for (int it = 1; it <= opts.max_iter; ++it) {
        const Matrix cross = noise.S + A * P * C.transpose();
        const Matrix innov = noise.R + C * P * C.transpose();
        const Matrix gain = right_solve_spd(cross, innov, "R + C P C^T");
        Matrix next = A * P * A.transpose() + noise.Q - gain * cross.transpose();
        next = 0.5 * (next + next.transpose());
        require_finite(next, "Riccati iterate");
        const double step = (next - P).norm();
        const double scale = std::max(P.norm(), floor);
        P = std::move(next);
        if (step < opts.tol * scale || step == 0.0) {
            RiccatiSolution sol;
            sol.P = P;
            sol.K = right_solve_spd(noise.S + A * P * C.transpose(),
                                    noise.R + C * P * C.transpose(), "R + C P C^T");
            sol.iters = it;
            return sol;
        }
    }
    throw Error(ErrorKind::RiccatiDivergence,
                "no convergence after " + std::to_string(opts.max_iter) +
                    " iterations; last ||P||_F = " + std::to_string(P.norm()));
}

PredictorModel to_predictor(const SsModel& m) {
    if (!m.K) throw Error(ErrorKind::MissingGain, "predictor form needs a Kalman gain");
    m.validate();
    const Matrix& K = *m.K;
    return PredictorModel{m.A - K * m.C, m.B - K * m.D, K, m.C, m.D};
}

ObserverPredictorModel to_observer_predictor(const SsModel& m, const Matrix& lambda) {
    if (!m.K) throw Error(ErrorKind::MissingGain, "observer-predictor form needs a Kalman gain");
    m.validate();
    expect_shape(lambda, m.n_x(), m.n_y(), "Lambda");
    return ObserverPredictorModel{m.A - lambda * m.C, m.B - lambda * m.D, lambda, *m.K, m.C, m.D};
}

Matrix deadbeat_gain(const SsModel& m) {
    m.validate();
    if (m.n_y() != 1) {
        throw Error(ErrorKind::Unsupported, "deadbeat_gain handles single-output systems only");
    }
    const Index n = m.n_x();
    if (n == 0) return Matrix::Zero(0, 1);
    const Matrix obs = ext_observability(m.A, m.C, n);
    if (numerical_rank(obs) < n) throw Error(ErrorKind::NotObservable, "(A, C) is not observable");
    // Ackermann: Lambda = phi(A) O^{-1} e_n with phi(s) = s^n.
    Vector e_n = Vector::Zero(n);
    e_n(n - 1) = 1.0;
    const Vector col = obs.colPivHouseholderQr().solve(e_n);
    return matrix_power(m.A, n) * col;
}

KalmanRun kalman_predict(const SsModel& m, const NoiseSpec& noise, const Matrix& u,
                         const Matrix& y, const Vector& x0, const Matrix& p0) {
    m.validate();
    const Index n = m.n_x();
    noise.validate(n, m.n_y());
    const Index N = y.cols();
    expect_shape(u, m.n_u(), N, "u");
    expect_shape(y, m.n_y(), N, "y");
    if (x0.size() != n) throw Error(ErrorKind::BadShape, "x0 has wrong length");
    expect_shape(p0, n, n, "P0");

    KalmanRun run;
    run.xhat.resize(n, N + 1);
    run.xhat.col(0) = x0;
    run.gains.reserve(static_cast<std::size_t>(N));
    run.covariances.reserve(static_cast<std::size_t>(N + 1));
    Matrix P = p0;
    run.covariances.push_back(P);
    for (Index t = 0; t < N; ++t) {
        const Matrix cross = noise.S + m.A * P * m.C.transpose();
        const Matrix innov = noise.R + m.C * P * m.C.transpose();
        Eigen::LDLT<Matrix> ldlt(innov);
        if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14) {
            throw Error(ErrorKind::NumericalFailure,
                        "R + C P C^T is singular at t = " + std::to_string(t));
        }
        const Matrix gain = ldlt.solve(cross.transpose()).transpose();
        const Vector x = run.xhat.col(t);
        const Vector innovation = y.col(t) - m.C * x - m.D * u.col(t);
        run.xhat.col(t + 1) = m.A * x + m.B * u.col(t) + gain * innovation;
        Matrix next = m.A * P * m.A.transpose() + noise.Q - gain * cross.transpose();
        P = 0.5 * (next + next.transpose());
        run.gains.push_back(gain);
        run.covariances.push_back(P);
    }
    return run;
}

Vector kf_data_form(const SsModel& m, const std::vector<Matrix>& gains, const Vector& x0hat,
                    const Matrix& u, const Matrix& y, Index t) {
    m.validate();
    if (t == 0) return x0hat;
    if (t > y.cols() || t > static_cast<Index>(gains.size())) {
        throw Error(ErrorKind::BadWindow, "kf_data_form: t beyond available data or gains");
    }
    const Index n = m.n_x();
    const Index ny = m.n_y();
    // Delta_0 is an empty n_x x 0 block.
    Matrix delta(n, 0);
    for (Index k = 1; k <= t; ++k) {
        const Matrix& gain = gains[static_cast<std::size_t>(k - 1)];
        Matrix next(n, k * ny);
        next.leftCols((k - 1) * ny) = (m.A - gain * m.C) * delta;
        next.rightCols(ny) = gain;
        delta = std::move(next);
    }
    const Matrix gamma = ext_observability(m.A, m.C, t);
    const Matrix omega = ext_controllability(m.A, m.B, t);
    const Matrix toep = toeplitz_h(m.A, m.B, m.C, m.D, t);
    const Vector y_past = past_stack(y, t, t);
    Vector out = (matrix_power(m.A, t) - delta * gamma) * x0hat + delta * y_past;
    if (m.n_u() > 0) out += (omega - delta * toep) * past_stack(u, t, t);
    return out;
}

Vector exact_state_deterministic(const SsModel& m, const Matrix& u, const Matrix& y, Index t) {
    m.validate();
    const Index n = m.n_x();
    if (n == 0) return Vector::Zero(0);
    if (t < n) throw Error(ErrorKind::BadWindow, "exact state needs t >= n_x");
    if (t > y.cols()) throw Error(ErrorKind::BadWindow, "t beyond the data record");

    const Matrix gamma = ext_observability(m.A, m.C, n);
    const Matrix lead = gamma.topRows(n);
    Eigen::FullPivLU<Matrix> lu(lead);
    if (!lu.isInvertible() || numerical_rank(lead) < n) {
        throw Error(ErrorKind::LeadingBlockSingular,
                    "first n_x rows of the observability matrix are singular");
    }
    Vector y_rows = past_stack(y, t, n).head(n);
    Vector x_past;
    if (m.n_u() > 0) {
        const Vector u_past = past_stack(u, t, n);
        const Matrix toep = toeplitz_h(m.A, m.B, m.C, m.D, n);
        x_past = lu.solve(y_rows - toep.topRows(n) * u_past);
        return matrix_power(m.A, n) * x_past + ext_controllability(m.A, m.B, n) * u_past;
    }
    x_past = lu.solve(y_rows);
    return matrix_power(m.A, n) * x_past;
}

}  // namespace subid
