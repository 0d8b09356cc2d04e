#pragma once

#include <optional>
#include <vector>

#include "subid/numerics.hpp"

namespace subid {

// x(t+1) = A x(t) + B u(t) [+ K e(t)],  y(t) = C x(t) + D u(t) [+ e(t)]
struct SsModel {
    Matrix A;
    Matrix B;
    Matrix C;
    Matrix D;
    std::optional<Matrix> K;

    [[nodiscard]] Index n_x() const { return A.rows(); }
    [[nodiscard]] Index n_u() const { return B.cols(); }
    [[nodiscard]] Index n_y() const { return C.rows(); }

    // Throws BadShape / NumericalFailure when the blocks are inconsistent or non-finite.
    void validate() const;

    // State change x -> T x.
    [[nodiscard]] SsModel similarity(const Matrix& T) const;
};

// Joint covariance of (v, w): [[R, S^T], [S, Q]].
struct NoiseSpec {
    Matrix Q;  // n_x x n_x
    Matrix R;  // n_y x n_y
    Matrix S;  // n_x x n_y

    [[nodiscard]] Matrix joint() const;
    // R symmetric positive definite; joint block PSD within 1e-10.
    void validate(Index n_x, Index n_y) const;
    // Covariances induced by an innovation model: w = K e, v = e, cov(e) = Re.
    static NoiseSpec from_innovation(const Matrix& K, const Matrix& Re);
};

struct PredictorModel {
    Matrix Atil;  // A - K C
    Matrix Btil;  // B - K D
    Matrix K;
    Matrix C;
    Matrix D;
};

struct ObserverPredictorModel {
    Matrix Abrv;  // A - Lambda C
    Matrix Bbrv;  // B - Lambda D
    Matrix Lambda;
    Matrix K;
    Matrix C;
    Matrix D;
};

struct StructureReport {
    bool stable = false;
    bool observable = false;
    bool controllable = false;
    bool minimal = false;
    std::optional<bool> minphase;
};

StructureReport check_structure(const SsModel& m, const NoiseSpec* noise = nullptr);

struct RiccatiSolution {
    Matrix P;
    Matrix K;
    int iters = 0;
};

struct RiccatiOptions {
    std::optional<Matrix> p0;  // identity when absent
    double tol = 1e-13;
    int max_iter = 200000;
};

// Fixed-point iteration of the prediction Riccati recursion until
// ||P_{k+1} - P_k||_F < tol * max(||P_k||_F, ||Q||_F, ||R||_F).
RiccatiSolution riccati_solve(const SsModel& m, const NoiseSpec& noise,
                              const RiccatiOptions& opts = {});

PredictorModel to_predictor(const SsModel& m);
ObserverPredictorModel to_observer_predictor(const SsModel& m, const Matrix& lambda);

// Observer gain placing every eigenvalue of A - Lambda C at the origin. Single-output only.
Matrix deadbeat_gain(const SsModel& m);

struct KalmanRun {
    Matrix xhat;                // n_x x (N+1); column t is the prediction of x(t)
    std::vector<Matrix> gains;  // K(t), t = 0..N-1
    std::vector<Matrix> covariances;  // P(t), t = 0..N
};

// Prediction-only Kalman filter with time-varying gain.
KalmanRun kalman_predict(const SsModel& m, const NoiseSpec& noise, const Matrix& u,
                         const Matrix& y, const Vector& x0, const Matrix& p0);

// Closed-form evaluation of the filter state at time t as a linear combination of
// the initial estimate and the first t samples of u and y.
Vector kf_data_form(const SsModel& m, const std::vector<Matrix>& gains, const Vector& x0hat,
                    const Matrix& u, const Matrix& y, Index t);

// Exact state of a noise-free system from its last n_x input/output samples.
Vector exact_state_deterministic(const SsModel& m, const Matrix& u, const Matrix& y, Index t);

// Power of a square matrix by repeated multiplication.
Matrix matrix_power(const Matrix& a, Index k);

}  // namespace subid
