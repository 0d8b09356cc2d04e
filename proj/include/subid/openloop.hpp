#pragma once

#include <optional>
#include <string>
#include <vector>

#include "subid/simdata.hpp"
#include "subid/ssmodel.hpp"

namespace subid {

// Column j of every block refers to the present time t = p + j.
struct RegressionBlocks {
    Matrix Yf;  // n_y f x M
    Matrix Zp;  // (n_y + n_u) p x M, z(t) = [y(t); u(t)], oldest lag first
    Matrix Uf;  // n_u f x M
    Index p = 0;
    Index f = 0;
    Index M = 0;
    Index n_u = 0;
    Index n_y = 0;
};

RegressionBlocks build_regression(const DataSet& data, Index p, Index f);

enum class OlAlgorithm { OlsJoint, OlsProjected, MoespRq, ClsVectorized, ClsTwostep, ClsCausal };
enum class Extraction { State, Observability };
enum class Weighting { Identity, Cca };

struct IdentOptions {
    Index p = 5;
    Index f = 5;
    std::optional<Index> order;  // empty selects the order automatically
    OlAlgorithm algorithm = OlAlgorithm::OlsProjected;
    Extraction extraction = Extraction::State;
    Weighting weighting = Weighting::Identity;
    double rcond = default_rcond();
    int twostep_iters = 3;
    bool estimate_gain = true;
};

struct SubspaceEstimate {
    Matrix L;                 // n_y f x (n_u + n_y) p
    std::optional<Matrix> H;  // n_y f x n_u f
    std::optional<Matrix> H_raw;  // causal estimate before Toeplitz averaging
    std::vector<double> residual_trace;  // two-step iterations
    std::vector<std::string> flags;
};

struct RankReduction {
    Matrix Us;
    Vector Ss;
    Matrix Vs;
    Index order_used = 0;
    Vector singvals;
    Matrix Wl_inv;  // maps the weighted column space back: Gamma = Wl_inv Us Ss^{1/2}
    Matrix Wr_inv;  // Omega = Ss^{1/2} Vs^T Wr_inv
    std::vector<std::string> flags;
};

struct MoespFactors {
    Matrix R32;
    Matrix Q2;
    Matrix Lhat;        // R32 R22^+
    Matrix Lhat_basis;  // left singular vectors of R32 spanning its column space
};

struct GainEstimate {
    NoiseSpec noise;
    std::optional<Matrix> K;
    std::vector<std::string> flags;
};

struct StateExtraction {
    SsModel model;
    Matrix X;          // estimated states, n x M
    Matrix W_res;      // state residuals, n x (M-1)
    Matrix V_res;      // output residuals, n_y x (M-1)
};

struct IdentResult {
    SsModel model;
    Index order = 0;
    Vector singular_values;
    std::string algorithm;
    Index p = 0;
    Index f = 0;
    double residual_fro = 0.0;
    std::vector<std::string> rank_flags;
    std::optional<NoiseSpec> noise;
    std::vector<double> residual_trace;
};

SubspaceEstimate ols_joint(const RegressionBlocks& b, double rcond = default_rcond());
SubspaceEstimate ols_projected(const RegressionBlocks& b, double rcond = default_rcond());
MoespFactors moesp_rq(const RegressionBlocks& b, double rcond = default_rcond());
Matrix oblique_projection(const RegressionBlocks& b, double rcond = default_rcond());
SubspaceEstimate cls_vectorized(const RegressionBlocks& b, double rcond = default_rcond());
SubspaceEstimate cls_twostep(const RegressionBlocks& b, const DataSet& data,
                             const IdentOptions& opts);
SubspaceEstimate cls_causal(const RegressionBlocks& b, double rcond = default_rcond());

// Auto order: largest gap s[k]/s[k+1], k+1 <= min(dim - 1, cap); ties resolve to the smaller order.
Index auto_order(const Vector& singvals, Index cap);

RankReduction reduce_rank(const Matrix& L, const RegressionBlocks& b, Weighting weighting,
                          std::optional<Index> order, double rcond = default_rcond());

// Joint least squares of [X(t+1); y(t)] on [X(t); u(t)] over consecutive columns.
// X holds the state estimate at the times of the columns of u_cols / y_cols.
StateExtraction fit_from_states(const Matrix& X, const Matrix& u_cols, const Matrix& y_cols,
                                bool estimate_d, double rcond = default_rcond());

StateExtraction extract_via_state(const RankReduction& rr, const RegressionBlocks& b,
                                  bool estimate_d = true, double rcond = default_rcond());

// Gamma -> (A, C) by shift invariance.
void ac_from_gamma(const Matrix& gamma, Index n_y, Matrix& A, Matrix& C);

// B and D from the output regression with zero initial state.
void bd_from_outputs(const Matrix& A, const Matrix& C, const DataSet& data, bool estimate_d,
                     Matrix& B, Matrix& D, double rcond = default_rcond());

SsModel extract_via_observability(const RankReduction& rr, const RegressionBlocks& b,
                                  const DataSet& data, bool estimate_d = true,
                                  double rcond = default_rcond());

GainEstimate estimate_kalman_gain(const SsModel& model, const Matrix& state_residuals,
                                  const Matrix& output_residuals);

IdentResult identify_ol(const DataSet& data, const IdentOptions& opts);

std::string to_string(OlAlgorithm a);

}  // namespace subid
