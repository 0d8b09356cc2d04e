#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "subid/error.hpp"

namespace subid {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Relative truncation threshold used wherever a pseudo-inverse or rank decision
// appears. 1e-12 unless SUBID_RCOND is set in the environment.
double default_rcond();

// Threshold for structural rank tests (observability, controllability).
inline constexpr double kRankTol = 1e-8;

struct SvdResult {
    Matrix U;  // m x k, orthonormal columns
    Vector S;  // k singular values, non-increasing
    Matrix V;  // n x k, orthonormal columns
};

struct RqResult {
    Matrix r;  // rows(m) x rows(m), lower-triangular
    Matrix q;  // rows(m) x cols(m), orthonormal rows
};

struct LstsqResult {
    Matrix theta;
    Index rank = 0;
    Index deficiency = 0;  // rows(regressors) - rank
    [[nodiscard]] bool rank_deficient() const { return deficiency > 0; }
};

// Thin SVD, k = min(rows, cols).
SvdResult svd(const Matrix& m);

// m = r * q with r lower-triangular and q having orthonormal rows.
// Requires rows(m) <= cols(m).
RqResult rq(const Matrix& m);

// Solves min_theta ||target - theta * regressors||_F. Directions of the regressor
// row space with singular value below rcond * sigma_max are dropped, which gives
// the minimum-norm solution on rank-deficient problems.
LstsqResult lstsq_rows(const Matrix& target, const Matrix& regressors,
                       double rcond = default_rcond());

Matrix pinv(const Matrix& m, double rcond = default_rcond());

// W with W m W = I on the numerically nonzero eigenspace of a symmetric PSD m.
Matrix sym_inv_sqrt(const Matrix& m, double rcond = default_rcond());

// Symmetric square root, negative eigenvalues clipped at zero.
Matrix sym_sqrt(const Matrix& m);

std::vector<std::complex<double>> eigvals(const Matrix& m);

double spectral_radius(const Matrix& m);

// Number of singular values above rel_tol * sigma_max.
Index numerical_rank(const Matrix& m, double rel_tol = kRankTol);

// Principal angles (radians, ascending) between the column spaces of a and b.
// Both inputs are orthonormalised first; rank is taken at default_rcond().
Vector principal_angles(const Matrix& a, const Matrix& b);

// Explicit I - u^T (u u^T)^+ u. Only meant for small column counts.
Matrix orth_complement_projector(const Matrix& u);

// Residual of the row-space regression of m on basis: m - (m basis^+) basis.
Matrix project_out_rows(const Matrix& m, const Matrix& basis,
                        double rcond = default_rcond());

bool all_finite(const Matrix& m);
void require_finite(const Matrix& m, const char* what);

// Sample covariance a b^T / cols, normalised by the column count.
Matrix sample_cov(const Matrix& a, const Matrix& b);

// Column-major vectorisation and its inverse.
Vector vec(const Matrix& m);
Matrix unvec(const Vector& v, Index rows, Index cols);

}  // namespace subid
