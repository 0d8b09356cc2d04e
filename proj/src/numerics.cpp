#include "subid/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

namespace subid {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::NumericalFailure: return "NumericalFailure";
        case ErrorKind::BadShape: return "BadShape";
        case ErrorKind::NotPsd: return "NotPsd";
        case ErrorKind::RiccatiDivergence: return "RiccatiDivergence";
        case ErrorKind::MissingGain: return "MissingGain";
        case ErrorKind::Unsupported: return "Unsupported";
        case ErrorKind::NotObservable: return "NotObservable";
        case ErrorKind::LeadingBlockSingular: return "LeadingBlockSingular";
        case ErrorKind::BadWindow: return "BadWindow";
        case ErrorKind::RankDeficientRegressors: return "RankDeficientRegressors";
        case ErrorKind::DegenerateState: return "DegenerateState";
        case ErrorKind::ShiftSolveIllConditioned: return "ShiftSolveIllConditioned";
        case ErrorKind::NeedDeeperVarx: return "NeedDeeperVarx";
        case ErrorKind::BadLoopSpec: return "BadLoopSpec";
        case ErrorKind::Precondition: return "Precondition";
        case ErrorKind::Parse: return "Parse";
    }
    return "Unknown";
}

double default_rcond() {
    static const double value = [] {
        if (const char* env = std::getenv("SUBID_RCOND")) {
            char* end = nullptr;
            const double parsed = std::strtod(env, &end);
            if (end != env && std::isfinite(parsed) && parsed > 0.0) return parsed;
        }
        return 1e-12;
    }();
    return value;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) {
        throw Error(ErrorKind::NumericalFailure, std::string(what) + " contains NaN or Inf");
    }
}

SvdResult svd(const Matrix& m) {
    require_finite(m, "svd input");
    SvdResult out;
    if (m.size() == 0) {
        out.U = Matrix::Zero(m.rows(), 0);
        out.S = Vector::Zero(0);
        out.V = Matrix::Zero(m.cols(), 0);
        return out;
    }
    // Jacobi is slow but exact to working precision; only switch to the
    // divide-and-conquer solver when both sides are large.
    if (std::min(m.rows(), m.cols()) <= 64) {
        Eigen::JacobiSVD<Matrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        out.U = solver.matrixU();
        out.S = solver.singularValues();
        out.V = solver.matrixV();
    } else {
        Eigen::BDCSVD<Matrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (solver.info() != Eigen::Success) {
            throw Error(ErrorKind::NumericalFailure, "SVD did not converge");
        }
        out.U = solver.matrixU();
        out.S = solver.singularValues();
        out.V = solver.matrixV();
    }
    if (!out.U.allFinite() || !out.S.allFinite() || !out.V.allFinite()) {
        throw Error(ErrorKind::NumericalFailure, "SVD produced non-finite factors");
    }
    return out;
}

RqResult rq(const Matrix& m) {
    if (m.rows() > m.cols()) {
        throw Error(ErrorKind::BadShape, "rq requires rows <= cols, got " +
                                             std::to_string(m.rows()) + "x" +
                                             std::to_string(m.cols()));
    }
    require_finite(m, "rq input");
    const Index n = m.rows();
    RqResult out;
    if (n == 0) {
        out.r = Matrix::Zero(0, 0);
        out.q = Matrix::Zero(0, m.cols());
        return out;
    }
    // m^T = Q R  =>  m = R^T Q^T, R^T lower-triangular.
    Eigen::HouseholderQR<Matrix> qr(m.transpose());
    Matrix thin_q = qr.householderQ() * Matrix::Identity(m.cols(), n);
    Matrix r = qr.matrixQR().topLeftCorner(n, n).triangularView<Eigen::Upper>();
    out.r = r.transpose();
    out.q = thin_q.transpose();
    for (Index k = 0; k < n; ++k) {
        if (out.r(k, k) < 0.0) {
            out.r.col(k) *= -1.0;
            out.q.row(k) *= -1.0;
        }
    }
    return out;
}

LstsqResult lstsq_rows(const Matrix& target, const Matrix& regressors, double rcond) {
    if (target.cols() != regressors.cols()) {
        throw Error(ErrorKind::BadShape, "lstsq_rows: target has " +
                                             std::to_string(target.cols()) +
                                             " columns, regressors " +
                                             std::to_string(regressors.cols()));
    }
    require_finite(target, "lstsq target");
    require_finite(regressors, "lstsq regressors");

    const Index q = regressors.rows();
    const Index samples = regressors.cols();
    LstsqResult out;
    out.theta = Matrix::Zero(target.rows(), q);
    if (q == 0) return out;

    // Reduce to a q x q problem first when there are more samples than regressors.
    Matrix small;  // q x k, with regressors = small * basis^T
    Matrix projected_target;
    if (samples >= q) {
        Eigen::HouseholderQR<Matrix> qr(regressors.transpose());
        Matrix basis = qr.householderQ() * Matrix::Identity(samples, q);
        small = qr.matrixQR().topLeftCorner(q, q).triangularView<Eigen::Upper>();
        small.transposeInPlace();
        projected_target = target * basis;
    } else {
        small = regressors;
        projected_target = target;
    }

    Eigen::JacobiSVD<Matrix> solver(small, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = solver.singularValues();
    const double smax = s.size() > 0 ? s(0) : 0.0;
    Index rank = 0;
    for (Index i = 0; i < s.size(); ++i) {
        if (smax > 0.0 && s(i) > rcond * smax) ++rank;
    }
    out.rank = rank;
    out.deficiency = q - rank;
    if (rank == 0) return out;

    // theta * small = projected_target  =>  theta = projected_target * small^+
    const Matrix& U = solver.matrixU();
    const Matrix& V = solver.matrixV();
    Matrix inv_s = s.head(rank).cwiseInverse().asDiagonal();
    out.theta = projected_target * V.leftCols(rank) * inv_s * U.leftCols(rank).transpose();
    return out;
}

Matrix pinv(const Matrix& m, double rcond) {
    if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());
    const SvdResult d = svd(m);
    const double smax = d.S.size() > 0 ? d.S(0) : 0.0;
    Matrix out = Matrix::Zero(m.cols(), m.rows());
    for (Index i = 0; i < d.S.size(); ++i) {
        if (smax > 0.0 && d.S(i) > rcond * smax) {
            out.noalias() += (d.V.col(i) / d.S(i)) * d.U.col(i).transpose();
        }
    }
    return out;
}

namespace {

Eigen::SelfAdjointEigenSolver<Matrix> checked_symmetric_eig(const Matrix& m, const char* who) {
    if (m.rows() != m.cols()) {
        throw Error(ErrorKind::BadShape, std::string(who) + " requires a square matrix");
    }
    require_finite(m, who);
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw Error(ErrorKind::NotPsd, std::string(who) + ": matrix is not symmetric");
    }
    Matrix sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    if (eig.info() != Eigen::Success) {
        throw Error(ErrorKind::NumericalFailure, std::string(who) + ": eigensolver failed");
    }
    return eig;
}

}  // namespace

Matrix sym_inv_sqrt(const Matrix& m, double rcond) {
    if (m.size() == 0) return m;
    auto eig = checked_symmetric_eig(m, "sym_inv_sqrt");
    const Vector& lambda = eig.eigenvalues();
    const double lmax = lambda.cwiseAbs().maxCoeff();
    if (lambda.minCoeff() < -1e-10 * std::max(lmax, 1e-300)) {
        throw Error(ErrorKind::NotPsd, "sym_inv_sqrt: eigenvalue " +
                                           std::to_string(lambda.minCoeff()) +
                                           " is negative");
    }
    Vector d = Vector::Zero(lambda.size());
    for (Index i = 0; i < lambda.size(); ++i) {
        if (lmax > 0.0 && lambda(i) > rcond * lmax) d(i) = 1.0 / std::sqrt(lambda(i));
    }
    const Matrix& W = eig.eigenvectors();
    return W * d.asDiagonal() * W.transpose();
}

Matrix sym_sqrt(const Matrix& m) {
    if (m.size() == 0) return m;
    auto eig = checked_symmetric_eig(m, "sym_sqrt");
    Vector d = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Matrix& W = eig.eigenvectors();
    return W * d.asDiagonal() * W.transpose();
}

std::vector<std::complex<double>> eigvals(const Matrix& m) {
    if (m.rows() != m.cols()) throw Error(ErrorKind::BadShape, "eigvals requires a square matrix");
    require_finite(m, "eigvals input");
    std::vector<std::complex<double>> out;
    if (m.size() == 0) return out;
    Eigen::EigenSolver<Matrix> solver(m, false);
    if (solver.info() != Eigen::Success) {
        throw Error(ErrorKind::NumericalFailure, "eigenvalue iteration did not converge");
    }
    const auto& ev = solver.eigenvalues();
    out.reserve(static_cast<std::size_t>(ev.size()));
    for (Index i = 0; i < ev.size(); ++i) out.push_back(ev(i));
    return out;
}

double spectral_radius(const Matrix& m) {
    double r = 0.0;
    for (const auto& z : eigvals(m)) r = std::max(r, std::abs(z));
    return r;
}

Index numerical_rank(const Matrix& m, double rel_tol) {
    if (m.size() == 0) return 0;
    const SvdResult d = svd(m);
    if (d.S.size() == 0 || d.S(0) == 0.0) return 0;
    Index r = 0;
    for (Index i = 0; i < d.S.size(); ++i) {
        if (d.S(i) > rel_tol * d.S(0)) ++r;
    }
    return r;
}

namespace {

Matrix orthonormal_basis(const Matrix& a) {
    const SvdResult d = svd(a);
    const Index r = [&] {
        if (d.S.size() == 0 || d.S(0) == 0.0) return Index{0};
        Index k = 0;
        for (Index i = 0; i < d.S.size(); ++i) {
            if (d.S(i) > default_rcond() * d.S(0)) ++k;
        }
        return k;
    }();
    return d.U.leftCols(r);
}

}  // namespace

Vector principal_angles(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw Error(ErrorKind::BadShape, "principal_angles: row mismatch");
    Matrix qa = orthonormal_basis(a);
    Matrix qb = orthonormal_basis(b);
    if (qb.cols() > qa.cols()) std::swap(qa, qb);
    if (qb.cols() == 0) return Vector::Zero(0);
    // Sines of the angles are the singular values of the part of the smaller
    // basis that lies outside the larger subspace; accurate for tiny angles.
    Matrix residual = qb - qa * (qa.transpose() * qb);
    Vector s = svd(residual).S;
    Vector angles(s.size());
    for (Index i = 0; i < s.size(); ++i) angles(i) = std::asin(std::min(1.0, s(i)));
    std::sort(angles.data(), angles.data() + angles.size());
    return angles;
}

Matrix orth_complement_projector(const Matrix& u) {
    const Index m = u.cols();
    Matrix gram_inv = pinv(u * u.transpose());
    return Matrix::Identity(m, m) - u.transpose() * gram_inv * u;
}

Matrix project_out_rows(const Matrix& m, const Matrix& basis, double rcond) {
    if (basis.rows() == 0) return m;
    const LstsqResult fit = lstsq_rows(m, basis, rcond);
    return m - fit.theta * basis;
}

Matrix sample_cov(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw Error(ErrorKind::BadShape, "sample_cov: column mismatch");
    if (a.cols() == 0) return Matrix::Zero(a.rows(), b.rows());
    return (a * b.transpose()) / static_cast<double>(a.cols());
}

Vector vec(const Matrix& m) {
    return Eigen::Map<const Vector>(m.data(), m.size());
}

Matrix unvec(const Vector& v, Index rows, Index cols) {
    if (v.size() != rows * cols) throw Error(ErrorKind::BadShape, "unvec: size mismatch");
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

}  // namespace subid
