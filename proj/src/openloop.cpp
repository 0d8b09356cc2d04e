#include "subid/openloop.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "subid/stacking.hpp"

namespace subid {

namespace {

Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
    Matrix out(top.rows() + bottom.rows(), top.cols());
    out << top, bottom;
    return out;
}

template <typename Fn>
auto staged(const std::string& stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        throw e.with_stage(stage);
    }
}

void require_full_input_rank(const RegressionBlocks& b) {
    if (b.Uf.rows() == 0) return;
    const Index r = numerical_rank(b.Uf);
    if (r < b.Uf.rows()) {
        throw Error(ErrorKind::RankDeficientRegressors,
                    "future input block rank deficient by " + std::to_string(b.Uf.rows() - r));
    }
}

void flag_deficiency(const LstsqResult& ls, const char* what, std::vector<std::string>& flags) {
    if (ls.rank_deficient()) {
        flags.push_back(std::string(what) + " rank deficient by " + std::to_string(ls.deficiency));
    }
}

// Replace every sub-diagonal of a block lower-triangular matrix by its block average.
Matrix toeplitz_average(const Matrix& h, Index f, Index n_y, Index n_u) {
    std::vector<Matrix> blocks;
    for (Index k = 0; k < f; ++k) {
        Matrix acc = Matrix::Zero(n_y, n_u);
        for (Index i = k; i < f; ++i) acc += h.block(i * n_y, (i - k) * n_u, n_y, n_u);
        blocks.push_back(acc / static_cast<double>(f - k));
    }
    return toeplitz_from_blocks(blocks, f);
}

Matrix zp_weighted_state_map(const RankReduction& rr) {
    Matrix omega = rr.Ss.cwiseSqrt().asDiagonal() * rr.Vs.transpose();
    if (rr.Wr_inv.size() > 0) omega = omega * rr.Wr_inv;
    return omega;
}

double data_equation_residual(const RegressionBlocks& b, const SubspaceEstimate& est) {
    if (est.H) return (b.Yf - est.L * b.Zp - (*est.H) * b.Uf).norm();
    const Matrix y = project_out_rows(b.Yf, b.Uf);
    const Matrix z = project_out_rows(b.Zp, b.Uf);
    return (y - est.L * z).norm();
}

}  // namespace

std::string to_string(OlAlgorithm a) {
    switch (a) {
        case OlAlgorithm::OlsJoint: return "ols-joint";
        case OlAlgorithm::OlsProjected: return "ols-projected";
        case OlAlgorithm::MoespRq: return "moesp-rq";
        case OlAlgorithm::ClsVectorized: return "cls-vec";
        case OlAlgorithm::ClsTwostep: return "cls-2step";
        case OlAlgorithm::ClsCausal: return "cls-causal";
    }
    return "unknown";
}

RegressionBlocks build_regression(const DataSet& data, Index p, Index f) {
    data.validate();
    if (p < 1 || f < 1) throw Error(ErrorKind::Precondition, "p and f must be at least 1");
    const Index N = data.n_samples();
    if (N < p + f) {
        throw Error(ErrorKind::BadWindow, "need at least p + f = " + std::to_string(p + f) +
                                              " samples, got " + std::to_string(N));
    }
    RegressionBlocks b;
    b.p = p;
    b.f = f;
    b.M = N - p - f + 1;
    b.n_u = data.n_u();
    b.n_y = data.n_y();
    const Matrix z = stack_rows(data.Y, data.U);
    b.Zp = hankel(z, p, b.M, p, Direction::Past).data;
    b.Yf = hankel(data.Y, f, b.M, p, Direction::Future).data;
    b.Uf = hankel(data.U, f, b.M, p, Direction::Future).data;
    return b;
}

SubspaceEstimate ols_joint(const RegressionBlocks& b, double rcond) {
    require_full_input_rank(b);
    const LstsqResult ls = lstsq_rows(b.Yf, stack_rows(b.Zp, b.Uf), rcond);
    SubspaceEstimate est;
    est.L = ls.theta.leftCols(b.Zp.rows());
    est.H = ls.theta.rightCols(b.Uf.rows());
    flag_deficiency(ls, "[Zp; Uf]", est.flags);
    return est;
}

SubspaceEstimate ols_projected(const RegressionBlocks& b, double rcond) {
    require_full_input_rank(b);
    const Matrix y = project_out_rows(b.Yf, b.Uf, rcond);
    const Matrix z = project_out_rows(b.Zp, b.Uf, rcond);
    const LstsqResult ls = lstsq_rows(y, z, rcond);
    SubspaceEstimate est;
    est.L = ls.theta;
    flag_deficiency(ls, "projected Zp", est.flags);
    return est;
}

MoespFactors moesp_rq(const RegressionBlocks& b, double rcond) {
    const Index a = b.Uf.rows();
    const Index zr = b.Zp.rows();
    const Index yr = b.Yf.rows();
    if (a + zr + yr > b.M) {
        throw Error(ErrorKind::BadWindow, "RQ needs at least " + std::to_string(a + zr + yr) +
                                              " columns, got " + std::to_string(b.M));
    }
    Matrix stacked(a + zr + yr, b.M);
    stacked << b.Uf, b.Zp, b.Yf;
    const RqResult f = rq(stacked);
    MoespFactors out;
    out.R32 = f.r.block(a + zr, a, yr, zr);
    out.Q2 = f.q.middleRows(a, zr);
    const Matrix r22 = f.r.block(a, a, zr, zr);
    out.Lhat = out.R32 * pinv(r22, rcond);
    const SvdResult s = svd(out.R32);
    Index rank = 0;
    for (Index i = 0; i < s.S.size(); ++i)
        if (s.S(i) > rcond * s.S(0)) ++rank;
    out.Lhat_basis = s.U.leftCols(rank);
    return out;
}

Matrix oblique_projection(const RegressionBlocks& b, double rcond) {
    const Matrix y = project_out_rows(b.Yf, b.Uf, rcond);
    const Matrix z = project_out_rows(b.Zp, b.Uf, rcond);
    const Index r = numerical_rank(z);
    if (r < z.rows()) {
        throw Error(ErrorKind::RankDeficientRegressors,
                    "Zp projected off Uf is rank deficient by " + std::to_string(z.rows() - r));
    }
    const Matrix gram = z * z.transpose();
    return (y * z.transpose()) * pinv(gram, rcond) * b.Zp;
}

SubspaceEstimate cls_vectorized(const RegressionBlocks& b, double rcond) {
    require_full_input_rank(b);
    const Index f = b.f;
    const Index ny = b.n_y;
    const Index nu = b.n_u;
    SubspaceEstimate est;
    const Matrix y = project_out_rows(b.Yf, b.Zp, rcond);
    const Matrix u = project_out_rows(b.Uf, b.Zp, rcond);
    const Index n_theta = ny * nu * f;
    Matrix h = Matrix::Zero(ny * f, nu * f);
    if (n_theta > 0) {
        const Matrix pi = duplication_selector(f, ny, nu);
        Matrix design(n_theta, y.size());
        for (Index q = 0; q < n_theta; ++q) {
            const Matrix hq = unvec(pi.col(q), ny * f, nu * f);
            design.row(q) = vec(hq * u).transpose();
        }
        const LstsqResult ls = lstsq_rows(vec(y).transpose(), design, rcond);
        flag_deficiency(ls, "Toeplitz design", est.flags);
        h = unvec(pi * ls.theta.transpose(), ny * f, nu * f);
    }
    const LstsqResult lz = lstsq_rows(b.Yf - h * b.Uf, b.Zp, rcond);
    flag_deficiency(lz, "Zp", est.flags);
    est.L = lz.theta;
    est.H = h;
    return est;
}

SubspaceEstimate cls_causal(const RegressionBlocks& b, double rcond) {
    require_full_input_rank(b);
    const Index f = b.f;
    const Index ny = b.n_y;
    const Index nu = b.n_u;
    SubspaceEstimate est;
    est.L.resize(ny * f, b.Zp.rows());
    Matrix h = Matrix::Zero(ny * f, nu * f);
    for (Index i = 0; i < f; ++i) {
        const Matrix reg = stack_rows(b.Zp, b.Uf.topRows((i + 1) * nu));
        const LstsqResult ls = lstsq_rows(b.Yf.middleRows(i * ny, ny), reg, rcond);
        est.L.middleRows(i * ny, ny) = ls.theta.leftCols(b.Zp.rows());
        h.block(i * ny, 0, ny, (i + 1) * nu) = ls.theta.rightCols((i + 1) * nu);
        if (ls.rank_deficient()) {
            est.flags.push_back("block row " + std::to_string(i + 1) + " rank deficient by " +
                                std::to_string(ls.deficiency));
        }
    }
    est.H_raw = h;
    est.H = toeplitz_average(h, f, ny, nu);
    return est;
}

Index auto_order(const Vector& singvals, Index cap) {
    const Index dim = singvals.size();
    if (dim == 0 || !(singvals(0) > 0.0)) {
        throw Error(ErrorKind::DegenerateState, "all singular values are zero");
    }
    if (dim == 1) return 1;
    const double floor = singvals(0) * 1e-15;
    const Index kmax = std::max<Index>(1, std::min(dim - 1, cap));
    Index best = 1;
    double best_ratio = -1.0;
    for (Index k = 1; k <= kmax; ++k) {
        const double ratio = std::max(singvals(k - 1), floor) / std::max(singvals(k), floor);
        if (ratio > best_ratio) {
            best_ratio = ratio;
            best = k;
        }
    }
    return best;
}

RankReduction reduce_rank(const Matrix& L, const RegressionBlocks& b, Weighting weighting,
                          std::optional<Index> order, double rcond) {
    require_finite(L, "L");
    RankReduction rr;
    Matrix weighted = L;
    if (weighting == Weighting::Cca) {
        const Matrix yperp = project_out_rows(b.Yf, b.Uf, rcond);
        const Matrix cov_y = sample_cov(yperp, yperp);
        const Matrix cov_z = sample_cov(b.Zp, b.Zp);
        const Matrix wl = sym_inv_sqrt(cov_y, rcond);
        const Matrix wr = sym_sqrt(cov_z);
        rr.Wl_inv = sym_sqrt(cov_y);
        rr.Wr_inv = sym_inv_sqrt(cov_z, rcond);
        if (numerical_rank(cov_z, rcond) < cov_z.rows()) {
            rr.flags.push_back("W_r singular, pseudo-inverse used");
        }
        weighted = wl * L * wr;
    }
    const SvdResult s = svd(weighted);
    rr.singvals = s.S;
    const Index dim = s.S.size();
    Index n = 0;
    if (order) {
        n = *order;
        if (n < 1 || n > dim) {
            throw Error(ErrorKind::Precondition, "order " + std::to_string(n) +
                                                     " outside [1, " + std::to_string(dim) + "]");
        }
    } else {
        n = auto_order(s.S, 2 * b.p * b.n_y);
    }
    if (!(s.S(0) > 0.0)) throw Error(ErrorKind::DegenerateState, "L is zero");
    if (s.S(n - 1) <= kRankTol * s.S(0)) {
        rr.flags.push_back("order " + std::to_string(n) + " exceeds numerical rank " +
                           std::to_string(numerical_rank(weighted)));
    }
    rr.order_used = n;
    rr.Us = s.U.leftCols(n);
    rr.Ss = s.S.head(n);
    rr.Vs = s.V.leftCols(n);
    return rr;
}

StateExtraction fit_from_states(const Matrix& X, const Matrix& u_cols, const Matrix& y_cols,
                                bool estimate_d, double rcond) {
    const Index M = X.cols();
    if (M < 2) throw Error(ErrorKind::BadWindow, "need at least two state columns");
    if (u_cols.cols() != M || y_cols.cols() != M) {
        throw Error(ErrorKind::BadShape, "state, input and output columns are misaligned");
    }
    const Index n = X.rows();
    const Index nu = u_cols.rows();
    const Matrix x0 = X.leftCols(M - 1);
    const Matrix x1 = X.rightCols(M - 1);
    const Matrix u0 = u_cols.leftCols(M - 1);
    const Matrix y0 = y_cols.leftCols(M - 1);
    const Matrix reg = stack_rows(x0, u0);

    StateExtraction out;
    const LstsqResult ab = lstsq_rows(x1, reg, rcond);
    out.model.A = ab.theta.leftCols(n);
    out.model.B = ab.theta.rightCols(nu);
    if (estimate_d) {
        const LstsqResult cd = lstsq_rows(y0, reg, rcond);
        out.model.C = cd.theta.leftCols(n);
        out.model.D = cd.theta.rightCols(nu);
    } else {
        out.model.C = lstsq_rows(y0, x0, rcond).theta;
        out.model.D = Matrix::Zero(y_cols.rows(), nu);
    }
    out.X = X;
    out.W_res = x1 - out.model.A * x0 - out.model.B * u0;
    out.V_res = y0 - out.model.C * x0 - out.model.D * u0;
    return out;
}

StateExtraction extract_via_state(const RankReduction& rr, const RegressionBlocks& b,
                                  bool estimate_d, double rcond) {
    if (rr.order_used < 1 || rr.Ss.size() == 0 || !(rr.Ss(0) > 0.0)) {
        throw Error(ErrorKind::DegenerateState, "no nonzero singular value to build a state from");
    }
    const Matrix X = zp_weighted_state_map(rr) * b.Zp;
    if (!(X.norm() > 0.0)) throw Error(ErrorKind::DegenerateState, "estimated state sequence is zero");
    return fit_from_states(X, b.Uf.topRows(b.n_u), b.Yf.topRows(b.n_y), estimate_d, rcond);
}

void ac_from_gamma(const Matrix& gamma, Index n_y, Matrix& A, Matrix& C) {
    const Index rows = gamma.rows();
    const Index n = gamma.cols();
    if (n_y < 1 || rows % n_y != 0) throw Error(ErrorKind::BadShape, "Gamma rows not a multiple of n_y");
    const Index f = rows / n_y;
    if (f < 2) throw Error(ErrorKind::Precondition, "observability extraction needs f >= 2");
    if (n > (f - 1) * n_y) {
        throw Error(ErrorKind::Precondition, "order " + std::to_string(n) + " exceeds (f-1) n_y = " +
                                                 std::to_string((f - 1) * n_y));
    }
    C = gamma.topRows(n_y);
    const Matrix upper = gamma.topRows((f - 1) * n_y);
    const Matrix lower = gamma.bottomRows((f - 1) * n_y);
    const SvdResult s = svd(upper);
    if (!(s.S(0) > 0.0) || s.S(n - 1) < 1e-10 * s.S(0)) {
        throw Error(ErrorKind::ShiftSolveIllConditioned, "shifted observability block is singular");
    }
    A = s.V * s.S.cwiseInverse().asDiagonal() * s.U.transpose() * lower;
}

void bd_from_outputs(const Matrix& A, const Matrix& C, const DataSet& data, bool estimate_d,
                     Matrix& B, Matrix& D, double rcond) {
    const Index n = A.rows();
    const Index ny = C.rows();
    const Index nu = data.n_u();
    const Index N = data.n_samples();
    const Index nb = n * nu;
    const Index nd = estimate_d ? ny * nu : 0;
    B = Matrix::Zero(n, nu);
    D = Matrix::Zero(ny, nu);
    if (nb + nd == 0) return;

    // Row q of the design is the vectorised output response to unit parameter q.
    Matrix design = Matrix::Zero(nb + nd, ny * N);
    for (Index k = 0; k < nu; ++k) {
        Matrix phi = Matrix::Zero(n, n);  // sum_{tau < t} A^{t-1-tau} u_k(tau)
        for (Index t = 0; t < N; ++t) {
            const Matrix cphi = C * phi;
            for (Index i = 0; i < n; ++i) design.block(k * n + i, t * ny, 1, ny) = cphi.col(i).transpose();
            phi = A * phi;
            phi.diagonal().array() += data.U(k, t);
        }
        if (estimate_d) {
            for (Index r = 0; r < ny; ++r)
                for (Index t = 0; t < N; ++t) design(nb + k * ny + r, t * ny + r) = data.U(k, t);
        }
    }
    const LstsqResult ls = lstsq_rows(vec(data.Y).transpose(), design, rcond);
    const Vector theta = ls.theta.transpose();
    B = unvec(theta.head(nb), n, nu);
    if (estimate_d) D = unvec(theta.tail(nd), ny, nu);
}

SsModel extract_via_observability(const RankReduction& rr, const RegressionBlocks& b,
                                  const DataSet& data, bool estimate_d, double rcond) {
    if (rr.order_used < 1) throw Error(ErrorKind::DegenerateState, "order must be at least 1");
    Matrix gamma = rr.Us * rr.Ss.cwiseSqrt().asDiagonal();
    if (rr.Wl_inv.size() > 0) gamma = rr.Wl_inv * gamma;
    SsModel m;
    ac_from_gamma(gamma, b.n_y, m.A, m.C);
    bd_from_outputs(m.A, m.C, data, estimate_d, m.B, m.D, rcond);
    return m;
}

GainEstimate estimate_kalman_gain(const SsModel& model, const Matrix& state_residuals,
                                  const Matrix& output_residuals) {
    const Index n = model.n_x();
    if (state_residuals.cols() != output_residuals.cols()) {
        throw Error(ErrorKind::BadShape, "residual matrices are not column aligned");
    }
    if (state_residuals.cols() < 10 * std::max<Index>(n, 1)) {
        throw Error(ErrorKind::Precondition, "too few residual columns for covariance estimation");
    }
    GainEstimate g;
    Matrix q = sample_cov(state_residuals, state_residuals);
    Matrix r = sample_cov(output_residuals, output_residuals);
    g.noise.Q = 0.5 * (q + q.transpose());
    g.noise.R = 0.5 * (r + r.transpose());
    g.noise.S = sample_cov(state_residuals, output_residuals);

    Eigen::SelfAdjointEigenSolver<Matrix> eig(g.noise.R, Eigen::EigenvaluesOnly);
    const double lmax = eig.eigenvalues().size() ? eig.eigenvalues().maxCoeff() : 0.0;
    const double lmin = eig.eigenvalues().size() ? eig.eigenvalues().minCoeff() : 0.0;
    if (!(lmin > default_rcond() * lmax) || !(lmax > 0.0)) {
        double eps = 1e-10 * g.noise.R.trace();
        if (!(eps > 0.0)) eps = 1e-10;
        g.noise.R.diagonal().array() += eps;
        g.flags.push_back("residual output covariance regularized");
    }
    // Joint covariance must stay PSD after the shift; push Q up by the same margin if needed.
    Eigen::SelfAdjointEigenSolver<Matrix> joint(g.noise.joint(), Eigen::EigenvaluesOnly);
    if (joint.eigenvalues().size() && joint.eigenvalues().minCoeff() < -1e-12) {
        g.noise.Q.diagonal().array() += -joint.eigenvalues().minCoeff() * 2.0;
        g.flags.push_back("residual joint covariance regularized");
    }
    SsModel plain = model;
    plain.K.reset();
    g.K = riccati_solve(plain, g.noise).K;
    return g;
}

namespace {

SubspaceEstimate run_algorithm(const RegressionBlocks& b, const DataSet& data,
                               const IdentOptions& opts) {
    switch (opts.algorithm) {
        case OlAlgorithm::OlsJoint: return ols_joint(b, opts.rcond);
        case OlAlgorithm::OlsProjected: return ols_projected(b, opts.rcond);
        case OlAlgorithm::MoespRq: {
            SubspaceEstimate est;
            est.L = moesp_rq(b, opts.rcond).Lhat;
            return est;
        }
        case OlAlgorithm::ClsVectorized: return cls_vectorized(b, opts.rcond);
        case OlAlgorithm::ClsTwostep: return cls_twostep(b, data, opts);
        case OlAlgorithm::ClsCausal: return cls_causal(b, opts.rcond);
    }
    throw Error(ErrorKind::Unsupported, "unknown algorithm");
}

struct Extracted {
    SsModel model;
    Matrix W_res;
    Matrix V_res;
};

Extracted extract(const RankReduction& rr, const RegressionBlocks& b, const DataSet& data,
                  const IdentOptions& opts) {
    if (opts.extraction == Extraction::State) {
        StateExtraction se = extract_via_state(rr, b, true, opts.rcond);
        return {se.model, se.W_res, se.V_res};
    }
    Extracted out;
    out.model = extract_via_observability(rr, b, data, true, opts.rcond);
    const Matrix X = zp_weighted_state_map(rr) * b.Zp;
    const Index M = X.cols();
    const Matrix u0 = b.Uf.topRows(b.n_u).leftCols(M - 1);
    const Matrix y0 = b.Yf.topRows(b.n_y).leftCols(M - 1);
    const Matrix& m = out.model.A;
    out.W_res = X.rightCols(M - 1) - m * X.leftCols(M - 1) - out.model.B * u0;
    out.V_res = y0 - out.model.C * X.leftCols(M - 1) - out.model.D * u0;
    return out;
}

}  // namespace

SubspaceEstimate cls_twostep(const RegressionBlocks& b, const DataSet& data,
                             const IdentOptions& opts) {
    SubspaceEstimate est = ols_joint(b, opts.rcond);
    est.residual_trace.push_back(data_equation_residual(b, est));
    for (int it = 1; it <= opts.twostep_iters; ++it) {
        const std::string stage = "cls-2step iteration " + std::to_string(it);
        staged(stage, [&] {
            const RankReduction rr = reduce_rank(est.L, b, opts.weighting, opts.order, opts.rcond);
            const SsModel m = extract(rr, b, data, opts).model;
            const Matrix h = toeplitz_h(m.A, m.B, m.C, m.D, b.f);
            const LstsqResult ls = lstsq_rows(b.Yf - h * b.Uf, b.Zp, opts.rcond);
            est.L = ls.theta;
            est.H = h;
            return 0;
        });
        est.residual_trace.push_back(data_equation_residual(b, est));
    }
    return est;
}

IdentResult identify_ol(const DataSet& data, const IdentOptions& opts) {
    const RegressionBlocks b = staged("regression", [&] { return build_regression(data, opts.p, opts.f); });
    const std::string name = to_string(opts.algorithm);
    const SubspaceEstimate est = staged(name, [&] { return run_algorithm(b, data, opts); });
    const RankReduction rr = staged("rank reduction", [&] {
        return reduce_rank(est.L, b, opts.weighting, opts.order, opts.rcond);
    });
    Extracted ex = staged("extraction", [&] { return extract(rr, b, data, opts); });

    IdentResult res;
    res.algorithm = name;
    res.p = opts.p;
    res.f = opts.f;
    res.order = rr.order_used;
    res.singular_values = rr.singvals;
    res.residual_trace = est.residual_trace;
    res.rank_flags = est.flags;
    res.rank_flags.insert(res.rank_flags.end(), rr.flags.begin(), rr.flags.end());
    res.residual_fro = data_equation_residual(b, est);
    if (opts.estimate_gain) {
        try {
            GainEstimate g = estimate_kalman_gain(ex.model, ex.W_res, ex.V_res);
            ex.model.K = g.K;
            res.noise = g.noise;
            res.rank_flags.insert(res.rank_flags.end(), g.flags.begin(), g.flags.end());
        } catch (const Error& e) {
            res.rank_flags.push_back(std::string("gain estimation skipped: ") + e.what());
        }
    }
    res.model = ex.model;
    return res;
}

}  // namespace subid
