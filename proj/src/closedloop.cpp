#include "subid/closedloop.hpp"

#include <string>

#include "subid/stacking.hpp"

namespace subid {

namespace {

template <typename Fn>
auto staged(const std::string& stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        throw e.with_stage(stage);
    }
}

void require_f_le_p(const ClOptions& opts) {
    if (opts.p < 1 || opts.f < 1) throw Error(ErrorKind::Precondition, "p and f must be at least 1");
    if (opts.f > opts.p) throw Error(ErrorKind::Precondition, "f must not exceed p");
}

// Singular covariances are inverted on their range only; the event is flagged.
void flag_singular_cov(const Matrix& m, const char* what, std::vector<std::string>& flags) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
    const Vector& ev = eig.eigenvalues();
    if (ev.size() == 0) return;
    if (ev.minCoeff() > default_rcond() * ev.maxCoeff() && ev.maxCoeff() > 0.0) return;
    flags.push_back(std::string(what) + " singular, pseudo-inverse square root used");
}

Index pick_order(const Vector& s, const ClOptions& opts, Index n_y) {
    if (opts.order) {
        if (*opts.order < 1 || *opts.order > s.size()) {
            throw Error(ErrorKind::Precondition, "order " + std::to_string(*opts.order) +
                                                     " outside [1, " + std::to_string(s.size()) + "]");
        }
        return *opts.order;
    }
    return auto_order(s, 2 * opts.p * n_y);
}

void finish(IdentResult& res, StateExtraction& se, const ClOptions& opts) {
    res.model = se.model;
    res.residual_fro = se.V_res.norm();
    if (!opts.estimate_gain) return;
    try {
        GainEstimate g = estimate_kalman_gain(se.model, se.W_res, se.V_res);
        res.model.K = g.K;
        res.noise = g.noise;
        res.rank_flags.insert(res.rank_flags.end(), g.flags.begin(), g.flags.end());
    } catch (const Error& e) {
        res.rank_flags.push_back(std::string("gain estimation skipped: ") + e.what());
    }
}

void flag_order(const Vector& s, Index n, std::vector<std::string>& flags) {
    if (s.size() > 0 && s(n - 1) <= kRankTol * s(0)) {
        flags.push_back("order " + std::to_string(n) + " exceeds numerical rank");
    }
}

}  // namespace

MarkovSet varx_markov(const DataSet& data, Index ell, bool estimate_d, double rcond) {
    data.validate();
    const Index N = data.n_samples();
    const Index nu = data.n_u();
    const Index ny = data.n_y();
    const Index nz = nu + ny;
    if (ell < 1) throw Error(ErrorKind::Precondition, "VARX depth must be at least 1");
    if (N < nz * ell + nu + 10 || N <= ell) {
        throw Error(ErrorKind::BadWindow, "too few samples for a VARX model of depth " + std::to_string(ell));
    }
    const Index M = N - ell;
    Matrix z(nz, N);
    z << data.Y, data.U;
    const Matrix past = hankel(z, ell, M, ell, Direction::Past).data;
    Matrix reg(past.rows() + (estimate_d ? nu : 0), M);
    reg.topRows(past.rows()) = past;
    if (estimate_d) reg.bottomRows(nu) = data.U.middleCols(ell, M);
    const LstsqResult ls = lstsq_rows(data.Y.middleCols(ell, M), reg, rcond);

    MarkovSet mk;
    mk.ell = ell;
    mk.deficiency = ls.deficiency;
    mk.Gy.resize(static_cast<std::size_t>(ell));
    mk.Gu.resize(static_cast<std::size_t>(ell));
    for (Index j = 0; j < ell; ++j) {
        // Block j multiplies z(t - ell + j), i.e. lag ell - j.
        const auto k = static_cast<std::size_t>(ell - j - 1);
        mk.Gy[k] = ls.theta.block(0, j * nz, ny, ny);
        mk.Gu[k] = ls.theta.block(0, j * nz + ny, ny, nu);
    }
    mk.D = estimate_d ? Matrix(ls.theta.rightCols(nu)) : Matrix::Zero(ny, nu);
    return mk;
}

MarkovSet markov_from_model(const SsModel& m, Index ell) {
    const PredictorModel pm = to_predictor(m);
    MarkovSet mk;
    mk.ell = ell;
    mk.D = m.D;
    Matrix ck = m.C;
    for (Index k = 0; k < ell; ++k) {
        mk.Gu.push_back(ck * pm.Btil);
        mk.Gy.push_back(ck * pm.K);
        ck = ck * pm.Atil;
    }
    return mk;
}

Matrix build_gamma_omega(const MarkovSet& mk, Index p, Index f, bool banded) {
    if (p < 1 || f < 1) throw Error(ErrorKind::Precondition, "p and f must be at least 1");
    if (banded && f > p) throw Error(ErrorKind::Precondition, "f must not exceed p");
    const Index need = banded ? p : f + p - 1;
    if (mk.ell < need || static_cast<Index>(mk.Gu.size()) < need) {
        throw Error(ErrorKind::NeedDeeperVarx, "need Markov depth " + std::to_string(need) +
                                                   ", have " + std::to_string(mk.ell));
    }
    const Index ny = mk.D.rows();
    const Index nu = mk.D.cols();
    const Index nz = ny + nu;
    Matrix out = Matrix::Zero(ny * f, nz * p);
    for (Index i = 0; i < f; ++i) {
        for (Index j = 0; j < p; ++j) {
            const Index e = p - 1 - j + i;
            if (banded && e >= p) continue;
            const auto k = static_cast<std::size_t>(e);
            out.block(i * ny, j * nz, ny, ny) = mk.Gy[k];
            out.block(i * ny, j * nz + ny, ny, nu) = mk.Gu[k];
        }
    }
    return out;
}

IdentResult iem_identify(const DataSet& data, const ClOptions& opts) {
    if (opts.p < 1 || opts.f < 1) throw Error(ErrorKind::Precondition, "p and f must be at least 1");
    const bool estimate_d = !opts.closed_loop;
    const RegressionBlocks b = staged("regression", [&] { return build_regression(data, opts.p, opts.f); });
    const Index ny = b.n_y;
    const Index nu = b.n_u;

    IdentResult res;
    res.algorithm = "iem";
    res.p = opts.p;
    res.f = opts.f;

    Matrix go(ny * b.f, b.Zp.rows());
    std::vector<Matrix> innovations;
    const double scale = b.Yf.norm();
    double last_residual = 0.0;
    for (Index i = 0; i < b.f; ++i) {
        const std::string stage = "iem stage " + std::to_string(i + 1);
        staged(stage, [&] {
            const Index n_inputs = (estimate_d ? i + 1 : i) * nu;
            Index n_e = 0;
            for (const Matrix& e : innovations) n_e += e.rows();
            Matrix reg(b.Zp.rows() + n_inputs + n_e, b.M);
            reg.topRows(b.Zp.rows()) = b.Zp;
            reg.middleRows(b.Zp.rows(), n_inputs) = b.Uf.topRows(n_inputs);
            Index row = b.Zp.rows() + n_inputs;
            for (const Matrix& e : innovations) {
                reg.middleRows(row, e.rows()) = e;
                row += e.rows();
            }
            const Matrix target = b.Yf.middleRows(i * ny, ny);
            const LstsqResult ls = lstsq_rows(target, reg, opts.rcond);
            if (ls.rank_deficient()) {
                res.rank_flags.push_back(stage + " regressor rank deficient by " +
                                         std::to_string(ls.deficiency));
            }
            go.middleRows(i * ny, ny) = ls.theta.leftCols(b.Zp.rows());
            const Matrix resid = target - ls.theta * reg;
            last_residual = resid.norm();
            if (resid.norm() > 1e-10 * scale) {
                innovations.push_back(resid);
            } else if (i + 1 < b.f) {
                res.rank_flags.push_back(stage + " innovation estimate negligible, dropped");
            }
            return 0;
        });
    }

    const RankReduction rr = staged("rank reduction", [&] {
        return reduce_rank(go, b, Weighting::Identity, opts.order, opts.rcond);
    });
    res.order = rr.order_used;
    res.singular_values = rr.singvals;
    res.rank_flags.insert(res.rank_flags.end(), rr.flags.begin(), rr.flags.end());

    StateExtraction se = staged("extraction", [&] {
        StateExtraction out;
        const Matrix gamma = rr.Us * rr.Ss.cwiseSqrt().asDiagonal();
        ac_from_gamma(gamma, ny, out.model.A, out.model.C);
        bd_from_outputs(out.model.A, out.model.C, data, estimate_d, out.model.B, out.model.D,
                        opts.rcond);
        const Matrix X = rr.Ss.cwiseSqrt().asDiagonal() * rr.Vs.transpose() * b.Zp;
        const Index M = X.cols();
        const Matrix u0 = b.Uf.topRows(nu).leftCols(M - 1);
        const Matrix y0 = b.Yf.topRows(ny).leftCols(M - 1);
        out.X = X;
        out.W_res = X.rightCols(M - 1) - out.model.A * X.leftCols(M - 1) - out.model.B * u0;
        out.V_res = y0 - out.model.C * X.leftCols(M - 1) - out.model.D * u0;
        return out;
    });
    finish(res, se, opts);
    res.residual_fro = last_residual;
    return res;
}

IdentResult pbsid_identify(const DataSet& data, const ClOptions& opts) {
    require_f_le_p(opts);
    const bool estimate_d = !opts.closed_loop;
    IdentResult res;
    res.algorithm = "pbsid";
    res.p = opts.p;
    res.f = opts.f;

    const MarkovSet mk = staged("varx", [&] { return varx_markov(data, opts.p, estimate_d, opts.rcond); });
    if (mk.deficiency > 0) {
        res.rank_flags.push_back("VARX regressor rank deficient by " + std::to_string(mk.deficiency));
    }
    const RegressionBlocks b = staged("regression", [&] { return build_regression(data, opts.p, opts.f); });
    const Matrix go = build_gamma_omega(mk, opts.p, opts.f, true);
    const Matrix q = go * b.Zp;
    const SvdResult s = staged("state svd", [&] { return svd(q); });
    const Index n = staged("state svd", [&] { return pick_order(s.S, opts, b.n_y); });
    if (!(s.S(0) > 0.0)) throw Error(ErrorKind::DegenerateState, "Gamma Omega Zp is zero", "state svd");
    flag_order(s.S, n, res.rank_flags);
    res.order = n;
    res.singular_values = s.S;

    const Matrix X = s.S.head(n).cwiseSqrt().asDiagonal() * s.V.leftCols(n).transpose();
    StateExtraction se = staged("extraction", [&] {
        return fit_from_states(X, data.U.middleCols(opts.p, b.M), data.Y.middleCols(opts.p, b.M),
                               estimate_d, opts.rcond);
    });
    finish(res, se, opts);
    return res;
}

SsarxDiagnostics ssarx_states(const DataSet& data, const ClOptions& opts) {
    std::vector<std::string> flags;
    require_f_le_p(opts);
    const bool estimate_d = !opts.closed_loop;
    const MarkovSet mk = staged("varx", [&] { return varx_markov(data, opts.p, estimate_d, opts.rcond); });
    const RegressionBlocks b = staged("regression", [&] { return build_regression(data, opts.p, opts.f); });

    std::vector<Matrix> hu{mk.D};
    std::vector<Matrix> hy{Matrix::Zero(b.n_y, b.n_y)};
    for (Index k = 0; k + 1 < opts.f; ++k) {
        hu.push_back(mk.Gu[static_cast<std::size_t>(k)]);
        hy.push_back(mk.Gy[static_cast<std::size_t>(k)]);
    }
    const Matrix s = b.Yf - toeplitz_from_blocks(hu, opts.f) * b.Uf - toeplitz_from_blocks(hy, opts.f) * b.Yf;
    if (!(s.norm() > 0.0)) throw Error(ErrorKind::DegenerateState, "s_f is identically zero", "cca");

    const Matrix rss = sample_cov(s, s);
    const Matrix rzz = sample_cov(b.Zp, b.Zp);
    flag_singular_cov(rss, "R_ss", flags);
    flag_singular_cov(rzz, "R_zz", flags);
    const Matrix rsz = sample_cov(s, b.Zp);
    const Matrix rzz_isqrt = sym_inv_sqrt(rzz, opts.rcond);
    const SvdResult cca = svd(sym_inv_sqrt(rss, opts.rcond) * rsz * rzz_isqrt);
    if (!(cca.S(0) > 0.0)) throw Error(ErrorKind::DegenerateState, "no canonical correlation", "cca");
    const Index n = pick_order(cca.S, opts, b.n_y);

    SsarxDiagnostics out;
    out.canonical_correlations = cca.S;
    out.X = cca.S.head(n).cwiseSqrt().asDiagonal() * cca.V.leftCols(n).transpose() * rzz_isqrt * b.Zp;
    out.flags = flags;
    out.deficiency = mk.deficiency;
    out.order = n;
    return out;
}

IdentResult ssarx_identify(const DataSet& data, const ClOptions& opts) {
    const bool estimate_d = !opts.closed_loop;
    const SsarxDiagnostics d = ssarx_states(data, opts);
    IdentResult res;
    res.algorithm = "ssarx";
    res.p = opts.p;
    res.f = opts.f;
    res.order = d.order;
    res.singular_values = d.canonical_correlations;
    if (d.deficiency > 0) {
        res.rank_flags.push_back("VARX regressor rank deficient by " + std::to_string(d.deficiency));
    }
    res.rank_flags.insert(res.rank_flags.end(), d.flags.begin(), d.flags.end());
    flag_order(d.canonical_correlations, d.order, res.rank_flags);
    const Index M = d.X.cols();
    StateExtraction se = staged("extraction", [&] {
        return fit_from_states(d.X, data.U.middleCols(opts.p, M), data.Y.middleCols(opts.p, M),
                               estimate_d, opts.rcond);
    });
    finish(res, se, opts);
    return res;
}

}  // namespace subid
