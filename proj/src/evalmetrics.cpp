#include "subid/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "subid/stacking.hpp"

namespace subid {

namespace {

using Complex = std::complex<double>;

bool before(const Complex& a, const Complex& b) {
    if (std::abs(a) != std::abs(b)) return std::abs(a) < std::abs(b);
    return std::arg(a) < std::arg(b);
}

}  // namespace

double eig_distance(const SsModel& truth, const SsModel& est) {
    std::vector<Complex> a = eigvals(truth.A);
    std::vector<Complex> b = eigvals(est.A);
    // Canonical order makes the greedy pass independent of solver output order
    // and of which argument comes first.
    std::sort(a.begin(), a.end(), before);
    std::sort(b.begin(), b.end(), before);
    std::vector<bool> used_a(a.size(), false);
    std::vector<bool> used_b(b.size(), false);
    double worst = 0.0;
    const std::size_t pairs = std::min(a.size(), b.size());
    for (std::size_t n = 0; n < pairs; ++n) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0;
        std::size_t bj = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (used_a[i]) continue;
            for (std::size_t j = 0; j < b.size(); ++j) {
                if (used_b[j]) continue;
                const double d = std::abs(a[i] - b[j]);
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        used_a[bi] = true;
        used_b[bj] = true;
        worst = std::max(worst, best);
    }
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!used_a[i]) worst = std::max(worst, std::abs(a[i]));
    for (std::size_t j = 0; j < b.size(); ++j)
        if (!used_b[j]) worst = std::max(worst, std::abs(b[j]));
    return worst;
}

double markov_error(const SsModel& truth, const SsModel& est, Index depth) {
    if (truth.n_u() != est.n_u() || truth.n_y() != est.n_y()) {
        throw Error(ErrorKind::BadShape, "markov_error: input/output dimensions differ");
    }
    const auto g_true = markov_blocks(truth.A, truth.B, truth.C, truth.D, depth + 1);
    const auto g_est = markov_blocks(est.A, est.B, est.C, est.D, depth + 1);
    double worst = 0.0;
    for (std::size_t k = 0; k < g_true.size(); ++k) {
        const double err = (g_est[k] - g_true[k]).norm() / (g_true[k].norm() + 1e-12);
        worst = std::max(worst, err);
    }
    return worst;
}

VafReport vaf(const SsModel& model, const DataSet& data, Index skip) {
    model.validate();
    data.validate();
    if (model.n_u() != data.n_u() || model.n_y() != data.n_y()) {
        throw Error(ErrorKind::BadShape, "vaf: model and data dimensions differ");
    }
    const Index N = data.n_samples();
    if (skip < 0 || skip >= N) throw Error(ErrorKind::BadWindow, "vaf: skip leaves no samples");
    SsModel plain = model;
    plain.K.reset();
    const Matrix yhat = simulate_open(plain, data.U).data.Y;
    VafReport rep;
    const Index cnt = N - skip;
    for (Index r = 0; r < data.n_y(); ++r) {
        const Vector y = data.Y.row(r).tail(cnt).transpose();
        const Vector e = y - yhat.row(r).tail(cnt).transpose();
        const double var_y = (y.array() - y.mean()).square().sum() / static_cast<double>(cnt);
        const double var_e = (e.array() - e.mean()).square().sum() / static_cast<double>(cnt);
        if (!(var_y > 0.0)) {
            rep.vaf.emplace_back(std::nullopt);
            rep.flagged_channels.push_back(r);
            continue;
        }
        rep.vaf.emplace_back(100.0 * std::max(0.0, 1.0 - var_e / var_y));
    }
    return rep;
}

}  // namespace subid
