#pragma once

#include <vector>

#include "subid/openloop.hpp"

namespace subid {

// Predictor Markov parameters: Gu[k] = C Atil^k Btil, Gy[k] = C Atil^k K.
struct MarkovSet {
    Matrix D;
    std::vector<Matrix> Gu;
    std::vector<Matrix> Gy;
    Index ell = 0;
    Index deficiency = 0;  // rank deficiency of the VARX regressor
};

// One-step-ahead VARX fit of y(t) on z_ell^-(t) (and u(t) when estimate_d).
MarkovSet varx_markov(const DataSet& data, Index ell, bool estimate_d,
                      double rcond = default_rcond());

// Exact Markov set of a predictor-form model, for oracles and diagnostics.
MarkovSet markov_from_model(const SsModel& m, Index ell);

// Block (i, j) = C Atil^{p-1-j+i} [K, Btil]; banded zeroes exponents >= p.
Matrix build_gamma_omega(const MarkovSet& mk, Index p, Index f, bool banded);

struct ClOptions {
    Index p = 10;
    Index f = 10;
    std::optional<Index> order;
    bool closed_loop = true;  // false re-enables D estimation
    bool estimate_gain = true;
    double rcond = default_rcond();
};

IdentResult iem_identify(const DataSet& data, const ClOptions& opts);
IdentResult pbsid_identify(const DataSet& data, const ClOptions& opts);
IdentResult ssarx_identify(const DataSet& data, const ClOptions& opts);

// CCA stage of SSARX: canonical correlations and the state estimate over the Zp columns.
struct SsarxDiagnostics {
    Vector canonical_correlations;
    Matrix X;
    Index order = 0;
    Index deficiency = 0;
    std::vector<std::string> flags;
};
SsarxDiagnostics ssarx_states(const DataSet& data, const ClOptions& opts);

}  // namespace subid
