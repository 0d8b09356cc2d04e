#pragma once

#include <optional>
#include <vector>

#include "subid/simdata.hpp"
#include "subid/ssmodel.hpp"

namespace subid {

// Largest distance over a nearest-pair matching of the two spectra. Eigenvalues
// left without a partner (orders differ) count with their modulus.
double eig_distance(const SsModel& truth, const SsModel& est);

// max_k ||G_k(est) - G_k(truth)||_F / (||G_k(truth)||_F + 1e-12), G_0 = D, G_k = C A^{k-1} B, k <= depth.
double markov_error(const SsModel& truth, const SsModel& est, Index depth);

struct VafReport {
    std::vector<std::optional<double>> vaf;  // empty entry: zero-variance channel
    std::vector<Index> flagged_channels;
};

// Per-channel variance accounted for (percent) of the zero-state simulation of
// model on data.U, skipping the first `skip` samples.
VafReport vaf(const SsModel& model, const DataSet& data, Index skip = 0);

}  // namespace subid
