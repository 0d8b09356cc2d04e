#pragma once

#include <vector>

#include "subid/numerics.hpp"

namespace subid {

enum class Direction { Past, Future };

// Block-Hankel data matrix. Column j of a past block holds r(t0+j-ell) ... r(t0+j-1)
// stacked oldest first; column j of a future block holds r(t0+j) ... r(t0+j+ell-1).
struct HankelBlock {
    Matrix data;
    Index ell = 0;
    Index m_cols = 0;
    Index n_r = 0;
    Direction direction = Direction::Future;
    Index t0 = 0;
};

// signal is n_r x N with time along the columns; indices are 0-based.
HankelBlock hankel(const Matrix& signal, Index ell, Index m_cols, Index t0, Direction direction);

// Stacked past vector r_ell^-(t), oldest sample first.
Vector past_stack(const Matrix& signal, Index t, Index ell);
// Stacked future vector r_ell^+(t).
Vector future_stack(const Matrix& signal, Index t, Index ell);

// [C; CA; ...; CA^{ell-1}]
Matrix ext_observability(const Matrix& A, const Matrix& C, Index ell);

// [A^{ell-1}B ... AB B] (reversed ordering, newest input multiplies the last block)
Matrix ext_controllability(const Matrix& A, const Matrix& B, Index ell);

// Block lower-triangular Toeplitz matrix with D on the diagonal and CA^{k-1}B on
// the k-th sub-diagonal.
Matrix toeplitz_h(const Matrix& A, const Matrix& B, const Matrix& C, const Matrix& D, Index ell);

// Same layout from an explicit list of Markov blocks G_0, G_1, ... (G_0 on the
// diagonal). Needs at least ell blocks.
Matrix toeplitz_from_blocks(const std::vector<Matrix>& blocks, Index ell);

// D, CB, ..., CA^{count-2}B
std::vector<Matrix> markov_blocks(const Matrix& A, const Matrix& B, const Matrix& C,
                                  const Matrix& D, Index count);

// 0/1 matrix mapping vec([G_0 G_1 ... G_{f-1}]) onto vec(H_f).
Matrix duplication_selector(Index f, Index n_y, Index n_u);

}  // namespace subid
