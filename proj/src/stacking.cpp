#include "subid/stacking.hpp"

#include <string>

namespace subid {

namespace {

void check_window(const Matrix& signal, Index first, Index last) {
    if (first < 0 || last >= signal.cols() || first > last) {
        throw Error(ErrorKind::BadWindow,
                    "window [" + std::to_string(first) + ", " + std::to_string(last) +
                        "] outside signal of length " + std::to_string(signal.cols()));
    }
}

}  // namespace

HankelBlock hankel(const Matrix& signal, Index ell, Index m_cols, Index t0, Direction direction) {
    if (ell < 1 || m_cols < 1) {
        throw Error(ErrorKind::BadWindow, "hankel requires ell >= 1 and m_cols >= 1");
    }
    const Index start = direction == Direction::Past ? t0 - ell : t0;
    check_window(signal, start, start + ell + m_cols - 2);

    const Index n_r = signal.rows();
    HankelBlock out;
    out.data.resize(ell * n_r, m_cols);
    for (Index k = 0; k < ell; ++k) {
        out.data.middleRows(k * n_r, n_r) = signal.middleCols(start + k, m_cols);
    }
    out.ell = ell;
    out.m_cols = m_cols;
    out.n_r = n_r;
    out.direction = direction;
    out.t0 = t0;
    return out;
}

Vector past_stack(const Matrix& signal, Index t, Index ell) {
    return hankel(signal, ell, 1, t, Direction::Past).data.col(0);
}

Vector future_stack(const Matrix& signal, Index t, Index ell) {
    return hankel(signal, ell, 1, t, Direction::Future).data.col(0);
}

Matrix ext_observability(const Matrix& A, const Matrix& C, Index ell) {
    if (ell < 1) throw Error(ErrorKind::Precondition, "ext_observability requires ell >= 1");
    const Index n_y = C.rows();
    Matrix out(ell * n_y, A.cols());
    Matrix block = C;
    for (Index k = 0; k < ell; ++k) {
        out.middleRows(k * n_y, n_y) = block;
        block = block * A;
    }
    return out;
}

Matrix ext_controllability(const Matrix& A, const Matrix& B, Index ell) {
    if (ell < 1) throw Error(ErrorKind::Precondition, "ext_controllability requires ell >= 1");
    const Index n_u = B.cols();
    Matrix out(A.rows(), ell * n_u);
    Matrix block = B;
    for (Index k = ell - 1; k >= 0; --k) {
        out.middleCols(k * n_u, n_u) = block;
        block = A * block;
    }
    return out;
}

std::vector<Matrix> markov_blocks(const Matrix& A, const Matrix& B, const Matrix& C,
                                  const Matrix& D, Index count) {
    std::vector<Matrix> out;
    if (count < 1) return out;
    out.reserve(static_cast<std::size_t>(count));
    out.push_back(D);
    Matrix ak_b = B;
    for (Index k = 1; k < count; ++k) {
        out.push_back(C * ak_b);
        ak_b = A * ak_b;
    }
    return out;
}

Matrix toeplitz_from_blocks(const std::vector<Matrix>& blocks, Index ell) {
    if (ell < 1) throw Error(ErrorKind::Precondition, "toeplitz requires ell >= 1");
    if (static_cast<Index>(blocks.size()) < ell) {
        throw Error(ErrorKind::BadShape, "toeplitz: not enough Markov blocks");
    }
    const Index n_y = blocks[0].rows();
    const Index n_u = blocks[0].cols();
    Matrix out = Matrix::Zero(ell * n_y, ell * n_u);
    for (Index i = 0; i < ell; ++i) {
        for (Index j = 0; j <= i; ++j) {
            out.block(i * n_y, j * n_u, n_y, n_u) = blocks[static_cast<std::size_t>(i - j)];
        }
    }
    return out;
}

Matrix toeplitz_h(const Matrix& A, const Matrix& B, const Matrix& C, const Matrix& D, Index ell) {
    return toeplitz_from_blocks(markov_blocks(A, B, C, D, ell), ell);
}

Matrix duplication_selector(Index f, Index n_y, Index n_u) {
    if (f < 1) throw Error(ErrorKind::Precondition, "duplication_selector requires f >= 1");
    const Index h_rows = n_y * f;
    Matrix pi = Matrix::Zero(h_rows * n_u * f, n_y * n_u * f);
    for (Index i = 0; i < f; ++i) {
        for (Index j = 0; j <= i; ++j) {
            for (Index c = 0; c < n_u; ++c) {
                for (Index r = 0; r < n_y; ++r) {
                    const Index h_index = (j * n_u + c) * h_rows + i * n_y + r;
                    const Index p_index = ((i - j) * n_u + c) * n_y + r;
                    pi(h_index, p_index) = 1.0;
                }
            }
        }
    }
    return pi;
}

}  // namespace subid
