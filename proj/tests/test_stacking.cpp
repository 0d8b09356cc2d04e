#include "doctest.h"
#include "subid/simdata.hpp"
#include "subid/stacking.hpp"
#include "support.hpp"

using namespace subid;
using testsupport::randn;

namespace {

Matrix ramp(Index n) {
    Matrix r(1, n);
    for (Index t = 0; t < n; ++t) r(0, t) = static_cast<double>(t);
    return r;
}

}  // namespace

TEST_CASE("hankel") {
    SUBCASE("past ramp") {
        const HankelBlock h = hankel(ramp(6), 2, 3, 2, Direction::Past);
        Matrix expected(2, 3);
        expected << 0, 1, 2, 1, 2, 3;
        CHECK(h.data == expected);
        CHECK(h.ell == 2);
        CHECK(h.m_cols == 3);
        CHECK(h.n_r == 1);
    }
    SUBCASE("future ramp") {
        Matrix expected(2, 2);
        expected << 0, 1, 1, 2;
        CHECK(hankel(ramp(6), 2, 2, 0, Direction::Future).data == expected);
    }
    SUBCASE("past at t0 equals future at t0 - ell") {
        std::mt19937_64 g(1);
        const Matrix sig = randn(2, 30, g);
        for (Index ell = 1; ell <= 5; ++ell) {
            for (Index t0 = ell; t0 + 10 <= 30; t0 += 3) {
                CHECK(hankel(sig, ell, 10, t0, Direction::Past).data ==
                      hankel(sig, ell, 10, t0 - ell, Direction::Future).data);
            }
        }
    }
    SUBCASE("columns are the stacked vectors") {
        std::mt19937_64 g(2);
        const Matrix sig = randn(2, 20, g);
        const HankelBlock past = hankel(sig, 3, 5, 4, Direction::Past);
        const HankelBlock fut = hankel(sig, 3, 5, 4, Direction::Future);
        for (Index j = 0; j < 5; ++j) {
            Vector p(6);
            Vector f(6);
            for (Index k = 0; k < 3; ++k) {
                p.segment(2 * k, 2) = sig.col(4 + j - 3 + k);
                f.segment(2 * k, 2) = sig.col(4 + j + k);
            }
            CHECK(past.data.col(j) == p);
            CHECK(fut.data.col(j) == f);
            CHECK(past_stack(sig, 4 + j, 3) == p);
            CHECK(future_stack(sig, 4 + j, 3) == f);
        }
    }
    SUBCASE("out of range") {
        CHECK_THROWS_AS(hankel(ramp(5), 2, 3, 1, Direction::Past), Error);
        CHECK_THROWS_AS(hankel(ramp(5), 2, 4, 1, Direction::Future), Error);
        try {
            (void)hankel(ramp(5), 3, 3, 2, Direction::Future);
            FAIL("expected BadWindow");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::BadWindow);
        }
    }
}

TEST_CASE("extended observability and controllability") {
    SUBCASE("identity blocks") {
        const Matrix g = ext_observability(Matrix::Identity(2, 2), Matrix::Identity(2, 2), 2);
        CHECK(g.topRows(2) == Matrix::Identity(2, 2));
        CHECK(g.bottomRows(2) == Matrix::Identity(2, 2));
    }
    SUBCASE("scalar") {
        const Matrix a = Matrix::Constant(1, 1, 0.5);
        const Matrix one = Matrix::Constant(1, 1, 1.0);
        const Matrix g = ext_observability(a, one, 3);
        CHECK(g(0, 0) == 1.0);
        CHECK(g(1, 0) == 0.5);
        CHECK(g(2, 0) == 0.25);
        const Matrix w = ext_controllability(a, one, 2);
        CHECK(w(0, 0) == 0.5);
        CHECK(w(0, 1) == 1.0);
    }
    SUBCASE("nilpotent A") {
        std::mt19937_64 g(3);
        const Matrix b = randn(2, 1, g);
        const Matrix w = ext_controllability(Matrix::Zero(2, 2), b, 3);
        CHECK(w.leftCols(2).norm() == 0.0);
        CHECK(w.rightCols(1) == b);
    }
    SUBCASE("observability rank for random observable systems") {
        std::mt19937_64 g(4);
        for (int trial = 0; trial < 10; ++trial) {
            const SsModel m = testsupport::random_system(3, 1, 1, g);
            const Matrix ob = ext_observability(m.A, m.C, 5);
            CHECK(ob.rows() == 5);
            CHECK(ob.cols() == 3);
            CHECK(numerical_rank(ob) == 3);
        }
    }
    SUBCASE("controllability maps past inputs to the zero-initial state") {
        std::mt19937_64 g(5);
        const SsModel m = testsupport::random_system(3, 2, 1, g);
        const Matrix u = randn(2, 6, g);
        Vector x = Vector::Zero(3);
        for (Index t = 0; t < 6; ++t) x = m.A * x + m.B * u.col(t);
        const Matrix w = ext_controllability(m.A, m.B, 6);
        CHECK(w.rows() == 3);
        CHECK(w.cols() == 12);
        CHECK((w * past_stack(u, 6, 6) - x).norm() < 1e-12 * std::max(1.0, x.norm()));
    }
}

TEST_CASE("toeplitz_h") {
    const Matrix a = Matrix::Constant(1, 1, 0.5);
    const Matrix one = Matrix::Constant(1, 1, 1.0);
    const Matrix zero = Matrix::Zero(1, 1);
    CHECK(toeplitz_h(a, one, one, Matrix::Constant(1, 1, 0.7), 1)(0, 0) == 0.7);
    Matrix expected(2, 2);
    expected << 0, 0, 1, 0;
    CHECK(toeplitz_h(a, one, one, zero, 2) == expected);

    SUBCASE("future outputs of a zero-state simulation") {
        std::mt19937_64 g(6);
        const SsModel m = testsupport::random_system(3, 2, 2, g);
        const Matrix u = randn(2, 8, g);
        const Matrix y = simulate_open(m, u).data.Y;
        const Matrix h = toeplitz_h(m.A, m.B, m.C, m.D, 8);
        CHECK((future_stack(y, 0, 8) - h * future_stack(u, 0, 8)).norm() < 1e-12 * y.norm());
        for (Index i = 0; i < 7; ++i)
            for (Index j = i + 1; j < 8; ++j) CHECK(h.block(2 * i, 2 * j, 2, 2).norm() == 0.0);
    }
    SUBCASE("from explicit blocks") {
        std::mt19937_64 g(7);
        const SsModel m = testsupport::random_system(2, 1, 2, g);
        const auto blocks = markov_blocks(m.A, m.B, m.C, m.D, 4);
        CHECK(blocks.size() == 4);
        CHECK(blocks[0] == m.D);
        CHECK((blocks[2] - m.C * m.A * m.B).norm() < 1e-14);
        CHECK(toeplitz_from_blocks(blocks, 4) == toeplitz_h(m.A, m.B, m.C, m.D, 4));
        CHECK_THROWS_AS(toeplitz_from_blocks(blocks, 5), Error);
    }
}

TEST_CASE("data equation holds for noise-free data") {
    std::mt19937_64 g(8);
    const SsModel m = testsupport::random_system(3, 2, 2, g);
    const Index N = 60;
    const Matrix u = randn(2, N, g);
    const Simulation sim = simulate_open(m, u, randn(3, 1, g).col(0));
    const Index f = 4;
    const Index M = N - f + 1;
    const Matrix yf = hankel(sim.data.Y, f, M, 0, Direction::Future).data;
    const Matrix uf = hankel(u, f, M, 0, Direction::Future).data;
    const Matrix x = sim.X.leftCols(M);
    const Matrix rhs = ext_observability(m.A, m.C, f) * x + toeplitz_h(m.A, m.B, m.C, m.D, f) * uf;
    CHECK((yf - rhs).norm() < 1e-12 * yf.norm());
}

TEST_CASE("duplication_selector") {
    SUBCASE("f = 1") { CHECK(duplication_selector(1, 2, 3) == Matrix::Identity(6, 6)); }
    SUBCASE("f = 2 scalar") {
        Matrix expected(4, 2);
        expected << 1, 0, 0, 1, 0, 0, 1, 0;
        CHECK(duplication_selector(2, 1, 1) == expected);
    }
    SUBCASE("random MIMO identity") {
        std::mt19937_64 g(9);
        for (int trial = 0; trial < 10; ++trial) {
            const SsModel m = testsupport::random_system(3, 2, 2, g);
            const auto blocks = markov_blocks(m.A, m.B, m.C, m.D, 3);
            Matrix row(2, 6);
            for (Index k = 0; k < 3; ++k) row.middleCols(2 * k, 2) = blocks[static_cast<std::size_t>(k)];
            const Matrix pi = duplication_selector(3, 2, 2);
            CHECK(pi * vec(row) == vec(toeplitz_h(m.A, m.B, m.C, m.D, 3)));
        }
    }
}
