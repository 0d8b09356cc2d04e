#pragma once

#include <algorithm>
#include <limits>
#include <cmath>
#include <random>
#include <vector>

#include "subid/simdata.hpp"
#include "subid/ssmodel.hpp"

namespace testsupport {

using subid::Index;
using subid::Matrix;
using subid::SsModel;
using subid::Vector;

inline Matrix randn(Index rows, Index cols, std::mt19937_64& g) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = n(g);
    return m;
}

inline Matrix random_invertible(Index n, std::mt19937_64& g) {
    for (;;) {
        Matrix t = randn(n, n, g);
        Eigen::JacobiSVD<Matrix> s(t);
        if (s.singularValues()(n - 1) > 0.2 * s.singularValues()(0)) return t;
    }
}

// Stable minimal system with poles of modulus in [0.2, 0.9], hidden behind a
// random well-conditioned similarity transform.
inline SsModel random_system(Index nx, Index nu, Index ny, std::mt19937_64& g, bool with_d = true) {
    std::uniform_real_distribution<double> radius(0.2, 0.9);
    std::uniform_real_distribution<double> angle(0.1, 3.0);
    std::bernoulli_distribution coin(0.5);
    for (;;) {
        Matrix a = Matrix::Zero(nx, nx);
        Index i = 0;
        while (i < nx) {
            if (i + 1 < nx && coin(g)) {
                const double r = radius(g);
                const double th = angle(g);
                a(i, i) = a(i + 1, i + 1) = r * std::cos(th);
                a(i, i + 1) = r * std::sin(th);
                a(i + 1, i) = -r * std::sin(th);
                i += 2;
            } else {
                a(i, i) = (coin(g) ? 1.0 : -1.0) * radius(g);
                ++i;
            }
        }
        const Matrix t = random_invertible(nx, g);
        SsModel m{t * a * t.inverse(), randn(nx, nu, g), randn(ny, nx, g),
                  with_d ? randn(ny, nu, g) : Matrix::Zero(ny, nu), std::nullopt};
        const auto rep = subid::check_structure(m);
        if (!rep.minimal) continue;
        // Keep realizations away from near-cancellation, where exact tests lose digits.
        Matrix obs(nx * ny, nx);
        Matrix ck = m.C;
        for (Index k = 0; k < nx; ++k) {
            obs.middleRows(k * ny, ny) = ck;
            ck = ck * m.A;
        }
        Matrix ctr(nx, nx * nu);
        Matrix ak = Matrix::Identity(nx, nx);
        for (Index k = 0; k < nx; ++k) {
            ctr.middleCols(k * nu, nu) = ak * m.B;
            ak = ak * m.A;
        }
        const Eigen::JacobiSVD<Matrix> s1(obs);
        const Eigen::JacobiSVD<Matrix> s2(ctr);
        const Vector sv1 = s1.singularValues();
        const Vector sv2 = s2.singularValues();
        if (sv1(nx - 1) < 1e-2 * sv1(0) || sv2(nx - 1) < 1e-2 * sv2(0)) continue;
        return m;
    }
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return 0.5 * (v[n / 2] + v[(n - 1) / 2]);
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
    const double scale = std::max(a.norm(), b.norm());
    return scale > 0.0 ? (a - b).norm() / scale : 0.0;
}

// Plant x+ = 0.9 x + u + 0.5 e, y = x + e under u = -0.4 y + r, sd(e) = 0.3, sd(r) = 1.
inline subid::LoopSpec scalar_benchmark_loop() {
    const Matrix one = Matrix::Constant(1, 1, 1.0);
    subid::LoopSpec l;
    l.plant = SsModel{Matrix::Constant(1, 1, 0.9), one, one, Matrix::Zero(1, 1), Matrix::Constant(1, 1, 0.5)};
    l.controller = SsModel{Matrix(0, 0), Matrix(0, 1), Matrix(1, 0), Matrix::Constant(1, 1, 0.4), std::nullopt};
    l.noise = subid::NoiseSpec::from_innovation(Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 0.09));
    l.r2 = subid::ExcitationSpec{subid::ExcitationKind::WhiteGaussian, 1.0, 1};
    return l;
}

// Two-state SISO innovation model, predictor poles 0.3 and 0.2.
inline SsModel innovation_benchmark() {
    Matrix a(2, 2);
    a << 0.8, 0.3, -0.3, 0.8;
    Matrix b(2, 1);
    b << 1.0, 0.5;
    Matrix c(1, 2);
    c << 1.0, 0.0;
    Matrix k(2, 1);
    k << 1.1, 0.7;
    return SsModel{a, b, c, Matrix::Constant(1, 1, 0.2), k};
}

// Innovation variance giving a 20 dB ratio between the deterministic and the
// stochastic output power for a unit-variance white input.
inline double innovation_var_20db(const SsModel& m) {
    double det = m.D.squaredNorm();
    double sto = 1.0;
    Matrix ck = m.C;
    for (int k = 0; k < 500; ++k) {
        det += (ck * m.B).squaredNorm();
        sto += (ck * (*m.K)).squaredNorm();
        ck = ck * m.A;
    }
    return det / sto / 100.0;
}

}  // namespace testsupport
