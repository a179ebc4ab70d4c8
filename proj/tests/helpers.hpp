#pragma once

#include <random>

#include "it2mpc/matrix.hpp"

namespace testutil {

using it2mpc::Matrix;
using it2mpc::SymMatrix;
using it2mpc::Vec;

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            m(i, j) = dist(rng);
    return m;
}

inline Vec random_vec(std::mt19937_64& rng, int n, double scale = 1.0) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    Vec v(n);
    for (int i = 0; i < n; ++i)
        v[i] = dist(rng);
    return v;
}

// A^T A + delta I, guaranteed positive definite.
inline SymMatrix random_pd(std::mt19937_64& rng, int n, double delta = 0.1) {
    Matrix a = random_matrix(rng, n, n);
    Matrix g = a.transpose() * a;
    for (int i = 0; i < n; ++i)
        g(i, i) += delta;
    return SymMatrix::symmetrized(g);
}

// Random matrix redrawn until comfortably nonsingular.
inline Matrix random_nonsingular(std::mt19937_64& rng, int n) {
    for (;;) {
        Matrix m = random_matrix(rng, n, n);
        try {
            Matrix inv = it2mpc::invert(m);
            if ((m * inv - Matrix::identity(n)).max_abs() < 1e-8)
                return m;
        } catch (const it2mpc::SingularMatrixError&) {
        }
    }
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    return (a - b).max_abs();
}

inline double max_abs_diff(const SymMatrix& a, const SymMatrix& b) {
    return (a.to_matrix() - b.to_matrix()).max_abs();
}

}  // namespace testutil
