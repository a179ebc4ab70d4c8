#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace it2mpc {

using Vec = std::vector<double>;

/// Thrown on dimension mismatches and other structural misuse.
struct StructuralError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Thrown on non-finite data or failed numeric preconditions.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown by invert() when the condition number estimate exceeds 1e12.
struct SingularMatrixError : NumericError {
    using NumericError::NumericError;
};

// ---------------------------------------------------------------------------
// Vector helpers
// ---------------------------------------------------------------------------

inline double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size())
        throw StructuralError("dot: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(const Vec& a) {
    for (double v : a)
        if (!std::isfinite(v))
            return false;
    return true;
}

/// Dense row-major real matrix. Dimensions are fixed at construction.
class Matrix {
public:
    Matrix() = default;

    Matrix(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols, 0.0) {
        if (rows < 0 || cols < 0)
            throw StructuralError("Matrix: negative dimension");
    }

    Matrix(std::initializer_list<std::initializer_list<double>> init) {
        rows_ = static_cast<int>(init.size());
        cols_ = rows_ > 0 ? static_cast<int>(init.begin()->size()) : 0;
        a_.reserve(static_cast<std::size_t>(rows_) * cols_);
        for (const auto& row : init) {
            if (static_cast<int>(row.size()) != cols_)
                throw StructuralError("Matrix: ragged initializer");
            for (double v : row)
                a_.push_back(v);
        }
    }

    static Matrix zero(int rows, int cols) { return Matrix(rows, cols); }

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i)
            m(i, i) = 1.0;
        return m;
    }

    static Matrix diag(const Vec& d) {
        Matrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
        for (std::size_t i = 0; i < d.size(); ++i)
            m(static_cast<int>(i), static_cast<int>(i)) = d[i];
        return m;
    }

    /// n x 1 column from a vector.
    static Matrix column(const Vec& v) {
        Matrix m(static_cast<int>(v.size()), 1);
        for (std::size_t i = 0; i < v.size(); ++i)
            m(static_cast<int>(i), 0) = v[i];
        return m;
    }

    /// 1 x n row from a vector.
    static Matrix row(const Vec& v) {
        Matrix m(1, static_cast<int>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i)
            m(0, static_cast<int>(i)) = v[i];
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * cols_ + j]; }

    Matrix transpose() const {
        Matrix t(cols_, rows_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j)
                t(j, i) = (*this)(i, j);
        return t;
    }

    Matrix& operator+=(const Matrix& o) {
        check_same_shape(o, "+=");
        for (std::size_t i = 0; i < a_.size(); ++i)
            a_[i] += o.a_[i];
        return *this;
    }

    Matrix& operator-=(const Matrix& o) {
        check_same_shape(o, "-=");
        for (std::size_t i = 0; i < a_.size(); ++i)
            a_[i] -= o.a_[i];
        return *this;
    }

    Matrix& operator*=(double s) {
        for (double& v : a_)
            v *= s;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, double s) { return a *= s; }
    friend Matrix operator*(double s, Matrix a) { return a *= s; }

    friend Matrix operator-(const Matrix& a) {
        Matrix r = a;
        return r *= -1.0;
    }

    friend Matrix operator*(const Matrix& a, const Matrix& b) {
        if (a.cols_ != b.rows_)
            throw StructuralError("Matrix product: inner dimension mismatch (" + std::to_string(a.cols_) +
                                  " vs " + std::to_string(b.rows_) + ")");
        Matrix r(a.rows_, b.cols_);
        for (int i = 0; i < a.rows_; ++i) {
            for (int k = 0; k < a.cols_; ++k) {
                const double aik = a(i, k);
                if (aik == 0.0)
                    continue;
                for (int j = 0; j < b.cols_; ++j)
                    r(i, j) += aik * b(k, j);
            }
        }
        return r;
    }

    /// Matrix-vector product.
    Vec apply(const Vec& x) const {
        if (static_cast<int>(x.size()) != cols_)
            throw StructuralError("Matrix::apply: dimension mismatch");
        Vec y(rows_, 0.0);
        for (int i = 0; i < rows_; ++i) {
            double s = 0.0;
            for (int j = 0; j < cols_; ++j)
                s += (*this)(i, j) * x[j];
            y[i] = s;
        }
        return y;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (double v : a_)
            s += v * v;
        return std::sqrt(s);
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : a_)
            m = std::max(m, std::abs(v));
        return m;
    }

    double inf_norm() const {
        double m = 0.0;
        for (int i = 0; i < rows_; ++i) {
            double s = 0.0;
            for (int j = 0; j < cols_; ++j)
                s += std::abs((*this)(i, j));
            m = std::max(m, s);
        }
        return m;
    }

    bool is_finite() const {
        for (double v : a_)
            if (!std::isfinite(v))
                return false;
        return true;
    }

    bool is_symmetric(double tol) const {
        if (rows_ != cols_)
            return false;
        for (int i = 0; i < rows_; ++i)
            for (int j = i + 1; j < cols_; ++j)
                if (std::abs((*this)(i, j) - (*this)(j, i)) > tol)
                    return false;
        return true;
    }

private:
    void check_same_shape(const Matrix& o, const char* op) const {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw StructuralError(std::string("Matrix ") + op + ": shape mismatch");
    }

    int rows_ = 0, cols_ = 0;
    Vec a_;
};

/// Frobenius inner product <a, b> = sum_ij a_ij b_ij.
inline double inner(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw StructuralError("inner: shape mismatch");
    double s = 0.0;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            s += a(i, j) * b(i, j);
    return s;
}

/// Dense real symmetric matrix. Only the upper triangle is stored, so
/// entries(i,j) == entries(j,i) holds by construction.
class SymMatrix {
public:
    SymMatrix() = default;

    explicit SymMatrix(int dim) : dim_(dim), a_(packed_size(dim), 0.0) {
        if (dim < 1)
            throw StructuralError("SymMatrix: dim must be >= 1");
    }

    static SymMatrix zero(int dim) { return SymMatrix(dim); }

    static SymMatrix identity(int dim) {
        SymMatrix m(dim);
        for (int i = 0; i < dim; ++i)
            m.set(i, i, 1.0);
        return m;
    }

    static SymMatrix diag(const Vec& d) {
        SymMatrix m(static_cast<int>(d.size()));
        for (std::size_t i = 0; i < d.size(); ++i)
            m.set(static_cast<int>(i), static_cast<int>(i), d[i]);
        return m;
    }

    /// (m + m^T) / 2.
    static SymMatrix symmetrized(const Matrix& m) {
        if (m.rows() != m.cols())
            throw StructuralError("SymMatrix::symmetrized: matrix not square");
        SymMatrix s(m.rows());
        for (int i = 0; i < m.rows(); ++i)
            for (int j = i; j < m.cols(); ++j)
                s.set(i, j, 0.5 * (m(i, j) + m(j, i)));
        return s;
    }

    /// Adopts a numerically symmetric matrix; rejects asymmetry beyond tol.
    static SymMatrix from_matrix(const Matrix& m, double tol) {
        if (m.rows() != m.cols())
            throw StructuralError("SymMatrix::from_matrix: matrix not square");
        double worst = 0.0;
        for (int i = 0; i < m.rows(); ++i)
            for (int j = i + 1; j < m.cols(); ++j)
                worst = std::max(worst, std::abs(m(i, j) - m(j, i)));
        if (worst > tol)
            throw StructuralError("SymMatrix::from_matrix: asymmetry " + std::to_string(worst) +
                                  " exceeds tolerance");
        return symmetrized(m);
    }

    int dim() const { return dim_; }

    double operator()(int i, int j) const { return a_[index(std::min(i, j), std::max(i, j))]; }

    void set(int i, int j, double v) { a_[index(std::min(i, j), std::max(i, j))] = v; }

    void add(int i, int j, double v) { a_[index(std::min(i, j), std::max(i, j))] += v; }

    Matrix to_matrix() const {
        Matrix m(dim_, dim_);
        for (int i = 0; i < dim_; ++i)
            for (int j = i; j < dim_; ++j) {
                m(i, j) = (*this)(i, j);
                m(j, i) = (*this)(i, j);
            }
        return m;
    }

    SymMatrix& operator+=(const SymMatrix& o) {
        check_same_dim(o);
        for (std::size_t i = 0; i < a_.size(); ++i)
            a_[i] += o.a_[i];
        return *this;
    }

    SymMatrix& operator-=(const SymMatrix& o) {
        check_same_dim(o);
        for (std::size_t i = 0; i < a_.size(); ++i)
            a_[i] -= o.a_[i];
        return *this;
    }

    SymMatrix& operator*=(double s) {
        for (double& v : a_)
            v *= s;
        return *this;
    }

    friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
    friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
    friend SymMatrix operator*(SymMatrix a, double s) { return a *= s; }
    friend SymMatrix operator*(double s, SymMatrix a) { return a *= s; }

    friend SymMatrix operator-(const SymMatrix& a) {
        SymMatrix r = a;
        return r *= -1.0;
    }

    /// x^T S x.
    double quad_form(const Vec& x) const {
        if (static_cast<int>(x.size()) != dim_)
            throw StructuralError("SymMatrix::quad_form: dimension mismatch");
        double s = 0.0;
        for (int i = 0; i < dim_; ++i) {
            s += (*this)(i, i) * x[i] * x[i];
            for (int j = i + 1; j < dim_; ++j)
                s += 2.0 * (*this)(i, j) * x[i] * x[j];
        }
        return s;
    }

    double frobenius_norm() const { return to_matrix().frobenius_norm(); }

    double max_abs() const {
        double m = 0.0;
        for (double v : a_)
            m = std::max(m, std::abs(v));
        return m;
    }

    bool is_finite() const {
        for (double v : a_)
            if (!std::isfinite(v))
                return false;
        return true;
    }

private:
    static std::size_t packed_size(int dim) {
        return static_cast<std::size_t>(dim) * (dim + 1) / 2;
    }

    // Packed upper-triangle index for i <= j.
    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(i) * dim_ - static_cast<std::size_t>(i) * (i - 1) / 2 + (j - i);
    }

    void check_same_dim(const SymMatrix& o) const {
        if (dim_ != o.dim_)
            throw StructuralError("SymMatrix: dimension mismatch");
    }

    int dim_ = 0;
    Vec a_;
};

inline double inner(const SymMatrix& a, const SymMatrix& b) {
    if (a.dim() != b.dim())
        throw StructuralError("inner: dimension mismatch");
    double s = 0.0;
    for (int i = 0; i < a.dim(); ++i) {
        s += a(i, i) * b(i, i);
        for (int j = i + 1; j < a.dim(); ++j)
            s += 2.0 * a(i, j) * b(i, j);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition (cyclic Jacobi with thresholding)
// ---------------------------------------------------------------------------

struct EigResult {
    Vec values;      ///< ascending
    Matrix vectors;  ///< column i pairs with values[i]
};

/// Full eigendecomposition of a symmetric matrix. Deterministic; accurate to
/// a small multiple of machine epsilon times the matrix scale.
inline EigResult eigh(const SymMatrix& s) {
    const int n = s.dim();
    if (!s.is_finite())
        throw NumericError("eigh: non-finite entries");
    Matrix a = s.to_matrix();
    Matrix v = Matrix::identity(n);

    auto off_norm = [&]() {
        double sum = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q)
                sum += std::abs(a(p, q));
        return sum;
    };

    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        const double off = off_norm();
        if (off == 0.0)
            break;
        const double thresh = sweep < 3 ? 0.2 * off / (n * n) : 0.0;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                const double g = 100.0 * std::abs(apq);
                if (sweep > 3 && std::abs(a(p, p)) + g == std::abs(a(p, p)) &&
                    std::abs(a(q, q)) + g == std::abs(a(q, q))) {
                    a(p, q) = 0.0;
                    a(q, p) = 0.0;
                    continue;
                }
                if (std::abs(apq) <= thresh)
                    continue;
                const double diff = a(q, q) - a(p, p);
                double t;
                if (std::abs(apq) < std::abs(diff) * 1e-36) {
                    t = apq / diff;
                } else {
                    const double theta = 0.5 * diff / apq;
                    t = 1.0 / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                    if (theta < 0.0)
                        t = -t;
                }
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = t * c;
                const double tau = sn / (1.0 + c);
                const double h = t * apq;
                a(p, p) -= h;
                a(q, q) += h;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                auto rotate = [&](Matrix& m, int i1, int j1, int i2, int j2) {
                    const double g1 = m(i1, j1);
                    const double g2 = m(i2, j2);
                    m(i1, j1) = g1 - sn * (g2 + g1 * tau);
                    m(i2, j2) = g2 + sn * (g1 - g2 * tau);
                };
                for (int r = 0; r < p; ++r) {
                    rotate(a, r, p, r, q);
                    a(p, r) = a(r, p);
                    a(q, r) = a(r, q);
                }
                for (int r = p + 1; r < q; ++r) {
                    rotate(a, p, r, r, q);
                    a(r, p) = a(p, r);
                    a(q, r) = a(r, q);
                }
                for (int r = q + 1; r < n; ++r) {
                    rotate(a, p, r, q, r);
                    a(r, p) = a(p, r);
                    a(r, q) = a(q, r);
                }
                for (int r = 0; r < n; ++r)
                    rotate(v, r, p, r, q);
            }
        }
    }

    EigResult res;
    res.values.resize(n);
    for (int i = 0; i < n; ++i)
        res.values[i] = a(i, i);

    // Sort ascending, permuting eigenvector columns alongside.
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i)
        order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return res.values[i] < res.values[j]; });
    Vec sorted(n);
    Matrix vs(n, n);
    for (int i = 0; i < n; ++i) {
        sorted[i] = res.values[order[i]];
        for (int r = 0; r < n; ++r)
            vs(r, i) = v(r, order[i]);
    }
    res.values = std::move(sorted);
    res.vectors = std::move(vs);
    return res;
}

/// Smallest eigenvalue of a symmetric matrix.
inline double min_eig(const SymMatrix& m) { return eigh(m).values.front(); }

/// Largest eigenvalue of a symmetric matrix.
inline double max_eig(const SymMatrix& m) { return eigh(m).values.back(); }

/// Strict positive definiteness: min_eig(m) > tol.
inline bool is_pd(const SymMatrix& m, double tol) {
    if (tol < 0.0)
        throw StructuralError("is_pd: tol must be >= 0");
    return min_eig(m) > tol;
}

// ---------------------------------------------------------------------------
// Inversion and factorization
// ---------------------------------------------------------------------------

/// Inverse by Gauss-Jordan with partial pivoting plus one Newton refinement
/// step. Throws SingularMatrixError when the infinity-norm condition number
/// estimate exceeds 1e12.
inline Matrix invert(const Matrix& m) {
    if (m.rows() != m.cols())
        throw StructuralError("invert: matrix not square");
    if (!m.is_finite())
        throw NumericError("invert: non-finite entries");
    const int n = m.rows();
    const double norm_a = m.inf_norm();
    Matrix a = m;
    Matrix x = Matrix::identity(n);
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(pivot, col)))
                pivot = r;
        const double p = a(pivot, col);
        if (std::abs(p) <= norm_a * 1e-15)
            throw SingularMatrixError("invert: pivot vanished (singular matrix)");
        if (pivot != col) {
            for (int j = 0; j < n; ++j) {
                std::swap(a(col, j), a(pivot, j));
                std::swap(x(col, j), x(pivot, j));
            }
        }
        const double inv_p = 1.0 / a(col, col);
        for (int j = 0; j < n; ++j) {
            a(col, j) *= inv_p;
            x(col, j) *= inv_p;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col)
                continue;
            const double f = a(r, col);
            if (f == 0.0)
                continue;
            for (int j = 0; j < n; ++j) {
                a(r, j) -= f * a(col, j);
                x(r, j) -= f * x(col, j);
            }
        }
    }
    const double cond = norm_a * x.inf_norm();
    if (!(cond < 1e12))
        throw SingularMatrixError("invert: condition number estimate " + std::to_string(cond) +
                                  " exceeds 1e12");
    // One step of Newton refinement: X <- X (2I - M X).
    Matrix correction = Matrix::identity(n) * 2.0 - m * x;
    return x * correction;
}

/// Inverse of a symmetric matrix, symmetrized after the solve.
inline SymMatrix invert(const SymMatrix& m) {
    return SymMatrix::symmetrized(invert(m.to_matrix()));
}

/// Congruence transform t^T m t. For square nonsingular t this preserves
/// sign-definiteness.
inline SymMatrix congruence(const SymMatrix& m, const Matrix& t) {
    if (t.rows() != m.dim())
        throw StructuralError("congruence: t.rows (" + std::to_string(t.rows()) +
                              ") must equal m.dim (" + std::to_string(m.dim()) + ")");
    Matrix full = t.transpose() * m.to_matrix() * t;
    return SymMatrix::symmetrized(full);
}

/// Lower Cholesky factor, or nullopt when the matrix is not positive
/// definite to working precision.
inline std::optional<Matrix> cholesky(const SymMatrix& s) {
    const int n = s.dim();
    Matrix l(n, n);
    for (int j = 0; j < n; ++j) {
        double d = s(j, j);
        for (int k = 0; k < j; ++k)
            d -= l(j, k) * l(j, k);
        if (!(d > 0.0) || !std::isfinite(d))
            return std::nullopt;
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (int i = j + 1; i < n; ++i) {
            double v = s(i, j);
            for (int k = 0; k < j; ++k)
                v -= l(i, k) * l(j, k);
            l(i, j) = v / ljj;
        }
    }
    return l;
}

/// Solves L y = b for lower-triangular L.
inline Vec forward_substitute(const Matrix& l, const Vec& b) {
    const int n = l.rows();
    Vec y(n);
    for (int i = 0; i < n; ++i) {
        double v = b[i];
        for (int k = 0; k < i; ++k)
            v -= l(i, k) * y[k];
        y[i] = v / l(i, i);
    }
    return y;
}

/// Solves L^T x = y for lower-triangular L.
inline Vec backward_substitute(const Matrix& l, const Vec& y) {
    const int n = l.rows();
    Vec x(n);
    for (int i = n - 1; i >= 0; --i) {
        double v = y[i];
        for (int k = i + 1; k < n; ++k)
            v -= l(k, i) * x[k];
        x[i] = v / l(i, i);
    }
    return x;
}

/// SPD solve via Cholesky; nullopt when not positive definite.
inline std::optional<Vec> solve_spd(const SymMatrix& a, const Vec& b) {
    auto l = cholesky(a);
    if (!l)
        return std::nullopt;
    return backward_substitute(*l, forward_substitute(*l, b));
}

// ---------------------------------------------------------------------------
// Block assembly
// ---------------------------------------------------------------------------

/// Block layout for assembling partitioned matrices. Upper-triangular blocks
/// are authoritative; the lower triangle of a symmetric assembly is filled
/// with their transposes (the starred-block convention).
class BlockSpec {
public:
    BlockSpec(std::vector<int> row_blocks, std::vector<int> col_blocks)
        : row_blocks_(std::move(row_blocks)), col_blocks_(std::move(col_blocks)) {
        for (int d : row_blocks_)
            if (d < 1)
                throw StructuralError("BlockSpec: block dimensions must be >= 1");
        for (int d : col_blocks_)
            if (d < 1)
                throw StructuralError("BlockSpec: block dimensions must be >= 1");
    }

    /// Symmetric layout (row blocks == col blocks).
    explicit BlockSpec(std::vector<int> blocks) : BlockSpec(blocks, blocks) {}

    void set_block(int bi, int bj, Matrix m) {
        if (bi < 0 || bi >= static_cast<int>(row_blocks_.size()) || bj < 0 ||
            bj >= static_cast<int>(col_blocks_.size()))
            throw StructuralError("BlockSpec: block index (" + std::to_string(bi) + "," +
                                  std::to_string(bj) + ") out of range");
        if (m.rows() != row_blocks_[bi] || m.cols() != col_blocks_[bj])
            throw StructuralError("BlockSpec: block (" + std::to_string(bi) + "," + std::to_string(bj) +
                                  ") is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                  ", expected " + std::to_string(row_blocks_[bi]) + "x" +
                                  std::to_string(col_blocks_[bj]));
        blocks_[{bi, bj}] = std::move(m);
    }

    const std::vector<int>& row_blocks() const { return row_blocks_; }
    const std::vector<int>& col_blocks() const { return col_blocks_; }
    const std::map<std::pair<int, int>, Matrix>& blocks() const { return blocks_; }

    int row_offset(int bi) const {
        int off = 0;
        for (int i = 0; i < bi; ++i)
            off += row_blocks_[i];
        return off;
    }

    int col_offset(int bj) const {
        int off = 0;
        for (int j = 0; j < bj; ++j)
            off += col_blocks_[j];
        return off;
    }

    int total_rows() const { return row_offset(static_cast<int>(row_blocks_.size())); }
    int total_cols() const { return col_offset(static_cast<int>(col_blocks_.size())); }

private:
    std::vector<int> row_blocks_, col_blocks_;
    std::map<std::pair<int, int>, Matrix> blocks_;
};

/// Assembles a symmetric matrix from upper-triangular blocks, mirroring the
/// transposes into the lower triangle. Unspecified blocks are zero. Diagonal
/// blocks take their upper triangle as authoritative and must be numerically
/// symmetric.
inline SymMatrix assemble_symmetric(const BlockSpec& spec) {
    if (spec.row_blocks() != spec.col_blocks())
        throw StructuralError("assemble_symmetric: row and column block layouts differ");
    const int n = spec.total_rows();
    SymMatrix out(n);
    for (const auto& [key, block] : spec.blocks()) {
        const auto [bi, bj] = key;
        if (bi > bj)
            throw StructuralError("assemble_symmetric: block (" + std::to_string(bi) + "," +
                                  std::to_string(bj) + ") lies below the diagonal; specify the upper "
                                  "triangle only");
        const int r0 = spec.row_offset(bi);
        const int c0 = spec.col_offset(bj);
        if (bi == bj) {
            const double scale = std::max(1.0, block.max_abs());
            if (!block.is_symmetric(1e-8 * scale))
                throw StructuralError("assemble_symmetric: diagonal block (" + std::to_string(bi) + "," +
                                      std::to_string(bj) + ") is not symmetric");
            for (int i = 0; i < block.rows(); ++i)
                for (int j = i; j < block.cols(); ++j)
                    out.set(r0 + i, c0 + j, block(i, j));
        } else {
            for (int i = 0; i < block.rows(); ++i)
                for (int j = 0; j < block.cols(); ++j)
                    out.set(r0 + i, c0 + j, block(i, j));
        }
    }
    return out;
}

}  // namespace it2mpc
