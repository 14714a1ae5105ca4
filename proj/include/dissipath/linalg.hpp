#pragma once

// Small dense linear algebra on std::vector<double>. Everything here is
// desk scale (n <= ~10): correctness and clarity over speed, no caching,
// no expression templates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace dissipath {

using Vec = std::vector<double>;

// ---------------------------------------------------------------------------
// Vector helpers
// ---------------------------------------------------------------------------

inline void require_same_size(const Vec& a, const Vec& b, const char* where) {
    if (a.size() != b.size()) {
        throw DimensionMismatch(std::string(where) + ": vector sizes " +
                                std::to_string(a.size()) + " and " +
                                std::to_string(b.size()) + " disagree");
    }
}

[[nodiscard]] inline double dot(const Vec& a, const Vec& b) {
    require_same_size(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

[[nodiscard]] inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

[[nodiscard]] inline Vec add(const Vec& a, const Vec& b) {
    require_same_size(a, b, "add");
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

[[nodiscard]] inline Vec sub(const Vec& a, const Vec& b) {
    require_same_size(a, b, "sub");
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

[[nodiscard]] inline Vec scaled(const Vec& a, double s) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * s;
    return r;
}

/// r = a + s*b
[[nodiscard]] inline Vec axpy(const Vec& a, double s, const Vec& b) {
    require_same_size(a, b, "axpy");
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + s * b[i];
    return r;
}

[[nodiscard]] inline double max_abs(const Vec& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

// ---------------------------------------------------------------------------
// Dense matrix (row major)
// ---------------------------------------------------------------------------

class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Mat(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& row : rows) {
            if (row.size() != cols_) throw DimensionMismatch("Mat: ragged initializer");
            data_.insert(data_.end(), row.begin(), row.end());
        }
    }

    [[nodiscard]] static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    /// Columns given as vectors; result is n x k.
    [[nodiscard]] static Mat from_columns(const std::vector<Vec>& cols) {
        if (cols.empty()) return Mat(0, 0);
        Mat m(cols.front().size(), cols.size());
        for (std::size_t j = 0; j < cols.size(); ++j) {
            if (cols[j].size() != m.rows_) throw DimensionMismatch("from_columns: ragged columns");
            for (std::size_t i = 0; i < m.rows_; ++i) m(i, j) = cols[j][i];
        }
        return m;
    }

    [[nodiscard]] static Mat diagonal(const Vec& d) {
        Mat m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    [[nodiscard]] std::size_t rows() const { return rows_; }
    [[nodiscard]] std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    [[nodiscard]] Vec column(std::size_t j) const {
        Vec c(rows_);
        for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
        return c;
    }

    [[nodiscard]] Vec row(std::size_t i) const {
        Vec r(cols_);
        for (std::size_t j = 0; j < cols_; ++j) r[j] = (*this)(i, j);
        return r;
    }

    [[nodiscard]] std::vector<Vec> columns() const {
        std::vector<Vec> cs(cols_);
        for (std::size_t j = 0; j < cols_; ++j) cs[j] = column(j);
        return cs;
    }

    [[nodiscard]] Mat transposed() const {
        Mat t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    [[nodiscard]] Vec operator*(const Vec& v) const {
        if (v.size() != cols_) throw DimensionMismatch("Mat*Vec: size mismatch");
        Vec r(rows_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) r[i] += (*this)(i, j) * v[j];
        return r;
    }

    [[nodiscard]] Mat operator*(const Mat& other) const {
        if (cols_ != other.rows_) throw DimensionMismatch("Mat*Mat: shape mismatch");
        Mat r(rows_, other.cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = 0; k < cols_; ++k) {
                const double aik = (*this)(i, k);
                if (aik == 0.0) continue;
                for (std::size_t j = 0; j < other.cols_; ++j) r(i, j) += aik * other(k, j);
            }
        return r;
    }

    Mat& operator+=(const Mat& other) {
        require_same_shape(other, "Mat+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
        return *this;
    }

    Mat& operator-=(const Mat& other) {
        require_same_shape(other, "Mat-=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
        return *this;
    }

    Mat& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    [[nodiscard]] double frobenius_norm() const {
        double s = 0.0;
        for (double v : data_) s += v * v;
        return std::sqrt(s);
    }

    [[nodiscard]] double max_abs_entry() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    [[nodiscard]] bool is_square() const { return rows_ == cols_; }

    void require_same_shape(const Mat& other, const char* where) const {
        if (rows_ != other.rows_ || cols_ != other.cols_)
            throw DimensionMismatch(std::string(where) + ": shape mismatch");
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    Vec data_;
};

[[nodiscard]] inline Mat operator+(Mat a, const Mat& b) { return a += b; }
[[nodiscard]] inline Mat operator-(Mat a, const Mat& b) { return a -= b; }
[[nodiscard]] inline Mat operator*(double s, Mat a) { return a *= s; }

/// Outer product a * b^T.
[[nodiscard]] inline Mat outer(const Vec& a, const Vec& b) {
    Mat m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * b[j];
    return m;
}

/// Relative symmetry defect max|A - A^T| / (1 + max|A|).
[[nodiscard]] inline double symmetry_defect(const Mat& a) {
    if (!a.is_square()) throw DimensionMismatch("symmetry_defect: matrix not square");
    double d = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j)
            d = std::max(d, std::abs(a(i, j) - a(j, i)));
    return d / (1.0 + a.max_abs_entry());
}

// ---------------------------------------------------------------------------
// Cholesky factorization (LL^T) for symmetric positive definite matrices
// ---------------------------------------------------------------------------

class CholeskyFactor {
public:
    /// Factor a symmetric positive definite matrix; nullopt when a pivot fails.
    [[nodiscard]] static std::optional<CholeskyFactor> compute(const Mat& a) {
        if (!a.is_square()) throw DimensionMismatch("cholesky: matrix not square");
        const std::size_t n = a.rows();
        Mat l(n, n);
        for (std::size_t j = 0; j < n; ++j) {
            double d = a(j, j);
            for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
            if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
            l(j, j) = std::sqrt(d);
            for (std::size_t i = j + 1; i < n; ++i) {
                double s = a(i, j);
                for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
                l(i, j) = s / l(j, j);
            }
        }
        return CholeskyFactor(std::move(l));
    }

    [[nodiscard]] const Mat& lower() const { return lower_; }

    /// Solve A x = rhs with A = L L^T.
    [[nodiscard]] Vec solve(const Vec& rhs) const {
        const std::size_t n = lower_.rows();
        if (rhs.size() != n) throw DimensionMismatch("cholesky solve: rhs size mismatch");
        Vec y(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = rhs[i];
            for (std::size_t k = 0; k < i; ++k) s -= lower_(i, k) * y[k];
            y[i] = s / lower_(i, i);
        }
        Vec x(n);
        for (std::size_t ii = n; ii-- > 0;) {
            double s = y[ii];
            for (std::size_t k = ii + 1; k < n; ++k) s -= lower_(k, ii) * x[k];
            x[ii] = s / lower_(ii, ii);
        }
        return x;
    }

    /// Solve A X = rhs column by column.
    [[nodiscard]] Mat solve_matrix(const Mat& rhs) const {
        Mat x(rhs.rows(), rhs.cols());
        for (std::size_t j = 0; j < rhs.cols(); ++j) {
            Vec col = solve(rhs.column(j));
            for (std::size_t i = 0; i < rhs.rows(); ++i) x(i, j) = col[i];
        }
        return x;
    }

    /// max|LL^T - A| / (1 + max|A|), used to audit factorization quality.
    [[nodiscard]] double reconstruction_defect(const Mat& a) const {
        Mat r = lower_ * lower_.transposed();
        r -= a;
        return r.max_abs_entry() / (1.0 + a.max_abs_entry());
    }

private:
    explicit CholeskyFactor(Mat lower) : lower_(std::move(lower)) {}
    Mat lower_;
};

// ---------------------------------------------------------------------------
// Symmetric eigenvalues (cyclic Jacobi)
// ---------------------------------------------------------------------------

/// Eigenvalues of a symmetric matrix, ascending. Cyclic Jacobi rotations;
/// plenty for the matrix sizes this library works at.
[[nodiscard]] inline Vec symmetric_eigenvalues(Mat a) {
    if (!a.is_square()) throw DimensionMismatch("symmetric_eigenvalues: matrix not square");
    const std::size_t n = a.rows();
    if (n == 0) return {};
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (std::sqrt(off) <= 1e-15 * (1.0 + a.max_abs_entry())) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    Vec ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

/// Singular values of a rectangular matrix via eigenvalues of B^T B, ascending.
[[nodiscard]] inline Vec singular_values(const Mat& b) {
    Mat gram = b.transposed() * b;
    Vec ev = symmetric_eigenvalues(gram);
    for (double& v : ev) v = std::sqrt(std::max(v, 0.0));
    return ev;
}

// ---------------------------------------------------------------------------
// Gram-Schmidt in an arbitrary inner product
// ---------------------------------------------------------------------------

/// Modified Gram-Schmidt with one re-orthogonalization pass. Inputs are
/// normalized first, so the drop threshold on the residual norm is effectively
/// relative. `inner` must be a symmetric positive definite bilinear form.
template <typename InnerProduct>
[[nodiscard]] std::vector<Vec> metric_orthonormalize(const std::vector<Vec>& input,
                                                     InnerProduct&& inner,
                                                     double drop_tol = 1e-10) {
    std::vector<Vec> basis;
    for (const Vec& raw : input) {
        const double raw_norm = std::sqrt(std::max(inner(raw, raw), 0.0));
        if (raw_norm < drop_tol) continue;
        Vec v = scaled(raw, 1.0 / raw_norm);
        for (int pass = 0; pass < 2; ++pass)
            for (const Vec& u : basis) v = axpy(v, -inner(u, v), u);
        const double res = std::sqrt(std::max(inner(v, v), 0.0));
        if (res < drop_tol) continue;
        basis.push_back(scaled(v, 1.0 / res));
    }
    return basis;
}

}  // namespace dissipath
