#pragma once

// Small dense real linear algebra, eigenvalue real-part bounds, observability
// rank and a fixed-step RK4 integrator.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "asd/errors.hpp"

namespace asd {

using Vector = std::vector<double>;
using Vec4 = std::array<double, 4>;

// ============================================================================
// Matrix
// ============================================================================

// Row-major dense matrix. Sizes here are tiny (at most a few tens of rows).
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Matrix(std::initializer_list<std::initializer_list<double>> init) {
        rows_ = init.size();
        cols_ = rows_ == 0 ? 0 : init.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& row : init) {
            if (row.size() != cols_) throw DimensionError("Matrix: ragged initializer list");
            data_.insert(data_.end(), row.begin(), row.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    // Builds a matrix from a list of rows, rejecting ragged input.
    static Matrix from_rows(const std::vector<Vector>& rows) {
        Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != m.cols_) throw DimensionError("Matrix::from_rows: ragged rows");
            std::copy(rows[i].begin(), rows[i].end(), m.data_.begin() + static_cast<std::ptrdiff_t>(i * m.cols_));
        }
        return m;
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] bool is_square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    [[nodiscard]] std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

    [[nodiscard]] Vector row_vector(std::size_t i) const {
        auto r = row(i);
        return {r.begin(), r.end()};
    }

    [[nodiscard]] Matrix transpose() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    // Copies `block` into this matrix with its top-left corner at (r0, c0).
    void set_block(std::size_t r0, std::size_t c0, const Matrix& block) {
        if (r0 + block.rows_ > rows_ || c0 + block.cols_ > cols_)
            throw DimensionError("Matrix::set_block: block does not fit");
        for (std::size_t i = 0; i < block.rows_; ++i)
            for (std::size_t j = 0; j < block.cols_; ++j) (*this)(r0 + i, c0 + j) = block(i, j);
    }

    [[nodiscard]] double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    [[nodiscard]] bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    Matrix& operator+=(const Matrix& o) {
        require_same_shape(o, "+=");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
        return *this;
    }
    Matrix& operator-=(const Matrix& o) {
        require_same_shape(o, "-=");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
        return *this;
    }
    Matrix& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, double s) { return a *= s; }
    friend Matrix operator*(double s, Matrix a) { return a *= s; }

    friend Matrix operator*(const Matrix& a, const Matrix& b) {
        if (a.cols_ != b.rows_) throw DimensionError("Matrix product: inner dimensions differ");
        Matrix c(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const double aik = a(i, k);
                if (aik == 0.0) continue;
                for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
            }
        return c;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    void require_same_shape(const Matrix& o, const char* op) const {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw DimensionError(std::string("Matrix ") + op + ": shape mismatch");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// ============================================================================
// Vector helpers
// ============================================================================

inline Vector operator*(const Matrix& m, std::span<const double> x) {
    if (m.cols() != x.size()) throw DimensionError("Matrix-vector product: dimension mismatch");
    Vector y(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

inline Vec4 operator*(const Matrix& m, const Vec4& x) {
    if (m.rows() != 4 || m.cols() != 4) throw DimensionError("4x4 product: matrix is not 4x4");
    Vec4 y{};
    for (std::size_t i = 0; i < 4; ++i)
        y[i] = m(i, 0) * x[0] + m(i, 1) * x[1] + m(i, 2) * x[2] + m(i, 3) * x[3];
    return y;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

inline bool all_finite(std::span<const double> a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

// u v^T
inline Matrix outer(std::span<const double> u, std::span<const double> v) {
    Matrix m(u.size(), v.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = u[i] * v[j];
    return m;
}

// ============================================================================
// Eigenvalues: balancing, Hessenberg reduction, Francis double-shift QR
// ============================================================================

namespace detail {

// Osborne/Parlett-Reinsch balancing by powers of the radix. Similarity
// transform, spectrum unchanged.
inline void balance(Matrix& a) {
    constexpr double radix = 2.0;
    const double sqrdx = radix * radix;
    const std::size_t n = a.rows();
    bool done = false;
    while (!done) {
        done = true;
        for (std::size_t i = 0; i < n; ++i) {
            double r = 0.0;
            double c = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                c += std::abs(a(j, i));
                r += std::abs(a(i, j));
            }
            if (c == 0.0 || r == 0.0) continue;
            double g = r / radix;
            double f = 1.0;
            const double s = c + r;
            while (c < g) {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= sqrdx;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                g = 1.0 / f;
                for (std::size_t j = 0; j < n; ++j) a(i, j) *= g;
                for (std::size_t j = 0; j < n; ++j) a(j, i) *= f;
            }
        }
    }
}

// Reduction to upper Hessenberg form by stabilized elementary similarity
// transformations (Gaussian elimination with partial pivoting).
inline void to_hessenberg(Matrix& a) {
    const std::size_t n = a.rows();
    if (n < 3) return;
    for (std::size_t m = 1; m + 1 < n; ++m) {
        double x = 0.0;
        std::size_t i = m;
        for (std::size_t j = m; j < n; ++j) {
            if (std::abs(a(j, m - 1)) > std::abs(x)) {
                x = a(j, m - 1);
                i = j;
            }
        }
        if (i != m) {
            for (std::size_t j = m - 1; j < n; ++j) std::swap(a(i, j), a(m, j));
            for (std::size_t j = 0; j < n; ++j) std::swap(a(j, i), a(j, m));
        }
        if (x == 0.0) continue;
        for (i = m + 1; i < n; ++i) {
            double y = a(i, m - 1);
            if (y == 0.0) continue;
            y /= x;
            a(i, m - 1) = y;
            for (std::size_t j = m; j < n; ++j) a(i, j) -= y * a(m, j);
            for (std::size_t j = 0; j < n; ++j) a(j, m) += y * a(j, i);
        }
    }
    for (std::size_t i = 2; i < n; ++i)
        for (std::size_t j = 0; j + 1 < i; ++j) a(i, j) = 0.0;
}

inline double sign_of(double magnitude, double s) { return s >= 0.0 ? std::abs(magnitude) : -std::abs(magnitude); }

// Francis double-shift QR on an upper Hessenberg matrix. `max_sweeps` caps the
// total number of QR sweeps across all deflations.
inline std::vector<std::complex<double>> hessenberg_qr(Matrix a, int max_sweeps) {
    const int n = static_cast<int>(a.rows());
    std::vector<std::complex<double>> eig(static_cast<std::size_t>(n));
    constexpr double eps = std::numeric_limits<double>::epsilon();

    auto at = [&a](int i, int j) -> double& { return a(static_cast<std::size_t>(i), static_cast<std::size_t>(j)); };
    auto put = [&eig](int i, std::complex<double> v) { eig[static_cast<std::size_t>(i)] = v; };

    double anorm = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(at(i, j));

    int nn = n - 1;
    double t = 0.0;
    int total_sweeps = 0;
    while (nn >= 0) {
        int its = 0;
        int l = 0;
        do {
            for (l = nn; l > 0; --l) {
                double s = std::abs(at(l - 1, l - 1)) + std::abs(at(l, l));
                if (s == 0.0) s = anorm;
                if (std::abs(at(l, l - 1)) <= eps * s) {
                    at(l, l - 1) = 0.0;
                    break;
                }
            }
            double x = at(nn, nn);
            if (l == nn) {
                put(nn--, {x + t, 0.0});
            } else {
                double y = at(nn - 1, nn - 1);
                double w = at(nn, nn - 1) * at(nn - 1, nn);
                if (l == nn - 1) {
                    const double p = 0.5 * (y - x);
                    const double q = p * p + w;
                    double z = std::sqrt(std::abs(q));
                    x += t;
                    if (q >= 0.0) {
                        z = p + sign_of(z, p);
                        put(nn - 1, {x + z, 0.0});
                        put(nn, {z != 0.0 ? x - w / z : x + z, 0.0});
                    } else {
                        put(nn, {x + p, -z});
                        put(nn - 1, {x + p, z});
                    }
                    nn -= 2;
                } else {
                    if (its == 30 || total_sweeps >= max_sweeps) {
                        std::ostringstream msg;
                        msg << "eigenvalue QR iteration did not converge: active block [" << l << ", " << nn
                            << "] after " << its << " sweeps on this block, " << total_sweeps
                            << " sweeps total (cap " << max_sweeps << ")";
                        throw NumericalError(msg.str());
                    }
                    if (its == 10 || its == 20) {
                        // exceptional shift
                        t += x;
                        for (int i = 0; i <= nn; ++i) at(i, i) -= x;
                        const double s = std::abs(at(nn, nn - 1)) + std::abs(at(nn - 1, nn - 2));
                        y = x = 0.75 * s;
                        w = -0.4375 * s * s;
                    }
                    ++its;
                    ++total_sweeps;
                    int m = nn - 2;
                    double p = 0.0, q = 0.0, r = 0.0, z = 0.0;
                    for (; m >= l; --m) {
                        z = at(m, m);
                        r = x - z;
                        double s = y - z;
                        p = (r * s - w) / at(m + 1, m) + at(m, m + 1);
                        q = at(m + 1, m + 1) - z - r - s;
                        r = at(m + 2, m + 1);
                        s = std::abs(p) + std::abs(q) + std::abs(r);
                        p /= s;
                        q /= s;
                        r /= s;
                        if (m == l) break;
                        const double u = std::abs(at(m, m - 1)) * (std::abs(q) + std::abs(r));
                        const double v =
                            std::abs(p) * (std::abs(at(m - 1, m - 1)) + std::abs(z) + std::abs(at(m + 1, m + 1)));
                        if (u <= eps * v) break;
                    }
                    for (int i = m; i < nn - 1; ++i) {
                        at(i + 2, i) = 0.0;
                        if (i != m) at(i + 2, i - 1) = 0.0;
                    }
                    for (int k = m; k < nn; ++k) {
                        if (k != m) {
                            p = at(k, k - 1);
                            q = at(k + 1, k - 1);
                            r = 0.0;
                            if (k + 1 != nn) r = at(k + 2, k - 1);
                            x = std::abs(p) + std::abs(q) + std::abs(r);
                            if (x != 0.0) {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        const double s = sign_of(std::sqrt(p * p + q * q + r * r), p);
                        if (s == 0.0) continue;
                        if (k == m) {
                            if (l != m) at(k, k - 1) = -at(k, k - 1);
                        } else {
                            at(k, k - 1) = -s * x;
                        }
                        p += s;
                        x = p / s;
                        y = q / s;
                        z = r / s;
                        q /= p;
                        r /= p;
                        for (int j = k; j <= nn; ++j) {
                            p = at(k, j) + q * at(k + 1, j);
                            if (k + 1 != nn) {
                                p += r * at(k + 2, j);
                                at(k + 2, j) -= p * z;
                            }
                            at(k + 1, j) -= p * y;
                            at(k, j) -= p * x;
                        }
                        const int mmin = nn < k + 3 ? nn : k + 3;
                        for (int i = l; i <= mmin; ++i) {
                            p = x * at(i, k) + y * at(i, k + 1);
                            if (k + 1 != nn) {
                                p += z * at(i, k + 2);
                                at(i, k + 2) -= p * r;
                            }
                            at(i, k + 1) -= p * q;
                            at(i, k) -= p;
                        }
                    }
                }
            }
        } while (l + 1 < nn);
    }
    return eig;
}

}  // namespace detail

inline constexpr std::size_t kMaxEigenDimension = 16;
inline constexpr int kMaxQrSweeps = 500;

// All eigenvalues of a square matrix (order unspecified).
inline std::vector<std::complex<double>> eigenvalues(const Matrix& m) {
    if (!m.is_square()) throw DimensionError("eigenvalues: matrix is not square");
    if (m.rows() > kMaxEigenDimension)
        throw DimensionError("eigenvalues: dimension " + std::to_string(m.rows()) + " exceeds limit " +
                             std::to_string(kMaxEigenDimension));
    if (!m.all_finite()) throw NumericalError("eigenvalues: matrix has non-finite entries");
    if (m.rows() == 0) return {};
    Matrix a = m;
    detail::balance(a);
    detail::to_hessenberg(a);
    return detail::hessenberg_qr(std::move(a), kMaxQrSweeps);
}

// max Re(lambda). Negative means Hurwitz; the stability margin is its negation.
inline double max_real_eig(const Matrix& m) {
    const auto ev = eigenvalues(m);
    if (ev.empty()) throw DimensionError("max_real_eig: empty matrix");
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& z : ev) best = std::max(best, z.real());
    return best;
}

// ============================================================================
// Rank and observability
// ============================================================================

inline constexpr double kDefaultRankTolerance = 1e-9;

// Rank by Gaussian elimination with complete pivoting. A pivot counts when it
// exceeds `rel_tol` times the largest first pivot (the largest |entry|).
inline std::size_t matrix_rank(Matrix a, double rel_tol = kDefaultRankTolerance) {
    const std::size_t rows = a.rows();
    const std::size_t cols = a.cols();
    const double scale = a.max_abs();
    if (scale == 0.0) return 0;
    const double threshold = rel_tol * scale;
    std::size_t rank = 0;
    for (std::size_t k = 0; k < std::min(rows, cols); ++k) {
        std::size_t pr = k, pc = k;
        double best = 0.0;
        for (std::size_t i = k; i < rows; ++i)
            for (std::size_t j = k; j < cols; ++j)
                if (std::abs(a(i, j)) > best) {
                    best = std::abs(a(i, j));
                    pr = i;
                    pc = j;
                }
        if (best <= threshold) break;
        for (std::size_t j = 0; j < cols; ++j) std::swap(a(k, j), a(pr, j));
        for (std::size_t i = 0; i < rows; ++i) std::swap(a(i, k), a(i, pc));
        for (std::size_t i = k + 1; i < rows; ++i) {
            const double f = a(i, k) / a(k, k);
            if (f == 0.0) continue;
            for (std::size_t j = k; j < cols; ++j) a(i, j) -= f * a(k, j);
        }
        ++rank;
    }
    return rank;
}

// Stacked [c^T; c^T S; ...; c^T S^{n-1}].
inline Matrix observability_matrix(std::span<const double> c_out, const Matrix& drift) {
    const std::size_t n = c_out.size();
    if (!drift.is_square() || drift.rows() != n)
        throw DimensionError("observability_matrix: read-out length " + std::to_string(n) +
                             " does not match drift " + std::to_string(drift.rows()) + "x" +
                             std::to_string(drift.cols()));
    Matrix obs(n, n);
    Vector row(c_out.begin(), c_out.end());
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < n; ++j) obs(k, j) = row[j];
        Vector next(n, 0.0);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < n; ++i) next[j] += row[i] * drift(i, j);
        row = std::move(next);
    }
    return obs;
}

inline std::size_t observability_rank(std::span<const double> c_out, const Matrix& drift,
                                      double rel_tol = kDefaultRankTolerance) {
    return matrix_rank(observability_matrix(c_out, drift), rel_tol);
}

// ============================================================================
// Symmetric eigendecomposition (cyclic Jacobi)
// ============================================================================

struct SymmetricEigen {
    Vector values;   // unsorted
    Matrix vectors;  // column k pairs with values[k]
};

inline SymmetricEigen symmetric_eigen(const Matrix& m, int max_sweeps = 100) {
    if (!m.is_square()) throw DimensionError("symmetric_eigen: matrix is not square");
    const std::size_t n = m.rows();
    Matrix a = m;
    Matrix v = Matrix::identity(n);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (off <= 1e-30 * std::max(1.0, a.max_abs() * a.max_abs())) {
            SymmetricEigen out{Vector(n), std::move(v)};
            for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);
            return out;
        }
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = detail::sign_of(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
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
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
    }
    throw NumericalError("symmetric_eigen: Jacobi sweeps did not converge");
}

// ============================================================================
// Fixed-step RK4
// ============================================================================

// f(t, x) -> dx/dt with dx.size() == x.size().
template <class F>
concept OdeFunction = requires(F f, double t, const Vector& x) {
    { f(t, x) } -> std::convertible_to<Vector>;
};

namespace detail {

inline void require_finite_derivative(const Vector& dx, std::size_t n, double t) {
    if (dx.size() != n)
        throw DimensionError("rk4_step: derivative length " + std::to_string(dx.size()) +
                             " differs from state length " + std::to_string(n));
    if (!all_finite(dx)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "rk4_step: non-finite derivative at t = " << t;
        throw NumericalBlowup(msg.str(), t);
    }
}

}  // namespace detail

// Classic fourth-order Runge-Kutta update x(t) -> x(t + h). The four stage
// evaluations happen in order (t, t+h/2, t+h/2, t+h).
template <OdeFunction F>
Vector rk4_step(F&& f, double t, const Vector& x, double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ParameterError("rk4_step: step size must be positive and finite");
    const std::size_t n = x.size();
    Vector tmp(n);

    const Vector k1 = f(t, x);
    detail::require_finite_derivative(k1, n, t);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];

    const Vector k2 = f(t + 0.5 * h, tmp);
    detail::require_finite_derivative(k2, n, t + 0.5 * h);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];

    const Vector k3 = f(t + 0.5 * h, tmp);
    detail::require_finite_derivative(k3, n, t + 0.5 * h);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];

    const Vector k4 = f(t + h, tmp);
    detail::require_finite_derivative(k4, n, t + h);

    Vector out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

}  // namespace asd
