#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "qgraph/errors.hpp"

namespace qgraph {

/// Small dense row-major matrix. Sized for secular matrices (at most a few
/// dozen rows), not for large linear algebra.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), a_(rows * cols, 0.0) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

    Matrix transposed() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    std::vector<double> column(std::size_t j) const {
        std::vector<double> c(rows_);
        for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
        return c;
    }

    std::vector<double> multiply(const std::vector<double>& x) const {
        std::vector<double> y(rows_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < cols_; ++j) s += (*this)(i, j) * x[j];
            y[i] = s;
        }
        return y;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> a_;
};

/// A = U diag(sigma) V^T with sigma sorted descending. u has the shape of A
/// (tall or square), v is square over the columns.
struct SvdResult {
    std::vector<double> sigma;
    Matrix u;
    Matrix v;
    bool has_vectors = false;

    double sigma_max() const { return sigma.empty() ? 0.0 : sigma.front(); }
    double sigma_min() const { return sigma.empty() ? 0.0 : sigma.back(); }
};

namespace detail {

inline double sign_of(double a, double b) { return b >= 0.0 ? std::abs(a) : -std::abs(a); }

} // namespace detail

/// Golub-Reinsch SVD: Householder bidiagonalization followed by implicit-shift
/// QR iterations on the bidiagonal. Intended for matrices up to 64x64.
inline SvdResult svd_decompose(Matrix a, bool want_vectors = true) {
    using detail::sign_of;

    bool transposed = false;
    if (a.rows() < a.cols()) {
        a = a.transposed();
        transposed = true;
    }
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    constexpr double eps = std::numeric_limits<double>::epsilon();

    std::vector<double> w(n, 0.0), rv1(n, 0.0);
    Matrix v(n, n);

    double g = 0.0, scale = 0.0, anorm = 0.0;

    // Householder reduction to bidiagonal form.
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t l = i + 1;
        rv1[i] = scale * g;
        g = scale = 0.0;
        if (i < m) {
            for (std::size_t k = i; k < m; ++k) scale += std::abs(a(k, i));
            if (scale != 0.0) {
                double s = 0.0;
                for (std::size_t k = i; k < m; ++k) {
                    a(k, i) /= scale;
                    s += a(k, i) * a(k, i);
                }
                double f = a(i, i);
                g = -sign_of(std::sqrt(s), f);
                const double h = f * g - s;
                a(i, i) = f - g;
                for (std::size_t j = l; j < n; ++j) {
                    double s2 = 0.0;
                    for (std::size_t k = i; k < m; ++k) s2 += a(k, i) * a(k, j);
                    const double f2 = s2 / h;
                    for (std::size_t k = i; k < m; ++k) a(k, j) += f2 * a(k, i);
                }
                for (std::size_t k = i; k < m; ++k) a(k, i) *= scale;
            }
        }
        w[i] = scale * g;
        g = scale = 0.0;
        if (i < m && l != n) {
            for (std::size_t k = l; k < n; ++k) scale += std::abs(a(i, k));
            if (scale != 0.0) {
                double s = 0.0;
                for (std::size_t k = l; k < n; ++k) {
                    a(i, k) /= scale;
                    s += a(i, k) * a(i, k);
                }
                double f = a(i, l);
                g = -sign_of(std::sqrt(s), f);
                const double h = f * g - s;
                a(i, l) = f - g;
                for (std::size_t k = l; k < n; ++k) rv1[k] = a(i, k) / h;
                for (std::size_t j = l; j < m; ++j) {
                    double s2 = 0.0;
                    for (std::size_t k = l; k < n; ++k) s2 += a(j, k) * a(i, k);
                    for (std::size_t k = l; k < n; ++k) a(j, k) += s2 * rv1[k];
                }
                for (std::size_t k = l; k < n; ++k) a(i, k) *= scale;
            }
        }
        anorm = std::max(anorm, std::abs(w[i]) + std::abs(rv1[i]));
    }

    // Accumulate right-hand transformations.
    if (want_vectors) {
        for (std::size_t ii = n; ii-- > 0;) {
            const std::size_t i = ii, l = ii + 1;
            if (l < n) {
                if (g != 0.0) {
                    for (std::size_t j = l; j < n; ++j) v(j, i) = (a(i, j) / a(i, l)) / g;
                    for (std::size_t j = l; j < n; ++j) {
                        double s = 0.0;
                        for (std::size_t k = l; k < n; ++k) s += a(i, k) * v(k, j);
                        for (std::size_t k = l; k < n; ++k) v(k, j) += s * v(k, i);
                    }
                }
                for (std::size_t j = l; j < n; ++j) v(i, j) = v(j, i) = 0.0;
            }
            v(i, i) = 1.0;
            g = rv1[i];
        }
    }

    // Accumulate left-hand transformations (in place in a).
    if (want_vectors) {
        for (std::size_t ii = std::min(m, n); ii-- > 0;) {
            const std::size_t i = ii, l = ii + 1;
            g = w[i];
            for (std::size_t j = l; j < n; ++j) a(i, j) = 0.0;
            if (g != 0.0) {
                g = 1.0 / g;
                for (std::size_t j = l; j < n; ++j) {
                    double s = 0.0;
                    for (std::size_t k = l; k < m; ++k) s += a(k, i) * a(k, j);
                    const double f = (s / a(i, i)) * g;
                    for (std::size_t k = i; k < m; ++k) a(k, j) += f * a(k, i);
                }
                for (std::size_t j = i; j < m; ++j) a(j, i) *= g;
            } else {
                for (std::size_t j = i; j < m; ++j) a(j, i) = 0.0;
            }
            a(i, i) += 1.0;
        }
    }

    // Diagonalize the bidiagonal form.
    for (std::size_t kk = n; kk-- > 0;) {
        const std::size_t k = kk;
        for (int its = 0;; ++its) {
            bool need_cancel = true;
            std::size_t l = k + 1, nm = 0;
            while (l-- > 0) {
                if (l == 0 || std::abs(rv1[l]) <= eps * anorm) {
                    need_cancel = false;
                    break;
                }
                nm = l - 1;
                if (std::abs(w[nm]) <= eps * anorm) break;
            }
            if (need_cancel) {
                double c = 0.0, s = 1.0;
                for (std::size_t i = l; i <= k; ++i) {
                    double f = s * rv1[i];
                    rv1[i] = c * rv1[i];
                    if (std::abs(f) <= eps * anorm) break;
                    g = w[i];
                    double h = std::hypot(f, g);
                    w[i] = h;
                    h = 1.0 / h;
                    c = g * h;
                    s = -f * h;
                    if (want_vectors) {
                        for (std::size_t j = 0; j < m; ++j) {
                            const double y = a(j, nm), z = a(j, i);
                            a(j, nm) = y * c + z * s;
                            a(j, i) = z * c - y * s;
                        }
                    }
                }
            }
            double z = w[k];
            if (l == k) {
                if (z < 0.0) {
                    w[k] = -z;
                    if (want_vectors)
                        for (std::size_t j = 0; j < n; ++j) v(j, k) = -v(j, k);
                }
                break;
            }
            if (its >= 60)
                throw ConvergenceFailure("svd failed to converge after 60 iterations");

            double x = w[l];
            const std::size_t km1 = k - 1;
            double y = w[km1];
            g = rv1[km1];
            double h = rv1[k];
            double f = ((y - z) * (y + z) + (g - h) * (g + h)) / (2.0 * h * y);
            g = std::hypot(f, 1.0);
            f = ((x - z) * (x + z) + h * ((y / (f + sign_of(g, f))) - h)) / x;
            double c = 1.0, s = 1.0;
            for (std::size_t j = l; j <= km1; ++j) {
                const std::size_t i = j + 1;
                g = rv1[i];
                y = w[i];
                h = s * g;
                g = c * g;
                z = std::hypot(f, h);
                rv1[j] = z;
                c = f / z;
                s = h / z;
                f = x * c + g * s;
                g = g * c - x * s;
                h = y * s;
                y *= c;
                if (want_vectors) {
                    for (std::size_t jj = 0; jj < n; ++jj) {
                        const double xx = v(jj, j), zz = v(jj, i);
                        v(jj, j) = xx * c + zz * s;
                        v(jj, i) = zz * c - xx * s;
                    }
                }
                z = std::hypot(f, h);
                w[j] = z;
                if (z != 0.0) {
                    z = 1.0 / z;
                    c = f * z;
                    s = h * z;
                }
                f = c * g + s * y;
                x = c * y - s * g;
                if (want_vectors) {
                    for (std::size_t jj = 0; jj < m; ++jj) {
                        const double yy = a(jj, j), zz = a(jj, i);
                        a(jj, j) = yy * c + zz * s;
                        a(jj, i) = zz * c - yy * s;
                    }
                }
            }
            rv1[l] = 0.0;
            rv1[k] = f;
            w[k] = x;
        }
    }

    // Sort singular values descending, permuting vectors to match.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return w[i] > w[j]; });

    SvdResult out;
    out.sigma.resize(n);
    out.has_vectors = want_vectors;
    if (want_vectors) {
        out.u = Matrix(m, n);
        out.v = Matrix(n, n);
    }
    for (std::size_t jj = 0; jj < n; ++jj) {
        const std::size_t src = order[jj];
        out.sigma[jj] = w[src];
        if (want_vectors) {
            for (std::size_t i = 0; i < m; ++i) out.u(i, jj) = a(i, src);
            for (std::size_t i = 0; i < n; ++i) out.v(i, jj) = v(i, src);
        }
    }
    if (transposed && want_vectors) std::swap(out.u, out.v);
    return out;
}

/// The `count` smallest singular values, ascending.
inline std::vector<double> smallest_singular_values(const Matrix& m, int count) {
    SvdResult r = svd_decompose(m, /*want_vectors=*/false);
    std::vector<double> asc(r.sigma.rbegin(), r.sigma.rend());
    if (count < static_cast<int>(asc.size())) asc.resize(static_cast<std::size_t>(count));
    return asc;
}

/// Smallest singular value only; the workhorse of the eigenvalue scan.
inline double sigma_min(const Matrix& m) {
    SvdResult r = svd_decompose(m, /*want_vectors=*/false);
    return r.sigma_min();
}

} // namespace qgraph
