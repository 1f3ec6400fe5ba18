#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace dlab {

using Complex = std::complex<double>;

// Coordinate quantum used for all decidable-equality keys (difference
// vectors, cluster positions). Far below the minimal spacing of any
// shipped point set.
inline constexpr double kQuantum = 1e-9;

inline std::int64_t quantize(double v) {
    return std::llround(v / kQuantum);
}

// Point or difference vector in d = 1 or 2 dimensions.
struct Vec {
    std::array<double, 2> c{0.0, 0.0};
    int dim = 1;

    Vec() = default;
    explicit Vec(double x) : c{x, 0.0}, dim(1) {}
    Vec(double x, double y) : c{x, y}, dim(2) {}

    double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }
    double& operator[](int i) { return c[static_cast<std::size_t>(i)]; }

    double norm2() const {
        double s = 0.0;
        for (int i = 0; i < dim; ++i) s += c[static_cast<std::size_t>(i)] * c[static_cast<std::size_t>(i)];
        return s;
    }
    double norm() const { return std::sqrt(norm2()); }

    friend Vec operator+(Vec a, const Vec& b) {
        for (int i = 0; i < a.dim; ++i) a[i] += b[i];
        return a;
    }
    friend Vec operator-(Vec a, const Vec& b) {
        for (int i = 0; i < a.dim; ++i) a[i] -= b[i];
        return a;
    }
    friend Vec operator-(Vec a) {
        for (int i = 0; i < a.dim; ++i) a[i] = -a[i];
        return a;
    }
    friend Vec operator*(double s, Vec a) {
        for (int i = 0; i < a.dim; ++i) a[i] *= s;
        return a;
    }
    friend double dot(const Vec& a, const Vec& b) {
        double s = 0.0;
        for (int i = 0; i < a.dim; ++i) s += a[i] * b[i];
        return s;
    }
};

inline double distance(const Vec& a, const Vec& b) { return (a - b).norm(); }

// Lexicographic order on coordinates; the canonical total order for patch
// points and table keys.
inline bool lex_less(const Vec& a, const Vec& b) {
    for (int i = 0; i < a.dim; ++i) {
        if (a[i] < b[i]) return true;
        if (a[i] > b[i]) return false;
    }
    return false;
}

// Quantized key making float vectors usable as exact map keys.
struct QKey {
    std::array<std::int64_t, 2> q{0, 0};
    int dim = 1;

    QKey() = default;
    explicit QKey(const Vec& v) : dim(v.dim) {
        for (int i = 0; i < v.dim; ++i) q[static_cast<std::size_t>(i)] = quantize(v[i]);
    }

    Vec vec() const {
        Vec v;
        v.dim = dim;
        for (int i = 0; i < dim; ++i) v[i] = static_cast<double>(q[static_cast<std::size_t>(i)]) * kQuantum;
        return v;
    }

    QKey negated() const {
        QKey k = *this;
        for (int i = 0; i < dim; ++i) k.q[static_cast<std::size_t>(i)] = -k.q[static_cast<std::size_t>(i)];
        return k;
    }

    bool is_zero() const {
        for (int i = 0; i < dim; ++i)
            if (q[static_cast<std::size_t>(i)] != 0) return false;
        return true;
    }

    auto operator<=>(const QKey&) const = default;
};

// Lebesgue volume of the d-ball of radius r.
inline double ball_volume(int dim, double r) {
    switch (dim) {
        case 1: return 2.0 * r;
        case 2: return std::numbers::pi * r * r;
        default: throw std::invalid_argument("ball_volume: dim must be 1 or 2");
    }
}

// Dense row-major matrix for the small (<= 4x4) systems that show up in
// lattice and cut-and-project generators.
class SmallMat {
public:
    SmallMat() = default;
    SmallMat(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows * cols), 0.0) {
        if (rows < 1 || rows > 4 || cols < 1 || cols > 4)
            throw std::invalid_argument("SmallMat: dimensions must be in [1,4]");
    }

    static SmallMat identity(int n) {
        SmallMat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i * cols_ + j)]; }
    double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i * cols_ + j)]; }

    SmallMat transpose() const {
        SmallMat t(cols_, rows_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    friend SmallMat operator*(const SmallMat& a, const SmallMat& b) {
        if (a.cols_ != b.rows_) throw std::invalid_argument("SmallMat: shape mismatch");
        SmallMat c(a.rows_, b.cols_);
        for (int i = 0; i < a.rows_; ++i)
            for (int k = 0; k < a.cols_; ++k)
                for (int j = 0; j < b.cols_; ++j) c(i, j) += a(i, k) * b(k, j);
        return c;
    }

    std::vector<double> apply(const std::vector<double>& x) const {
        if (static_cast<int>(x.size()) != cols_) throw std::invalid_argument("SmallMat: apply shape mismatch");
        std::vector<double> y(static_cast<std::size_t>(rows_), 0.0);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) y[static_cast<std::size_t>(i)] += (*this)(i, j) * x[static_cast<std::size_t>(j)];
        return y;
    }

    double determinant() const;
    SmallMat inverse() const;

    double row_norm(int i) const {
        double s = 0.0;
        for (int j = 0; j < cols_; ++j) s += (*this)(i, j) * (*this)(i, j);
        return std::sqrt(s);
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> a_;
};

}  // namespace dlab
