#include "diffractlab/geometry.hpp"

namespace dlab {

namespace {

// Gaussian elimination with partial pivoting; n <= 4 so no blocking needed.
void lu_solve(SmallMat a, std::vector<std::vector<double>>& rhs, double* det_out) {
    const int n = a.rows();
    double det = 1.0;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (std::abs(a(piv, col)) < 1e-14) throw std::invalid_argument("singular matrix");
        if (piv != col) {
            for (int j = 0; j < n; ++j) std::swap(a(piv, j), a(col, j));
            for (auto& b : rhs) std::swap(b[static_cast<std::size_t>(piv)], b[static_cast<std::size_t>(col)]);
            det = -det;
        }
        det *= a(col, col);
        for (int r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            if (f == 0.0) continue;
            for (int j = col; j < n; ++j) a(r, j) -= f * a(col, j);
            for (auto& b : rhs) b[static_cast<std::size_t>(r)] -= f * b[static_cast<std::size_t>(col)];
        }
    }
    for (auto& b : rhs) {
        for (int r = n - 1; r >= 0; --r) {
            double s = b[static_cast<std::size_t>(r)];
            for (int j = r + 1; j < n; ++j) s -= a(r, j) * b[static_cast<std::size_t>(j)];
            b[static_cast<std::size_t>(r)] = s / a(r, r);
        }
    }
    if (det_out) *det_out = det;
}

}  // namespace

double SmallMat::determinant() const {
    if (rows_ != cols_) throw std::invalid_argument("determinant: square matrix required");
    SmallMat a = *this;
    const int n = rows_;
    double det = 1.0;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (a(piv, col) == 0.0) return 0.0;
        if (piv != col) {
            for (int j = 0; j < n; ++j) std::swap(a(piv, j), a(col, j));
            det = -det;
        }
        det *= a(col, col);
        for (int r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            for (int j = col; j < n; ++j) a(r, j) -= f * a(col, j);
        }
    }
    return det;
}

SmallMat SmallMat::inverse() const {
    if (rows_ != cols_) throw std::invalid_argument("inverse: square matrix required");
    const int n = rows_;
    std::vector<std::vector<double>> cols(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
    for (int i = 0; i < n; ++i) cols[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;
    lu_solve(*this, cols, nullptr);
    SmallMat inv(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) inv(i, j) = cols[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
    return inv;
}

}  // namespace dlab
