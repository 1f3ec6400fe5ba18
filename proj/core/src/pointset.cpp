#include "diffractlab/pointset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dlab::pointset {

namespace {

constexpr double kGenericityTol = 1e-9;

std::string format_matrix(const SmallMat& m) {
    std::ostringstream os;
    os.precision(17);
    for (int i = 0; i < m.rows(); ++i) {
        if (i) os << ';';
        for (int j = 0; j < m.cols(); ++j) {
            if (j) os << ',';
            os << m(i, j);
        }
    }
    return os.str();
}

// Ordered neighbor visitation within `cutoff`, O(N * neighbors). Points
// must be in lexicographic order (guaranteed by PointSetPatch).
template <typename F>
void for_each_close_pair(const std::vector<Vec>& pts, double cutoff, F&& fn) {
    const std::size_t n = pts.size();
    const double c2 = cutoff * cutoff * (1.0 + 4e-12) + 1e-15;
    if (n == 0) return;
    if (pts[0].dim == 1) {
        std::size_t lo = 0;
        for (std::size_t i = 0; i < n; ++i) {
            while (pts[i][0] - pts[lo][0] > cutoff * (1.0 + 1e-12) + 1e-15) ++lo;
            for (std::size_t j = lo; j < n; ++j) {
                const double dx = pts[j][0] - pts[i][0];
                if (dx > cutoff * (1.0 + 1e-12) + 1e-15) break;
                if (dx * dx <= c2) fn(i, j);
            }
        }
        return;
    }
    // d = 2: uniform cell grid with cell size = cutoff.
    const double cell = std::max(cutoff, 1e-12);
    auto cell_of = [&](const Vec& p) {
        return std::pair<std::int64_t, std::int64_t>{
            static_cast<std::int64_t>(std::floor(p[0] / cell)),
            static_cast<std::int64_t>(std::floor(p[1] / cell))};
    };
    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::size_t>> grid;
    for (std::size_t i = 0; i < n; ++i) grid[cell_of(pts[i])].push_back(i);
    for (std::size_t i = 0; i < n; ++i) {
        const auto [cx, cy] = cell_of(pts[i]);
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
            for (std::int64_t dy = -1; dy <= 1; ++dy) {
                auto it = grid.find({cx + dx, cy + dy});
                if (it == grid.end()) continue;
                for (std::size_t j : it->second) {
                    if ((pts[i] - pts[j]).norm2() <= c2) fn(i, j);
                }
            }
        }
    }
}

}  // namespace

void CutProjectScheme::validate() const {
    if (phys_dim < 1 || phys_dim > 2 || internal_dim < 1 || internal_dim > 2)
        throw std::invalid_argument("cut-project scheme: dims must satisfy d,m in {1,2}");
    const int D = total_dim();
    if (lattice_basis.rows() != D || lattice_basis.cols() != D)
        throw std::invalid_argument("cut-project scheme: basis shape mismatch");
    if (physical_projection.rows() != phys_dim || physical_projection.cols() != D)
        throw std::invalid_argument("cut-project scheme: physical projection shape mismatch");
    if (internal_projection.rows() != internal_dim || internal_projection.cols() != D)
        throw std::invalid_argument("cut-project scheme: internal projection shape mismatch");
    if (static_cast<int>(window_lo.size()) != internal_dim || static_cast<int>(window_hi.size()) != internal_dim)
        throw std::invalid_argument("cut-project scheme: window shape mismatch");
    for (int i = 0; i < internal_dim; ++i) {
        if (!(window_hi[static_cast<std::size_t>(i)] - window_lo[static_cast<std::size_t>(i)] > 2.0 * kGenericityTol))
            throw std::invalid_argument("non-generic window");
    }
    if (std::abs(lattice_basis.determinant()) < 1e-12)
        throw std::invalid_argument("cut-project scheme: degenerate embedding lattice");
    // The combined projection must split the embedding space, otherwise the
    // acceptance region is unbounded and no finite search box exists.
    SmallMat combined(D, D);
    for (int j = 0; j < D; ++j) {
        for (int i = 0; i < phys_dim; ++i) combined(i, j) = physical_projection(i, j);
        for (int i = 0; i < internal_dim; ++i) combined(phys_dim + i, j) = internal_projection(i, j);
    }
    if (std::abs(combined.determinant()) < 1e-12)
        throw std::invalid_argument("cut-project scheme: projections do not span the embedding space");
}

CutProjectScheme fibonacci_scheme(double window_offset, double window_length) {
    const double tau = (1.0 + std::sqrt(5.0)) / 2.0;
    CutProjectScheme s;
    s.phys_dim = 1;
    s.internal_dim = 1;
    s.lattice_basis = SmallMat(2, 2);
    s.lattice_basis(0, 0) = 1.0;
    s.lattice_basis(0, 1) = tau;
    s.lattice_basis(1, 0) = 1.0;
    s.lattice_basis(1, 1) = -1.0 / tau;
    s.physical_projection = SmallMat(1, 2);
    s.physical_projection(0, 0) = 1.0;
    s.internal_projection = SmallMat(1, 2);
    s.internal_projection(0, 1) = 1.0;
    if (window_length <= 0.0) window_length = tau;
    s.window_lo = {window_offset};
    s.window_hi = {window_offset + window_length};
    s.name = "fibonacci";
    s.validate();
    return s;
}

CutProjectScheme silver_scheme(double window_offset, double window_length) {
    const double lam = 1.0 + std::sqrt(2.0);
    CutProjectScheme s;
    s.phys_dim = 1;
    s.internal_dim = 1;
    s.lattice_basis = SmallMat(2, 2);
    s.lattice_basis(0, 0) = 1.0;
    s.lattice_basis(0, 1) = lam;
    s.lattice_basis(1, 0) = 1.0;
    s.lattice_basis(1, 1) = 1.0 - std::sqrt(2.0);
    s.physical_projection = SmallMat(1, 2);
    s.physical_projection(0, 0) = 1.0;
    s.internal_projection = SmallMat(1, 2);
    s.internal_projection(0, 1) = 1.0;
    if (window_length <= 0.0) window_length = lam;
    s.window_lo = {window_offset};
    s.window_hi = {window_offset + window_length};
    s.name = "silver";
    s.validate();
    return s;
}

PointSetPatch::PointSetPatch(std::vector<Vec> points, int dim, double radius, Generator generator)
    : points_(std::move(points)), dim_(dim), radius_(radius), generator_(std::move(generator)) {
    if (dim_ < 1 || dim_ > 2) throw std::invalid_argument("patch: dim must be 1 or 2");
    if (!(radius_ > 0.0)) throw std::invalid_argument("patch: radius must be positive");
    const double rtol = radius_ * (1.0 + 1e-9) + 1e-9;
    for (auto& p : points_) {
        if (p.dim != dim_) throw std::invalid_argument("patch: point dimension mismatch");
        if (p.norm() > rtol) throw std::invalid_argument("patch: point outside ball");
    }
    std::sort(points_.begin(), points_.end(), lex_less);
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (!index_.emplace(QKey(points_[i]), i).second)
            throw std::invalid_argument("patch: duplicate point");
    }
    min_spacing_ = std::numeric_limits<double>::infinity();
    if (points_.size() >= 2) {
        // Plane-sweep on the lex order: the x-gap prunes candidates.
        for (std::size_t i = 0; i < points_.size(); ++i) {
            for (std::size_t j = i + 1; j < points_.size(); ++j) {
                const double dx = points_[j][0] - points_[i][0];
                if (dx >= min_spacing_) break;
                min_spacing_ = std::min(min_spacing_, (points_[j] - points_[i]).norm());
            }
        }
    }
}

const SmallMat* PointSetPatch::lattice_basis() const {
    if (auto* g = std::get_if<LatticeGenerator>(&generator_)) return &g->basis;
    return nullptr;
}

std::optional<std::size_t> PointSetPatch::index_of(const Vec& x) const {
    auto it = index_.find(QKey(x));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::string PointSetPatch::generator_descriptor() const {
    std::ostringstream os;
    if (auto* g = std::get_if<LatticeGenerator>(&generator_)) {
        os << "lattice;basis=" << format_matrix(g->basis);
    } else {
        const auto& s = std::get<ModelSetGenerator>(generator_).scheme;
        os.precision(17);
        os << "modelset;preset=" << (s.name.empty() ? "custom" : s.name)
           << ";window_lo=" << s.window_lo[0] << ";window_hi=" << s.window_hi[0];
    }
    return os.str();
}

PointSetPatch generate_lattice_patch(const SmallMat& basis, double r) {
    if (basis.rows() != basis.cols()) throw std::invalid_argument("degenerate lattice");
    const int d = basis.rows();
    if (d < 1 || d > 2) throw std::invalid_argument("generate_lattice_patch: dim must be 1 or 2");
    if (!(r > 0.0)) throw std::invalid_argument("generate_lattice_patch: radius must be positive");
    if (std::abs(basis.determinant()) < 1e-12) throw std::invalid_argument("degenerate lattice");
    const SmallMat inv = basis.inverse();
    std::vector<std::int64_t> bound(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i)
        bound[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::floor(inv.row_norm(i) * r * (1.0 + 1e-12))) + 1;

    const double r2 = r * r * (1.0 + 4e-12) + 1e-15;
    std::vector<Vec> pts;
    if (d == 1) {
        for (std::int64_t n = -bound[0]; n <= bound[0]; ++n) {
            const double x = basis(0, 0) * static_cast<double>(n);
            if (x * x <= r2) pts.push_back(Vec(x));
        }
    } else {
        for (std::int64_t n0 = -bound[0]; n0 <= bound[0]; ++n0) {
            for (std::int64_t n1 = -bound[1]; n1 <= bound[1]; ++n1) {
                const double x = basis(0, 0) * static_cast<double>(n0) + basis(0, 1) * static_cast<double>(n1);
                const double y = basis(1, 0) * static_cast<double>(n0) + basis(1, 1) * static_cast<double>(n1);
                if (x * x + y * y <= r2) pts.push_back(Vec(x, y));
            }
        }
    }
    return PointSetPatch(std::move(pts), d, r, LatticeGenerator{basis});
}

PointSetPatch generate_model_set_patch(const CutProjectScheme& scheme, double r) {
    scheme.validate();
    if (!(r > 0.0)) throw std::invalid_argument("generate_model_set_patch: radius must be positive");
    const int d = scheme.phys_dim;
    const int m = scheme.internal_dim;
    const int D = d + m;

    const SmallMat pl = scheme.physical_projection * scheme.lattice_basis;  // d x D
    const SmallMat ql = scheme.internal_projection * scheme.lattice_basis;  // m x D

    // Integer search box: n = (T L)^{-1} w with w = (phys, internal) confined
    // to the ball x window, so |n_i| <= ||row_i((TL)^{-1})|| * ||w||_max.
    SmallMat tl(D, D);
    for (int j = 0; j < D; ++j) {
        for (int i = 0; i < d; ++i) tl(i, j) = pl(i, j);
        for (int i = 0; i < m; ++i) tl(d + i, j) = ql(i, j);
    }
    const SmallMat tl_inv = tl.inverse();
    double wnorm2 = r * r;
    for (int i = 0; i < m; ++i) {
        const double w = std::max(std::abs(scheme.window_lo[static_cast<std::size_t>(i)]),
                                  std::abs(scheme.window_hi[static_cast<std::size_t>(i)]));
        wnorm2 += w * w;
    }
    const double wnorm = std::sqrt(wnorm2);
    std::vector<std::int64_t> bound(static_cast<std::size_t>(D));
    for (int i = 0; i < D; ++i)
        bound[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::floor(tl_inv.row_norm(i) * wnorm * (1.0 + 1e-12))) + 1;

    const double r2 = r * r * (1.0 + 4e-12) + 1e-15;
    std::vector<Vec> pts;
    std::vector<std::int64_t> n(static_cast<std::size_t>(D), 0);

    auto test_candidate = [&]() {
        std::array<double, 2> internal{0.0, 0.0};
        for (int i = 0; i < m; ++i) {
            double v = 0.0;
            for (int j = 0; j < D; ++j) v += ql(i, j) * static_cast<double>(n[static_cast<std::size_t>(j)]);
            internal[static_cast<std::size_t>(i)] = v;
        }
        bool inside = true;
        for (int i = 0; i < m; ++i) {
            const double v = internal[static_cast<std::size_t>(i)];
            const double lo = scheme.window_lo[static_cast<std::size_t>(i)];
            const double hi = scheme.window_hi[static_cast<std::size_t>(i)];
            if (std::abs(v - lo) < kGenericityTol || std::abs(v - hi) < kGenericityTol)
                throw std::invalid_argument("non-generic window");
            if (!(v >= lo && v < hi)) inside = false;
        }
        if (!inside) return;
        Vec x;
        x.dim = d;
        for (int i = 0; i < d; ++i) {
            double v = 0.0;
            for (int j = 0; j < D; ++j) v += pl(i, j) * static_cast<double>(n[static_cast<std::size_t>(j)]);
            x[i] = v;
        }
        if (x.norm2() <= r2) pts.push_back(x);
    };

    // Nested box enumeration; the last axis range is cut down by the linear
    // constraints so the walk stays close to the acceptance region.
    auto last_axis_range = [&](std::int64_t& lo, std::int64_t& hi) {
        double lo_f = -static_cast<double>(bound[static_cast<std::size_t>(D - 1)]);
        double hi_f = static_cast<double>(bound[static_cast<std::size_t>(D - 1)]);
        auto clip = [&](double coeff, double base, double cmin, double cmax) {
            if (std::abs(coeff) < 1e-14) return;
            double a = (cmin - base) / coeff;
            double b = (cmax - base) / coeff;
            if (a > b) std::swap(a, b);
            lo_f = std::max(lo_f, a);
            hi_f = std::min(hi_f, b);
        };
        const double slack = 1e-6;
        for (int i = 0; i < d; ++i) {
            double base = 0.0;
            for (int j = 0; j < D - 1; ++j) base += pl(i, j) * static_cast<double>(n[static_cast<std::size_t>(j)]);
            clip(pl(i, D - 1), base, -r - slack, r + slack);
        }
        for (int i = 0; i < m; ++i) {
            double base = 0.0;
            for (int j = 0; j < D - 1; ++j) base += ql(i, j) * static_cast<double>(n[static_cast<std::size_t>(j)]);
            clip(ql(i, D - 1), base, scheme.window_lo[static_cast<std::size_t>(i)] - slack,
                 scheme.window_hi[static_cast<std::size_t>(i)] + slack);
        }
        lo = static_cast<std::int64_t>(std::ceil(lo_f));
        hi = static_cast<std::int64_t>(std::floor(hi_f));
    };

    auto recurse = [&](auto&& self, int axis) -> void {
        if (axis == D - 1) {
            std::int64_t lo, hi;
            last_axis_range(lo, hi);
            for (std::int64_t v = lo; v <= hi; ++v) {
                n[static_cast<std::size_t>(axis)] = v;
                test_candidate();
            }
            return;
        }
        const std::int64_t b = bound[static_cast<std::size_t>(axis)];
        for (std::int64_t v = -b; v <= b; ++v) {
            n[static_cast<std::size_t>(axis)] = v;
            self(self, axis + 1);
        }
    };
    recurse(recurse, 0);

    return PointSetPatch(std::move(pts), d, r, ModelSetGenerator{scheme});
}

void for_close_pairs(const PointSetPatch& patch, double cutoff,
                     const std::function<void(std::size_t, std::size_t)>& fn) {
    for_each_close_pair(patch.points(), cutoff, fn);
}

std::vector<std::pair<Vec, std::size_t>> difference_set(const PointSetPatch& patch, double cutoff) {
    if (cutoff > 2.0 * patch.radius() * (1.0 + 1e-12))
        throw std::invalid_argument("difference_set: cutoff exceeds patch diameter");
    if (cutoff < 0.0) throw std::invalid_argument("difference_set: cutoff must be nonnegative");
    std::map<QKey, std::size_t> counts;
    for_each_close_pair(patch.points(), cutoff, [&](std::size_t i, std::size_t j) {
        counts[QKey(patch.points()[i] - patch.points()[j])] += 1;
    });
    std::vector<std::pair<Vec, std::size_t>> out;
    out.reserve(counts.size());
    for (const auto& [k, c] : counts) out.emplace_back(k.vec(), c);
    return out;
}

PairTable build_pair_table(const PointSetPatch& patch, double cutoff) {
    if (cutoff > 2.0 * patch.radius() * (1.0 + 1e-12))
        throw std::invalid_argument("build_pair_table: cutoff exceeds patch diameter");
    PairTable table;
    for_each_close_pair(patch.points(), cutoff, [&](std::size_t i, std::size_t j) {
        table.pairs[QKey(patch.points()[i] - patch.points()[j])].emplace_back(
            static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
    });
    return table;
}

std::map<ClusterKey, std::vector<std::size_t>> cluster_members(const PointSetPatch& patch,
                                                               double cluster_radius) {
    if (!(cluster_radius > 0.0)) throw std::invalid_argument("cluster radius must be positive");
    const double interior = patch.radius() - cluster_radius;
    std::vector<std::vector<QKey>> clusters(patch.size());
    std::vector<bool> is_interior(patch.size(), false);
    for (std::size_t i = 0; i < patch.size(); ++i)
        is_interior[i] = patch.points()[i].norm() <= interior * (1.0 + 1e-12) + 1e-12;
    for_each_close_pair(patch.points(), cluster_radius, [&](std::size_t i, std::size_t j) {
        // cluster around i collects relative positions of its neighbours j
        if (is_interior[i]) clusters[i].push_back(QKey(patch.points()[j] - patch.points()[i]));
    });
    std::map<ClusterKey, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < patch.size(); ++i) {
        if (!is_interior[i]) continue;
        auto& rel = clusters[i];
        std::sort(rel.begin(), rel.end());
        members[ClusterKey{std::move(rel)}].push_back(i);
    }
    return members;
}

ClusterTable cluster_frequencies(const PointSetPatch& patch, double cluster_radius) {
    if (!(cluster_radius > 0.0)) throw std::invalid_argument("cluster_frequencies: radius must be positive");
    if (!(cluster_radius < patch.radius() / 2.0))
        throw std::invalid_argument("patch too small for cluster radius");
    auto members = cluster_members(patch, cluster_radius);
    ClusterTable out;
    out.radius = cluster_radius;
    for (const auto& [key, sites] : members) {
        out.entries[key].count = sites.size();
        out.interior_points += sites.size();
    }
    if (out.interior_points == 0) throw std::invalid_argument("patch too small for cluster radius");
    for (auto& [key, st] : out.entries)
        st.frequency = static_cast<double>(st.count) / static_cast<double>(out.interior_points);
    return out;
}

double density_estimate(const PointSetPatch& patch) {
    if (patch.size() == 0) return 0.0;
    return static_cast<double>(patch.size()) / ball_volume(patch.dim(), patch.radius());
}

}  // namespace dlab::pointset
