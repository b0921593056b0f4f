#pragma once

// Guided TE modes of layered slab waveguides.
//
// The scalar wave equation  { d^2/dx^2 + k^2 n^2(x) - beta^2 } Psi = 0
// with continuous Psi, Psi' and decay in both outer claddings has a
// discrete set of solutions (beta_j, Psi_j).  Two solver paths:
//
//   - symmetric three-layer stacks: exact parity reduction.  With
//     u = kappa W/2, V = (k W/2) sqrt(n1^2 - n2^2) the j-th mode solves
//     u - atan2(sqrt(V^2 - u^2), u) = j pi/2, one root per pi/2 window,
//     so the count is 1 + floor(2V/pi) and no root can be missed even
//     for very thick cores (needed by the effective-index reduction).
//
//   - general stacks: transfer-matrix dispersion function on a dense
//     n_eff scan, each sign change bisected to |d n_eff| < 1e-12.
//
// Profiles are assembled analytically per layer (cos/sin in guiding
// layers, decaying exponentials in the claddings) and only then sampled,
// so downstream overlap integrals carry no eigensolver discretization
// error.  Sampled profiles are normalized in the grid inner product and
// pairwise symmetrically orthonormalized; the correction is O(1e-7) and
// makes modal decompositions exactly self-consistent.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "wgqsim/common.hpp"
#include "wgqsim/grid.hpp"

namespace wgqsim {

struct SlabLayer {
    double index = 1.0;
    double thickness = 0.0; // ignored for the two outer (semi-infinite) layers
};

/// One waveguide core for SlabGeometry::from_cores.
struct CoreSpec {
    double center = 0.0;
    double width = 0.0;
    double index = 1.0;
};

struct SlabGeometry {
    std::vector<SlabLayer> layers; // left to right; first/last are semi-infinite claddings
    double wavelength = 1.0;       // free-space, um
    double x_left = 0.0;           // x of the interface between layers[0] and layers[1]

    static SlabGeometry symmetric(double n_core, double n_clad, double width,
                                  double wavelength, double center = 0.0) {
        SlabGeometry g;
        g.layers = {{n_clad, 0.0}, {n_core, width}, {n_clad, 0.0}};
        g.wavelength = wavelength;
        g.x_left = center - 0.5 * width;
        g.validate();
        return g;
    }

    /// Build a stack from parallel cores on a common cladding background.
    /// Cores must not overlap; zero gaps merge equal-index cores.
    static SlabGeometry from_cores(std::vector<CoreSpec> cores, double n_clad,
                                   double wavelength) {
        if (cores.empty()) throw GeometryError("from_cores: no cores");
        std::sort(cores.begin(), cores.end(),
                  [](const CoreSpec& a, const CoreSpec& b) { return a.center < b.center; });
        SlabGeometry g;
        g.wavelength = wavelength;
        g.layers.push_back({n_clad, 0.0});
        g.x_left = cores.front().center - 0.5 * cores.front().width;
        double cursor = g.x_left;
        for (std::size_t i = 0; i < cores.size(); ++i) {
            const double lo = cores[i].center - 0.5 * cores[i].width;
            const double hi = cores[i].center + 0.5 * cores[i].width;
            const double gap = lo - cursor;
            if (gap < -1e-12)
                throw GeometryError("from_cores: cores overlap");
            if (gap > 1e-12) {
                g.layers.push_back({n_clad, gap});
                g.layers.push_back({cores[i].index, hi - lo});
            } else if (i > 0 && std::abs(g.layers.back().index - cores[i].index) < 1e-15) {
                g.layers.back().thickness += hi - lo; // merge touching equal cores
            } else {
                g.layers.push_back({cores[i].index, hi - lo});
            }
            cursor = hi;
        }
        g.layers.push_back({n_clad, 0.0});
        g.validate();
        return g;
    }

    void validate() const {
        if (layers.size() < 3) throw GeometryError("SlabGeometry: need at least 3 layers");
        if (!(wavelength > 0.0)) throw GeometryError("SlabGeometry: wavelength must be > 0");
        for (const auto& l : layers)
            if (!(l.index > 0.0)) throw GeometryError("SlabGeometry: indices must be > 0");
        for (std::size_t i = 1; i + 1 < layers.size(); ++i)
            if (!(layers[i].thickness > 0.0))
                throw GeometryError("SlabGeometry: interior layers need thickness > 0");
    }

    double k() const { return 2.0 * kPi / wavelength; }

    double n_max_interior() const {
        double m = 0.0;
        for (std::size_t i = 1; i + 1 < layers.size(); ++i) m = std::max(m, layers[i].index);
        return m;
    }
    double n_clad_max() const { return std::max(layers.front().index, layers.back().index); }

    double x_right() const {
        double x = x_left;
        for (std::size_t i = 1; i + 1 < layers.size(); ++i) x += layers[i].thickness;
        return x;
    }
    double center() const { return 0.5 * (x_left + x_right()); }

    /// Interface positions, left to right (size = layers.size() - 1).
    std::vector<double> interfaces() const {
        std::vector<double> xs;
        double x = x_left;
        xs.push_back(x);
        for (std::size_t i = 1; i + 1 < layers.size(); ++i) {
            x += layers[i].thickness;
            xs.push_back(x);
        }
        return xs;
    }

    bool symmetric_three_layer(double tol = 1e-12) const {
        return layers.size() == 3 &&
               std::abs(layers.front().index - layers.back().index) <= tol;
    }

    /// Palindromic stack (same layers read from either side).
    bool mirror_symmetric(double tol = 1e-12) const {
        const std::size_t n = layers.size();
        for (std::size_t i = 0; i < n / 2; ++i) {
            const auto& a = layers[i];
            const auto& b = layers[n - 1 - i];
            if (std::abs(a.index - b.index) > tol) return false;
            if (i != 0 && std::abs(a.thickness - b.thickness) > tol) return false;
        }
        return true;
    }

    double index_at(double x) const {
        if (x < x_left) return layers.front().index;
        double hi = x_left;
        for (std::size_t i = 1; i + 1 < layers.size(); ++i) {
            hi += layers[i].thickness;
            if (x < hi) return layers[i].index;
        }
        return layers.back().index;
    }

    /// Exact average of n^2 over [x_lo, x_hi]; interface cells get the
    /// sub-cell area weighting the finite-difference operators expect.
    double index_sq_cell_average(double x_lo, double x_hi) const {
        if (!(x_hi > x_lo)) return index_at(x_lo) * index_at(x_lo);
        double acc = 0.0;
        double lo = x_left;
        // left semi-infinite region
        {
            const double seg = std::min(x_hi, lo) - x_lo;
            if (seg > 0.0) acc += seg * layers.front().index * layers.front().index;
        }
        for (std::size_t i = 1; i + 1 < layers.size(); ++i) {
            const double hi = lo + layers[i].thickness;
            const double seg = std::min(x_hi, hi) - std::max(x_lo, lo);
            if (seg > 0.0) acc += seg * layers[i].index * layers[i].index;
            lo = hi;
        }
        {
            const double seg = x_hi - std::max(x_lo, lo);
            if (seg > 0.0) acc += seg * layers.back().index * layers.back().index;
        }
        return acc / (x_hi - x_lo);
    }
};

/// Normalized frequency of a symmetric three-layer slab.
inline double v_number(const SlabGeometry& g) {
    if (!g.symmetric_three_layer())
        throw SolverError("v_number: defined for symmetric three-layer stacks only");
    const double n1 = g.layers[1].index;
    const double n2 = g.layers[0].index;
    if (!(n1 > n2)) throw SolverError("v_number: no guidance (core index <= cladding)");
    return 0.5 * g.k() * g.layers[1].thickness * std::sqrt(n1 * n1 - n2 * n2);
}

/// Independent mode-count cross-check: 1 + floor(2V/pi).
inline std::size_t mode_count_oracle(const SlabGeometry& g) {
    if (!g.symmetric_three_layer())
        throw SolverError("mode_count_oracle: non-symmetric stack unsupported");
    const double v = v_number(g); // throws on zero contrast
    return 1 + static_cast<std::size_t>(std::floor(2.0 * v / kPi));
}

/// Piecewise-analytic mode profile: cos/sin in oscillatory layers,
/// cosh/sinh in evanescent ones, pure decay in the outer claddings.
class SlabModeShape {
public:
    struct Piece {
        double x0 = 0.0;      // left edge of the piece
        double kappa = 0.0;   // transverse wavenumber (>0: oscillatory, <0: |kappa| = decay rate)
        double a = 0.0;       // cos / cosh coefficient
        double b = 0.0;       // sin / sinh coefficient (times 1/q or 1/gamma)
    };

    SlabModeShape() = default;
    SlabModeShape(std::vector<Piece> pieces, std::vector<double> edges,
                  double gamma_left, double gamma_right, double left_amp, double right_amp,
                  double x_left, double x_right)
        : pieces_(std::move(pieces)), edges_(std::move(edges)),
          gamma_left_(gamma_left), gamma_right_(gamma_right),
          left_amp_(left_amp), right_amp_(right_amp), x_left_(x_left), x_right_(x_right) {}

    double value(double x) const {
        if (x < x_left_) return left_amp_ * std::exp(gamma_left_ * (x - x_left_));
        if (x >= x_right_) return right_amp_ * std::exp(-gamma_right_ * (x - x_right_));
        const Piece& p = piece_at(x);
        const double t = x - p.x0;
        if (p.kappa > 0.0) return p.a * std::cos(p.kappa * t) + p.b * std::sin(p.kappa * t);
        const double gmm = -p.kappa;
        return p.a * std::cosh(gmm * t) + p.b * std::sinh(gmm * t);
    }

    double derivative(double x) const {
        if (x < x_left_) return gamma_left_ * left_amp_ * std::exp(gamma_left_ * (x - x_left_));
        if (x >= x_right_) return -gamma_right_ * right_amp_ * std::exp(-gamma_right_ * (x - x_right_));
        const Piece& p = piece_at(x);
        const double t = x - p.x0;
        if (p.kappa > 0.0)
            return p.kappa * (-p.a * std::sin(p.kappa * t) + p.b * std::cos(p.kappa * t));
        const double gmm = -p.kappa;
        return gmm * (p.a * std::sinh(gmm * t) + p.b * std::cosh(gmm * t));
    }

    void scale(double s) {
        for (auto& p : pieces_) { p.a *= s; p.b *= s; }
        left_amp_ *= s;
        right_amp_ *= s;
    }

private:
    const Piece& piece_at(double x) const {
        std::size_t i = 0;
        while (i + 1 < edges_.size() && x >= edges_[i + 1]) ++i;
        return pieces_[i];
    }

    std::vector<Piece> pieces_; // one per interior layer
    std::vector<double> edges_; // interior layer left edges (size == pieces_.size())
    double gamma_left_ = 0.0, gamma_right_ = 0.0;
    double left_amp_ = 0.0, right_amp_ = 0.0;
    double x_left_ = 0.0, x_right_ = 0.0;
};

struct SlabMode {
    double beta = 0.0;       // rad/um
    double n_eff = 0.0;      // beta / k
    bool near_cutoff = false;
    ComplexField profile;    // real-valued, normalized on the grid
    SlabModeShape shape;     // analytic evaluator (pre-orthonormalization scale)
};

struct ModeSet {
    SlabGeometry geometry;
    TransverseGrid grid;
    std::vector<SlabMode> modes;
};

namespace detail {

/// Transfer-matrix dispersion function at given n_eff; the state is
/// rescaled per layer so thick stacks cannot overflow.
inline double slab_dispersion(const SlabGeometry& g, double n_eff) {
    const double k = g.k();
    const double gl = k * std::sqrt(std::max(0.0, n_eff * n_eff -
                                             g.layers.front().index * g.layers.front().index));
    const double gr = k * std::sqrt(std::max(0.0, n_eff * n_eff -
                                             g.layers.back().index * g.layers.back().index));
    double psi = 1.0, dpsi = gl;
    for (std::size_t i = 1; i + 1 < g.layers.size(); ++i) {
        const double t = g.layers[i].thickness;
        const double q2 = k * k * (g.layers[i].index * g.layers[i].index - n_eff * n_eff);
        double a, b, c, d; // [[a, b], [c, d]] propagates (psi, psi')
        if (q2 >= 0.0) {
            const double q = std::sqrt(q2);
            if (q * t < 1e-12) { a = d = 1.0; b = t; c = -q2 * t; }
            else { a = d = std::cos(q * t); b = std::sin(q * t) / q; c = -q * std::sin(q * t); }
        } else {
            const double gmm = std::sqrt(-q2);
            a = d = std::cosh(gmm * t);
            b = std::sinh(gmm * t) / gmm;
            c = gmm * std::sinh(gmm * t);
        }
        const double npsi = a * psi + b * dpsi;
        const double ndpsi = c * psi + d * dpsi;
        psi = npsi;
        dpsi = ndpsi;
        const double scale = std::max(std::abs(psi), std::abs(dpsi) / k);
        if (scale > 0.0) { psi /= scale; dpsi /= scale; }
    }
    return dpsi + gr * psi;
}

struct RawRoot {
    double n_eff = 0.0;
};

/// Half-stack propagation for palindromic geometries: returns Psi'(center)
/// for even parity and Psi(center) for odd parity.  Even/odd supermode
/// pairs of well-separated guide pairs are nearly degenerate; splitting
/// parities keeps each root isolated on its own scan.
inline double slab_dispersion_parity(const SlabGeometry& g, double n_eff, bool odd) {
    const double k = g.k();
    const double gl = k * std::sqrt(std::max(0.0, n_eff * n_eff -
                                             g.layers.front().index * g.layers.front().index));
    const double xc = g.center();
    double psi = 1.0, dpsi = gl;
    double x = g.x_left;
    for (std::size_t i = 1; i + 1 < g.layers.size() && x < xc; ++i) {
        const double t = std::min(g.layers[i].thickness, xc - x);
        const double q2 = k * k * (g.layers[i].index * g.layers[i].index - n_eff * n_eff);
        double a, b, c, d;
        if (q2 >= 0.0) {
            const double q = std::sqrt(q2);
            if (q * t < 1e-12) { a = d = 1.0; b = t; c = -q2 * t; }
            else { a = d = std::cos(q * t); b = std::sin(q * t) / q; c = -q * std::sin(q * t); }
        } else {
            const double gmm = std::sqrt(-q2);
            a = d = std::cosh(gmm * t);
            b = std::sinh(gmm * t) / gmm;
            c = gmm * std::sinh(gmm * t);
        }
        const double npsi = a * psi + b * dpsi;
        const double ndpsi = c * psi + d * dpsi;
        psi = npsi;
        dpsi = ndpsi;
        const double scale = std::max(std::abs(psi), std::abs(dpsi) / k);
        if (scale > 0.0) { psi /= scale; dpsi /= scale; }
        x += t;
    }
    return odd ? psi : dpsi;
}

/// Scan + bisect a scalar dispersion function over the guided n_eff range.
template <typename Fn>
inline void scan_and_bisect(const SlabGeometry& g, Fn&& fn, std::vector<RawRoot>& roots) {
    const double n_lo = g.n_clad_max();
    const double n_hi = g.n_max_interior();
    if (!(n_hi > n_lo)) return;
    const int n_scan = 1000;
    const double inset = (n_hi - n_lo) * 1e-9;
    const double a = n_lo + inset, b = n_hi - inset;
    double x_prev = a;
    double f_prev = fn(a);
    for (int i = 1; i <= n_scan; ++i) {
        const double x = a + (b - a) * static_cast<double>(i) / n_scan;
        const double f = fn(x);
        if (f_prev == 0.0) roots.push_back({x_prev});
        else if (f_prev * f < 0.0) {
            double lo = x_prev, hi = x, flo = f_prev;
            for (int it = 0; it < 80 && hi - lo > 1e-13; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double fm = fn(mid);
                if (flo * fm <= 0.0) hi = mid;
                else { lo = mid; flo = fm; }
            }
            roots.push_back({0.5 * (lo + hi)});
        }
        x_prev = x;
        f_prev = f;
    }
}

/// Dense scan + bisection over the guided range of a general stack.
inline std::vector<RawRoot> find_roots_general(const SlabGeometry& g) {
    std::vector<RawRoot> roots;
    if (g.mirror_symmetric()) {
        scan_and_bisect(g, [&](double n) { return slab_dispersion_parity(g, n, false); }, roots);
        scan_and_bisect(g, [&](double n) { return slab_dispersion_parity(g, n, true); }, roots);
    } else {
        scan_and_bisect(g, [&](double n) { return slab_dispersion(g, n); }, roots);
    }
    std::sort(roots.begin(), roots.end(),
              [](const RawRoot& p, const RawRoot& q) { return p.n_eff > q.n_eff; });
    return roots;
}

/// Parity reduction for symmetric three-layer stacks: the j-th root of
/// u - atan2(sqrt(V^2-u^2), u) = j pi/2 in (j pi/2, min((j+1) pi/2, V)].
inline std::vector<RawRoot> find_roots_symmetric(const SlabGeometry& g) {
    const double v = v_number(g);
    const double n1 = g.layers[1].index;
    const double k = g.k();
    const double half_w = 0.5 * g.layers[1].thickness;
    const std::size_t count = mode_count_oracle(g);
    std::vector<RawRoot> roots;
    for (std::size_t j = 0; j < count; ++j) {
        const double target = 0.5 * kPi * static_cast<double>(j);
        auto fn = [&](double u) {
            const double w2 = std::max(0.0, v * v - u * u);
            return u - std::atan2(std::sqrt(w2), u) - target;
        };
        double lo = target, hi = std::min(target + 0.5 * kPi, v);
        for (int it = 0; it < 200 && hi - lo > v * 1e-16; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (fn(mid) < 0.0) lo = mid;
            else hi = mid;
        }
        const double u = 0.5 * (lo + hi);
        const double kappa = u / half_w;
        const double n_eff = std::sqrt(n1 * n1 - (kappa / k) * (kappa / k));
        roots.push_back({n_eff});
    }
    return roots; // already in descending n_eff order (u ascending)
}

/// Reconstruct the piecewise-analytic profile for a converged root.
inline SlabModeShape build_shape(const SlabGeometry& g, double n_eff) {
    const double k = g.k();
    const double gl = k * std::sqrt(std::max(0.0, n_eff * n_eff -
                                             g.layers.front().index * g.layers.front().index));
    const double gr = k * std::sqrt(std::max(0.0, n_eff * n_eff -
                                             g.layers.back().index * g.layers.back().index));
    std::vector<SlabModeShape::Piece> pieces;
    std::vector<double> edges;
    double psi = 1.0, dpsi = gl;
    double x = g.x_left;
    for (std::size_t i = 1; i + 1 < g.layers.size(); ++i) {
        const double t = g.layers[i].thickness;
        const double q2 = k * k * (g.layers[i].index * g.layers[i].index - n_eff * n_eff);
        SlabModeShape::Piece p;
        p.x0 = x;
        if (q2 >= 0.0) {
            const double q = std::sqrt(std::max(q2, 1e-300));
            p.kappa = q;
            p.a = psi;
            p.b = dpsi / q;
            psi = p.a * std::cos(q * t) + p.b * std::sin(q * t);
            dpsi = q * (-p.a * std::sin(q * t) + p.b * std::cos(q * t));
        } else {
            const double gmm = std::sqrt(-q2);
            p.kappa = -gmm;
            p.a = psi;
            p.b = dpsi / gmm;
            psi = p.a * std::cosh(gmm * t) + p.b * std::sinh(gmm * t);
            dpsi = gmm * (p.a * std::sinh(gmm * t) + p.b * std::cosh(gmm * t));
        }
        pieces.push_back(p);
        edges.push_back(x);
        x += t;
    }
    // outer claddings: pure decay on both sides (the residual growing
    // component at a 1e-13-converged root is discarded here)
    return SlabModeShape(std::move(pieces), std::move(edges), gl, gr,
                         /*left_amp=*/1.0, /*right_amp=*/psi, g.x_left, x);
}

} // namespace detail

/// Fraction of modal power inside the guiding (non-background) layers.
inline double confinement_factor(const SlabMode& mode, const SlabGeometry& g) {
    const auto& grid = mode.profile.grid;
    const double dx = grid.dx();
    const double n_bg = std::max(g.layers.front().index, g.layers.back().index);
    double acc = 0.0, tot = 0.0;
    double lo = g.x_left;
    std::vector<std::pair<double, double>> cores;
    for (std::size_t i = 1; i + 1 < g.layers.size(); ++i) {
        const double hi = lo + g.layers[i].thickness;
        if (g.layers[i].index > n_bg + 1e-12) cores.emplace_back(lo, hi);
        lo = hi;
    }
    for (std::size_t i = 0; i < grid.n_points; ++i) {
        const double w = (i == 0 || i == grid.n_points - 1) ? 0.5 : 1.0;
        const double p = w * std::norm(mode.profile.samples[i]) * dx;
        tot += p;
        const double xi = grid.x(i);
        for (const auto& [a, b] : cores)
            if (xi >= a && xi <= b) { acc += p; break; }
    }
    return tot > 0.0 ? acc / tot : 0.0;
}

/// Solve all guided TE modes (up to max_modes), strongest confinement first.
inline ModeSet solve_te_modes(const SlabGeometry& geometry, const TransverseGrid& grid,
                              std::size_t max_modes = std::numeric_limits<std::size_t>::max()) {
    geometry.validate();
    if (!(geometry.n_max_interior() > geometry.n_clad_max()))
        throw SolverError("solve_te_modes: no guided modes (no index contrast)");

    const auto roots = geometry.symmetric_three_layer()
                           ? detail::find_roots_symmetric(geometry)
                           : detail::find_roots_general(geometry);
    if (roots.empty())
        throw SolverError("solve_te_modes: no guided modes found");

    ModeSet ms;
    ms.geometry = geometry;
    ms.grid = grid;
    const double k = geometry.k();
    const double xc = geometry.center();

    for (const auto& r : roots) {
        if (ms.modes.size() >= max_modes) break;
        SlabMode m;
        m.n_eff = r.n_eff;
        m.beta = k * r.n_eff;
        m.near_cutoff = (r.n_eff - geometry.n_clad_max()) < 1e-9;
        m.shape = detail::build_shape(geometry, r.n_eff);

        // sign convention: positive value at the structure center, or
        // positive slope there when the mode is odd about it
        double peak = 0.0;
        ComplexField prof = ComplexField::sample(
            grid, [&](double x) { return cplx(m.shape.value(x), 0.0); });
        for (const auto& s : prof.samples) peak = std::max(peak, std::abs(s.real()));
        const double vc = m.shape.value(xc);
        const double sc = (std::abs(vc) > 1e-6 * peak) ? vc : m.shape.derivative(xc);
        if (sc < 0.0) {
            for (auto& s : prof.samples) s = -s;
            m.shape.scale(-1.0);
        }

        // window check on relative power density at the edges
        // (near-cutoff modes are flagged instead of rejected)
        const double edge = std::max(std::abs(prof.samples.front().real()),
                                     std::abs(prof.samples.back().real()));
        if (!m.near_cutoff && edge * edge > 1e-6 * peak * peak)
            throw WindowError("solve_te_modes: mode power at the grid edge exceeds 1e-6 of "
                              "peak; enlarge the window");

        const double p = power(prof);
        if (!(p > 0.0)) throw SolverError("solve_te_modes: degenerate profile");
        const double s = 1.0 / std::sqrt(p);
        for (auto& v : prof.samples) v *= s;
        m.shape.scale(s);
        m.profile = std::move(prof);
        ms.modes.push_back(std::move(m));
    }

    // pairwise symmetric orthonormalization in the grid inner product
    // (Gram matrix is within ~1e-7 of identity already)
    const std::size_t n = ms.modes.size();
    if (n > 1) {
        for (int sweep = 0; sweep < 2; ++sweep) {
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = i + 1; j < n; ++j) {
                    const cplx c = overlap(ms.modes[i].profile, ms.modes[j].profile);
                    const double h = 0.5 * c.real();
                    auto& a = ms.modes[i].profile.samples;
                    auto& b = ms.modes[j].profile.samples;
                    for (std::size_t t = 0; t < a.size(); ++t) {
                        const cplx ai = a[t], bj = b[t];
                        a[t] = ai - h * bj;
                        b[t] = bj - h * ai;
                    }
                }
                ms.modes[i].profile = normalize(ms.modes[i].profile);
            }
        }
    }
    return ms;
}

/// Rectangular channel cross-section for the effective-index reduction.
struct ChannelGeometry {
    double core_index = 1.0;
    double clad_index = 1.0;
    double width = 0.0;  // horizontal extent, um
    double height = 0.0; // vertical extent, um
};

struct EffectiveIndexReduction {
    SlabGeometry slab;       // equivalent horizontal slab
    double vertical_n_eff;   // fundamental n_eff of the vertical problem
    std::string note;        // how the reduction was performed
};

/// Reduce a rectangular channel to an equivalent 1-D slab: the vertical
/// slab's fundamental n_eff becomes the core index of the horizontal slab.
inline EffectiveIndexReduction effective_index_reduce(const ChannelGeometry& ch,
                                                      double wavelength) {
    if (!(ch.core_index > ch.clad_index))
        throw SolverError("effective_index_reduce: vertical slab below cutoff "
                          "(core index <= cladding index)");
    if (!(ch.width > 0.0) || !(ch.height > 0.0))
        throw GeometryError("effective_index_reduce: width and height must be > 0");
    const SlabGeometry vertical =
        SlabGeometry::symmetric(ch.core_index, ch.clad_index, ch.height, wavelength);
    const auto roots = detail::find_roots_symmetric(vertical);
    if (roots.empty())
        throw SolverError("effective_index_reduce: vertical slab below cutoff");
    const double n_eff_v = roots.front().n_eff;
    EffectiveIndexReduction out;
    out.vertical_n_eff = n_eff_v;
    out.slab = SlabGeometry::symmetric(n_eff_v, ch.clad_index, ch.width, wavelength);
    out.note = "effective-index reduction: vertical " + std::to_string(ch.height) +
               " um slab solved first; its fundamental n_eff " + std::to_string(n_eff_v) +
               " is the core index of the horizontal slab";
    return out;
}

} // namespace wgqsim
