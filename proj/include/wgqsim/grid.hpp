#pragma once

// Uniform transverse grids, sampled complex fields and the trapezoidal
// inner-product machinery shared by every other header.
//
// Conventions:
//   - positions in micrometers, one transverse dimension x
//   - forward propagation carries the phase e^{-i beta z}
//   - a "normalized" field has unit trapezoidal power on its grid

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "wgqsim/common.hpp"

namespace wgqsim {

/// Uniform sampling of the transverse coordinate x over [x_min, x_max].
struct TransverseGrid {
    double x_min = 0.0;
    double x_max = 0.0;
    std::size_t n_points = 0;

    TransverseGrid() = default;
    TransverseGrid(double x_min_, double x_max_, std::size_t n_points_)
        : x_min(x_min_), x_max(x_max_), n_points(n_points_) {
        if (n_points < 16)
            throw GeometryError("TransverseGrid: need at least 16 points");
        if (!(x_min < x_max))
            throw GeometryError("TransverseGrid: x_min must be < x_max");
    }

    double dx() const { return (x_max - x_min) / static_cast<double>(n_points - 1); }
    double x(std::size_t i) const { return x_min + static_cast<double>(i) * dx(); }

    bool operator==(const TransverseGrid& o) const {
        return x_min == o.x_min && x_max == o.x_max && n_points == o.n_points;
    }
    bool operator!=(const TransverseGrid& o) const { return !(*this == o); }
};

/// Complex amplitude samples on a TransverseGrid.
struct ComplexField {
    TransverseGrid grid;
    std::vector<cplx> samples;

    ComplexField() = default;
    explicit ComplexField(const TransverseGrid& g)
        : grid(g), samples(g.n_points, cplx(0.0, 0.0)) {}
    ComplexField(const TransverseGrid& g, std::vector<cplx> s)
        : grid(g), samples(std::move(s)) {
        if (samples.size() != grid.n_points)
            throw GridMismatchError("ComplexField: sample count does not match grid");
    }

    /// Sample a scalar function of x onto the grid.
    static ComplexField sample(const TransverseGrid& g, const std::function<cplx(double)>& f) {
        ComplexField out(g);
        for (std::size_t i = 0; i < g.n_points; ++i) out.samples[i] = f(g.x(i));
        return out;
    }
};

namespace detail {
inline void require_same_grid(const ComplexField& f, const ComplexField& g, const char* op) {
    if (f.grid != g.grid)
        throw GridMismatchError(std::string(op) + ": fields live on different grids");
}
} // namespace detail

/// Trapezoidal inner product  integral f*(x) g(x) dx.
/// Conjugate-symmetric: overlap(f,g) == conj(overlap(g,f)).
inline cplx overlap(const ComplexField& f, const ComplexField& g) {
    detail::require_same_grid(f, g, "overlap");
    const std::size_t n = f.grid.n_points;
    cplx acc(0.0, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const cplx term = std::conj(f.samples[i]) * g.samples[i];
        acc += (i == 0 || i == n - 1) ? 0.5 * term : term;
    }
    return acc * f.grid.dx();
}

/// Trapezoidal power  integral |f|^2 dx  (always >= 0).
inline double power(const ComplexField& f) {
    const std::size_t n = f.grid.n_points;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double term = std::norm(f.samples[i]);
        acc += (i == 0 || i == n - 1) ? 0.5 * term : term;
    }
    return acc * f.grid.dx();
}

/// Scale a field by a positive real factor so its trapezoidal power is 1.
inline ComplexField normalize(const ComplexField& f) {
    const double p = power(f);
    if (!(p > 0.0))
        throw Error("normalize: zero or degenerate field");
    ComplexField out = f;
    const double s = 1.0 / std::sqrt(p);
    for (auto& v : out.samples) v *= s;
    return out;
}

inline ComplexField operator*(cplx a, const ComplexField& f) {
    ComplexField out = f;
    for (auto& v : out.samples) v *= a;
    return out;
}

inline ComplexField operator+(const ComplexField& f, const ComplexField& g) {
    detail::require_same_grid(f, g, "operator+");
    ComplexField out = f;
    for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] += g.samples[i];
    return out;
}

inline ComplexField operator-(const ComplexField& f, const ComplexField& g) {
    detail::require_same_grid(f, g, "operator-");
    ComplexField out = f;
    for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] -= g.samples[i];
    return out;
}

/// Default transverse windows: fields decay well below 1e-6 of peak at
/// these edges for the index contrasts this simulator targets.
inline TransverseGrid default_single_guide_grid(std::size_t n_points = 1024) {
    return TransverseGrid(-15.0, 15.0, n_points);
}
inline TransverseGrid default_two_guide_grid(std::size_t n_points = 2048) {
    return TransverseGrid(-20.0, 20.0, n_points);
}

} // namespace wgqsim
