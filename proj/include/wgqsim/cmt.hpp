#pragma once

// Coupled-mode theory for M coupled dual-mode waveguides.
//
// Working form of the coupled equations, with the paper-level prefactors
// absorbed into effective coupling coefficients kappa in rad/um (every
// observable depends only on kappa * length products):
//
//   dC_a/dz = -i sum_b kappa_ab exp(+i (beta_a - beta_b) z) C_b
//
// For one mode order and two matched guides this integrates to the exact
// directional-coupler transfer
//
//   C1(z) =  cos(kappa z) C1(0) - i sin(kappa z) C2(0)
//   C2(z) = -i sin(kappa z) C1(0) + cos(kappa z) C2(0)
//
// which dc_transfer applies in closed form.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "wgqsim/common.hpp"
#include "wgqsim/grid.hpp"
#include "wgqsim/slab.hpp"

namespace wgqsim {

/// Effective coupling coefficient from the modal overlap across an index
/// perturbation: prefactor * integral a(x) delta_n_sq(x) b(x) dx.
/// delta_n_sq holds n^2(x) of the perturbed structure minus n^2(x) of the
/// structure mode_a belongs to (stored in the real part).
inline double coupling_coefficient(const ComplexField& mode_a, const ComplexField& mode_b,
                                   const ComplexField& delta_n_sq, double prefactor) {
    detail::require_same_grid(mode_a, mode_b, "coupling_coefficient");
    detail::require_same_grid(mode_a, delta_n_sq, "coupling_coefficient");
    const std::size_t n = mode_a.grid.n_points;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double term = mode_a.samples[i].real() * delta_n_sq.samples[i].real() *
                            mode_b.samples[i].real();
        acc += (i == 0 || i == n - 1) ? 0.5 * term : term;
    }
    return prefactor * acc * mode_a.grid.dx();
}

/// Standard prefactor k^2 / (2 beta) that makes coupling_coefficient of
/// unit-power profiles come out in rad/um.
inline double coupling_prefactor(double wavelength, double beta) {
    const double k = 2.0 * kPi / wavelength;
    return k * k / (2.0 * beta);
}

/// Half the even/odd supermode splitting per mode order of a symmetric
/// two-guide structure; exact at coupled-mode level for the power beat.
struct SupermodeSplitting {
    std::vector<double> kappas;          // per isolated-mode order
    std::vector<double> supermode_neffs; // all supermode n_eff, descending
};

/// width: core width of each guide; gap: edge-to-edge separation.
inline SupermodeSplitting supermode_kappas(double width, double gap, double n_core,
                                           double n_clad, double wavelength) {
    if (!(gap > 0.0)) throw GeometryError("supermode_kappas: gap must be > 0");
    const double pitch = width + gap;
    const auto compound = SlabGeometry::from_cores(
        {{-0.5 * pitch, width, n_core}, {+0.5 * pitch, width, n_core}}, n_clad, wavelength);
    const auto roots = detail::find_roots_general(compound);
    if (roots.size() < 2)
        throw SolverError("supermode_kappas: compound structure guides fewer than 2 modes");
    SupermodeSplitting out;
    const double k = 2.0 * kPi / wavelength;
    for (const auto& r : roots) out.supermode_neffs.push_back(r.n_eff);
    for (std::size_t j = 0; 2 * j + 1 < roots.size(); ++j) {
        const double be = k * roots[2 * j].n_eff;
        const double bo = k * roots[2 * j + 1].n_eff;
        out.kappas.push_back(0.5 * (be - bo));
    }
    return out;
}

/// Exact two-channel directional-coupler transfer over length L.
inline std::array<cplx, 2> dc_transfer(double kappa, double length,
                                       const std::array<cplx, 2>& initial) {
    if (length < 0.0) throw Error("dc_transfer: negative length");
    const double c = std::cos(kappa * length);
    const double s = std::sin(kappa * length);
    const cplx mis(0.0, -s);
    return {c * initial[0] + mis * initial[1], mis * initial[0] + c * initial[1]};
}

/// M guides, n_modes mode orders per guide; channels flatten as
/// guide * n_modes + mode.
struct CoupledModeSystem {
    std::size_t n_guides = 0;
    std::size_t n_modes = 0;
    std::vector<double> betas;             // per channel, rad/um
    std::vector<std::vector<cplx>> kappas; // channel x channel, rad/um
    double z_start = 0.0;
    double z_end = 0.0;

    std::size_t channels() const { return n_guides * n_modes; }

    void validate() const {
        const std::size_t n = channels();
        if (n == 0) throw Error("CoupledModeSystem: empty system");
        if (betas.size() != n || kappas.size() != n)
            throw Error("CoupledModeSystem: dimension mismatch");
        for (const auto& row : kappas)
            if (row.size() != n) throw Error("CoupledModeSystem: kappa matrix not square");
        for (std::size_t i = 0; i < n; ++i) {
            if (std::abs(kappas[i][i].imag()) > 1e-10)
                throw Error("CoupledModeSystem: diagonal kappa must be real (lossless model)");
            for (std::size_t j = i + 1; j < n; ++j)
                if (std::abs(kappas[i][j] - std::conj(kappas[j][i])) > 1e-10)
                    throw Error("CoupledModeSystem: kappa matrix must be Hermitian "
                                "(power conservation)");
        }
        if (!(z_end > z_start)) throw Error("CoupledModeSystem: need z_end > z_start");
    }

    double max_abs_kappa() const {
        double m = 0.0;
        for (const auto& row : kappas)
            for (const auto& v : row) m = std::max(m, std::abs(v));
        return m;
    }
};

struct ModeAmplitudes {
    double z = 0.0;
    std::vector<cplx> values; // per channel

    double total_power() const {
        double p = 0.0;
        for (const auto& v : values) p += std::norm(v);
        return p;
    }
};

/// Classical RK4 over the coupled-mode equations with the phase-mismatch
/// exponentials evaluated exactly at every stage.
inline std::vector<ModeAmplitudes> integrate_coupled_modes(const CoupledModeSystem& system,
                                                           const ModeAmplitudes& initial,
                                                           double dz) {
    system.validate();
    if (!(dz > 0.0)) throw Error("integrate_coupled_modes: dz must be > 0");
    if (system.max_abs_kappa() * dz >= 0.1)
        throw Error("integrate_coupled_modes: step too large (max |kappa| dz must be < 0.1)");
    const std::size_t n = system.channels();
    if (initial.values.size() != n)
        throw Error("integrate_coupled_modes: initial state dimension mismatch");

    auto rhs = [&](double z, const std::vector<cplx>& c, std::vector<cplx>& out) {
        for (std::size_t a = 0; a < n; ++a) {
            cplx acc(0.0, 0.0);
            for (std::size_t b = 0; b < n; ++b) {
                const cplx kap = system.kappas[a][b];
                if (kap == cplx(0.0, 0.0)) continue;
                const double phase = (system.betas[a] - system.betas[b]) * z;
                acc += kap * std::polar(1.0, phase) * c[b];
            }
            out[a] = cplx(0.0, -1.0) * acc;
        }
    };

    const double span = system.z_end - system.z_start;
    const std::size_t n_steps = static_cast<std::size_t>(std::ceil(span / dz - 1e-12));
    const double h = span / static_cast<double>(n_steps);

    std::vector<ModeAmplitudes> traj;
    traj.reserve(n_steps + 1);
    std::vector<cplx> c = initial.values;
    traj.push_back({system.z_start, c});
    std::vector<cplx> k1(n), k2(n), k3(n), k4(n), tmp(n);

    for (std::size_t s = 0; s < n_steps; ++s) {
        const double z = system.z_start + h * static_cast<double>(s);
        rhs(z, c, k1);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = c[i] + 0.5 * h * k1[i];
        rhs(z + 0.5 * h, tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = c[i] + 0.5 * h * k2[i];
        rhs(z + 0.5 * h, tmp, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = c[i] + h * k3[i];
        rhs(z + h, tmp, k4);
        for (std::size_t i = 0; i < n; ++i)
            c[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        for (const auto& v : c)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                throw ConvergenceError("integrate_coupled_modes: NaN in state at step " +
                                       std::to_string(s + 1));
        traj.push_back({z + h, c});
    }
    return traj;
}

/// Result of the mode-separator length search.
struct SeparatorDesign {
    bool feasible = false;
    double length = 0.0;  // um
    int m = 0;            // kappa0 L = 2 pi m
    int n = 0;            // kappa1 L = pi/2 + 2 pi n
    double residual0 = 0.0;
    double residual1 = 0.0;
    // best near-miss over the search range (equals the solution when feasible)
    double near_miss_length = 0.0;
    int near_miss_m = 0;
    int near_miss_n = 0;
    double near_miss_residual = 0.0;
};

/// Find the smallest L <= L_max with kappa0 L = 2 pi m (m >= 1) and
/// kappa1 L = pi/2 + 2 pi n (n >= 0) both within `tolerance` rad, which
/// realizes cos(kappa0 L) = sin(kappa1 L) = 1: mode 0 returns to its
/// guide while mode 1 fully crosses.
inline SeparatorDesign design_mode_separator(double kappa0, double kappa1, double l_max,
                                             double tolerance = 1e-3) {
    if (!(kappa0 > 0.0) || !(kappa1 > 0.0))
        throw Error("design_mode_separator: kappa0 and kappa1 must be > 0");
    if (!(l_max > 0.0)) throw Error("design_mode_separator: L_max must be > 0");

    SeparatorDesign best;
    best.near_miss_residual = std::numeric_limits<double>::infinity();

    for (int m = 1;; ++m) {
        const double l0 = 2.0 * kPi * m / kappa0;
        if (l0 > l_max + tolerance / kappa0) break;
        const double n_real = (kappa1 * l0 - 0.5 * kPi) / (2.0 * kPi);
        for (int n = std::max(0, static_cast<int>(std::floor(n_real)) - 1);
             n <= static_cast<int>(std::floor(n_real)) + 1; ++n) {
            const double l1 = (0.5 * kPi + 2.0 * kPi * n) / kappa1;
            // the max phase residual is minimized at the kappa-weighted mean
            const double l = (kappa0 * l0 + kappa1 * l1) / (kappa0 + kappa1);
            if (l > l_max || !(l > 0.0)) continue;
            const double r0 = std::abs(kappa0 * l - 2.0 * kPi * m);
            const double r1 = std::abs(kappa1 * l - 0.5 * kPi - 2.0 * kPi * n);
            const double r = std::max(r0, r1);
            if (r < best.near_miss_residual ||
                (r == best.near_miss_residual && l < best.near_miss_length)) {
                best.near_miss_residual = r;
                best.near_miss_length = l;
                best.near_miss_m = m;
                best.near_miss_n = n;
            }
            if (!best.feasible && r <= tolerance) {
                best.feasible = true;
                best.length = l;
                best.m = m;
                best.n = n;
                best.residual0 = r0;
                best.residual1 = r1;
                return best; // m ascending: first hit is the smallest L
            }
        }
    }
    return best;
}

} // namespace wgqsim
