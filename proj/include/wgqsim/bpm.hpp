#pragma once

// Finite-difference beam propagation through a DeviceLayout.
//
// The slowly-varying envelope E(x, z) of the forward field
// Psi = E exp(-i k n_ref z) obeys the paraxial equation
//
//   2 i k n_ref dE/dz = d^2E/dx^2 + k^2 (n^2(x,z) - n_ref^2) E
//
// marched with a Crank-Nicolson step (midpoint potential, tridiagonal
// solve).  With a real index the step is exactly norm-preserving on the
// discrete l2 norm, so the polynomial absorbing ramp at the window edges
// is the only loss mechanism.  Kerr runs propagate one envelope per
// channel; inside kerr sections each channel sees
// n = n_lin + n2 (|E_self|^2 + 2 |E_other|^2), iterated to a fixed point
// within every step, and reduce bit-exactly to the linear path when the
// nonlinear index vanishes.
//
// Modal bookkeeping: at each recorded z the fields are decomposed both
// against every physical guide in isolation and against the "gate frame"
// (the first two modes of the channel's own cores, solved with the
// unperturbed index).  Gate-frame amplitudes are reported co-rotating:
// the accumulated reference phase of local mode j is removed using the
// discretized operator's Rayleigh value for that mode, which is what the
// stepper itself applies, so straight runs have stationary amplitudes
// and device phases are measured relative to the unperturbed structure.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wgqsim/common.hpp"
#include "wgqsim/devices.hpp"
#include "wgqsim/gates.hpp"
#include "wgqsim/grid.hpp"
#include "wgqsim/slab.hpp"

namespace wgqsim {

struct BpmConfig {
    double dz = 0.5;                  // um
    double n_ref = 0.0;               // 0: power-weighted mean n_eff of the launch
    double absorber_width = 5.0;      // um
    double absorber_strength = 0.5;   // peak amplitude loss rate, 1/um
    std::size_t nonlinear_iterations = 3;
    std::size_t snapshot_stride = 50; // steps between recorded samples
    double beta_sample_dz = 5.0;      // local-mode sampling inside transitions, um
    bool record_fields = true;        // keep field snapshots (off for calibration loops)

    void validate(const TransverseGrid& grid) const {
        if (!(dz > 0.0)) throw ConfigError("BpmConfig: dz must be > 0");
        if (absorber_width < 10.0 * grid.dx())
            throw ConfigError("BpmConfig: absorber width must be at least 10 dx");
        if (nonlinear_iterations < 1)
            throw ConfigError("BpmConfig: nonlinear_iterations must be >= 1");
        if (snapshot_stride < 1) throw ConfigError("BpmConfig: snapshot_stride must be >= 1");
        if (!(beta_sample_dz > 0.0))
            throw ConfigError("BpmConfig: beta_sample_dz must be > 0");
    }
};

/// Local modal frame on the run grid (gate frame of one channel at one z,
/// or one isolated guide); modes are normalized in the grid inner product.
struct LocalFrame {
    std::vector<ComplexField> modes;
    std::vector<double> beta;         // analytic, rad/um
    std::vector<double> n_eff;
    std::vector<double> beta_disc_sq; // Rayleigh value under the discrete operator
};

/// Memoized local mode solves, shareable across sequential runs on the
/// same grid (calibration loops hit identical cross-sections repeatedly).
class FrameCache {
public:
    using Key = std::string;

    LocalFrame& get(const Key& key, const std::function<LocalFrame()>& make) {
        auto it = cache_.find(key);
        if (it == cache_.end()) it = cache_.emplace(key, make()).first;
        return it->second;
    }

private:
    std::map<Key, LocalFrame> cache_;
};

namespace detail_bpm {

inline std::string grid_signature(const TransverseGrid& g) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.9g:%.9g:%zu", g.x_min, g.x_max, g.n_points);
    return buf;
}

inline std::string cores_signature(const std::vector<CoreSample>& cores) {
    std::string s;
    char buf[128];
    for (const auto& c : cores) {
        std::snprintf(buf, sizeof buf, "(%.7f,%.7f,%.9f)", c.center, c.width, c.index);
        s += buf;
    }
    return s;
}

/// Rayleigh quotient of a sampled mode under the discrete operator
/// D2 + k^2 n2_row (Dirichlet ends), i.e. the beta^2 the stepper applies.
inline double rayleigh_beta_sq(const ComplexField& mode, const std::vector<double>& k2n2_row) {
    const auto& g = mode.grid;
    const double inv_dx2 = 1.0 / (g.dx() * g.dx());
    double num = 0.0, den = 0.0;
    const std::size_t n = g.n_points;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = mode.samples[i].real();
        const double vm = i > 0 ? mode.samples[i - 1].real() : 0.0;
        const double vp = i + 1 < n ? mode.samples[i + 1].real() : 0.0;
        num += v * ((vm - 2.0 * v + vp) * inv_dx2 + k2n2_row[i] * v);
        den += v * v;
    }
    return num / den;
}

/// k^2 n^2 row of the full unperturbed cross-section at z.
inline std::vector<double> base_k2n2_row(const DeviceLayout& layout, double z,
                                         const TransverseGrid& grid) {
    const double k = 2.0 * kPi / layout.wavelength;
    const double dx = grid.dx();
    std::vector<double> row(grid.n_points);
    for (std::size_t i = 0; i < grid.n_points; ++i) {
        const double x = grid.x(i);
        row[i] = k * k * layout.index_sq_cell_average(x - 0.5 * dx, x + 0.5 * dx, z, false);
    }
    return row;
}

inline LocalFrame make_gate_frame(const DeviceLayout& layout, const std::string& channel,
                                  double z, const TransverseGrid& grid) {
    LocalFrame f;
    const SlabGeometry geo = layout.local_geometry(z, channel, false);
    if (!(geo.n_max_interior() > geo.n_clad_max()))
        return f; // homogeneous cross-section: nothing guided, empty frame
    const ModeSet ms = solve_te_modes(geo, grid, 2);
    const auto row = base_k2n2_row(layout, z, grid);
    for (const auto& m : ms.modes) {
        f.modes.push_back(m.profile);
        f.beta.push_back(m.beta);
        f.n_eff.push_back(m.n_eff);
        f.beta_disc_sq.push_back(rayleigh_beta_sq(m.profile, row));
    }
    return f;
}

} // namespace detail_bpm

inline LocalFrame& gate_frame(FrameCache& cache, const DeviceLayout& layout,
                              const std::string& channel, double z,
                              const TransverseGrid& grid) {
    const auto cores = layout.cross_section(z, false, channel);
    const auto all = layout.cross_section(z, false);
    const FrameCache::Key key = "gate|" + channel + "|" + detail_bpm::cores_signature(cores) +
                                "|" + detail_bpm::cores_signature(all) + "|" +
                                detail_bpm::grid_signature(grid);
    return cache.get(key, [&] { return detail_bpm::make_gate_frame(layout, channel, z, grid); });
}

/// Compose a channel launch field c0 Psi0 + c1 Psi1 from the z = 0 frame.
inline ComplexField make_launch(FrameCache& cache, const DeviceLayout& layout,
                                const std::string& channel, const TransverseGrid& grid,
                                const QubitState& state) {
    const auto& f = gate_frame(cache, layout, channel, 0.0, grid);
    if (f.modes.size() < 2 && std::abs(state.c1) > 0.0)
        throw SolverError("make_launch: channel '" + channel +
                          "' guides fewer than 2 modes at z = 0");
    ComplexField out(grid);
    for (std::size_t i = 0; i < grid.n_points; ++i) {
        out.samples[i] = state.c0 * f.modes[0].samples[i];
        if (f.modes.size() > 1) out.samples[i] += state.c1 * f.modes[1].samples[i];
    }
    return out;
}

/// Grid that encloses all cores with decay + absorber margin on each side.
inline TransverseGrid suggested_grid(const DeviceLayout& layout, std::size_t n_points,
                                     double margin = 14.0) {
    const auto [lo, hi] = layout.transverse_extent();
    return TransverseGrid(lo - margin, hi + margin, n_points);
}

struct GuideAmplitudes {
    std::string guide;
    std::vector<cplx> c; // raw projections of the envelope (carrier not removed)
};

struct ChannelSample {
    std::string channel;
    std::array<cplx, 2> gate{};  // co-rotating gate-frame amplitudes
    std::size_t gate_modes = 0;
    double total_power = 0.0;
    double residual_power = 0.0;
    std::vector<GuideAmplitudes> guides;
};

struct TrajectorySample {
    double z = 0.0;
    bool transition = false;
    std::vector<ChannelSample> channels;
};

struct ChannelResult {
    std::string channel;
    std::array<cplx, 2> gate{};
    std::size_t gate_modes = 0;
    double total_power = 0.0;
    double residual_power = 0.0;
    std::array<double, 2> theta_ref{}; // accumulated envelope reference phase
    ComplexField output;
};

struct FieldTrajectory {
    TransverseGrid grid;
    double n_ref = 0.0;
    double dz = 0.0;
    std::vector<std::string> channel_names;
    std::vector<double> step_z;                  // z after each step (step_z[0] = 0)
    std::vector<double> total_power_per_step;    // all channels combined
    std::vector<TrajectorySample> samples;       // every snapshot_stride steps
    std::vector<double> snapshot_z;
    std::vector<std::vector<ComplexField>> snapshots; // [snapshot][channel]
    std::vector<ChannelResult> finals;

    const ChannelResult& result(const std::string& channel) const {
        for (const auto& r : finals)
            if (r.channel == channel) return r;
        throw Error("FieldTrajectory: no channel '" + channel + "'");
    }

    QubitState final_state(const std::string& channel) const {
        const auto& r = result(channel);
        return QubitState{r.gate[0], r.gate[1]}.normalized();
    }
};

namespace detail_bpm {

/// Thomas solve of a symmetric tridiagonal system with constant
/// off-diagonal value `off` and per-row diagonal `diag`.
inline void thomas_const_off(const std::vector<cplx>& diag, cplx off, std::vector<cplx>& rhs,
                             std::vector<cplx>& scratch) {
    const std::size_t n = diag.size();
    scratch.resize(n);
    cplx d = diag[0];
    rhs[0] /= d;
    for (std::size_t i = 1; i < n; ++i) {
        scratch[i] = off / d;
        d = diag[i] - off * scratch[i];
        rhs[i] = (rhs[i] - off * rhs[i - 1]) / d;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= scratch[i + 1] * rhs[i + 1];
}

struct SegmentBetaTable {
    std::vector<double> z;                        // absolute
    std::vector<std::array<double, 2>> beta_sq;   // discrete Rayleigh values
    std::size_t n_modes = 0;

    std::array<double, 2> at(double zq) const {
        if (z.size() == 1) return beta_sq.front();
        const auto it = std::upper_bound(z.begin(), z.end(), zq);
        std::size_t hi = std::min<std::size_t>(std::distance(z.begin(), it), z.size() - 1);
        if (hi == 0) hi = 1;
        const std::size_t lo = hi - 1;
        const double t = std::clamp((zq - z[lo]) / (z[hi] - z[lo]), 0.0, 1.0);
        return {beta_sq[lo][0] + t * (beta_sq[hi][0] - beta_sq[lo][0]),
                beta_sq[lo][1] + t * (beta_sq[hi][1] - beta_sq[lo][1])};
    }
};

} // namespace detail_bpm

/// Shared propagation engine; public entry points below.
class BpmEngine {
public:
    BpmEngine(const DeviceLayout& layout, const TransverseGrid& grid, BpmConfig config,
              FrameCache* cache = nullptr)
        : layout_(layout), grid_(grid), config_(std::move(config)),
          cache_(cache ? cache : &own_cache_) {
        layout_.validate();
        config_.validate(grid_);
        const auto [lo, hi] = layout_.transverse_extent();
        if (lo < grid_.x_min || hi > grid_.x_max)
            throw WindowError("BpmEngine: layout cores extend beyond the grid window");
        k_ = 2.0 * kPi / layout_.wavelength;
        build_absorber();
    }

    FieldTrajectory run(const std::vector<std::pair<std::string, ComplexField>>& launches,
                        bool kerr) {
        if (launches.empty()) throw Error("BpmEngine: no launch fields");
        for (const auto& [ch, f] : launches)
            if (f.grid != grid_) throw GridMismatchError("BpmEngine: launch grid mismatch");

        const double total = layout_.total_length();
        const std::size_t n_steps =
            static_cast<std::size_t>(std::ceil(total / config_.dz - 1e-9));
        const double h = total / static_cast<double>(n_steps);
        const std::size_t nch = launches.size();
        const std::size_t n = grid_.n_points;

        double n_ref = config_.n_ref;
        if (n_ref <= 0.0) n_ref = auto_reference_index(launches);
        if (n_ref < layout_.n_clad - 1e-12 || n_ref > layout_.n_core + 1e-12)
            throw ConfigError("BpmEngine: reference index must lie within "
                              "[cladding, core] = [" + std::to_string(layout_.n_clad) + ", " +
                              std::to_string(layout_.n_core) + "]");

        FieldTrajectory traj;
        traj.grid = grid_;
        traj.n_ref = n_ref;
        traj.dz = h;
        for (const auto& [ch, f] : launches) traj.channel_names.push_back(ch);

        std::vector<std::vector<cplx>> fields(nch);
        for (std::size_t c = 0; c < nch; ++c) fields[c] = launches[c].second.samples;

        // accumulated envelope reference phases per channel and gate mode
        std::vector<std::array<double, 2>> theta(nch, {0.0, 0.0});

        traj.step_z.push_back(0.0);
        traj.total_power_per_step.push_back(total_power(fields));
        record_sample(traj, fields, theta, 0.0);

        std::vector<cplx> diag(n), rhs(n), scratch(n);
        std::vector<double> dn_prev, dn_cur, n2_row;
        std::vector<std::vector<double>> intens_old(nch, std::vector<double>(n)),
            intens_new(nch, std::vector<double>(n));

        const double knref = k_ * n_ref;
        const double c1 = h / (4.0 * knref * grid_.dx() * grid_.dx());

        for (std::size_t s = 0; s < n_steps; ++s) {
            const double z_mid = (static_cast<double>(s) + 0.5) * h;
            const PotentialRow& pot = potential_row(z_mid, n_ref);

            // step-size guard: potential phase per step must stay moderate
            if (pot.max_abs_v * h / (2.0 * knref) > 1.0)
                throw ConvergenceError(
                    "BpmEngine: index step too large for dz at z = " + std::to_string(z_mid) +
                    "; refine dz or n_ref");

            bool kerr_here = false;
            if (kerr) {
                kerr_row(z_mid, n2_row);
                for (double v : n2_row)
                    if (v != 0.0) { kerr_here = true; break; }
            }

            if (!kerr_here) {
                for (std::size_t c = 0; c < nch; ++c)
                    cn_step(fields[c], pot.v, c1, h, knref, diag, rhs, scratch);
            } else {
                // fixed-point Crank-Nicolson on the intensity-dependent index
                for (std::size_t c = 0; c < nch; ++c)
                    for (std::size_t i = 0; i < n; ++i)
                        intens_old[c][i] = std::norm(fields[c][i]);
                auto intens_mid = intens_old;
                std::vector<std::vector<cplx>> out(nch);
                double rel_change = 0.0;
                dn_prev.assign(n, 0.0);
                for (std::size_t it = 0; it < config_.nonlinear_iterations; ++it) {
                    for (std::size_t c = 0; c < nch; ++c) {
                        kerr_delta_n(n2_row, intens_mid, c, dn_cur);
                        out[c] = fields[c];
                        cn_step_kerr(out[c], pot, dn_cur, c1, h, knref, n_ref, diag, rhs,
                                     scratch);
                        if (it + 1 == config_.nonlinear_iterations && c == 0)
                            rel_change = rel_delta(dn_prev, dn_cur);
                        if (c == 0) dn_prev = dn_cur;
                    }
                    for (std::size_t c = 0; c < nch; ++c)
                        for (std::size_t i = 0; i < n; ++i)
                            intens_mid[c][i] =
                                0.5 * (intens_old[c][i] + std::norm(out[c][i]));
                }
                if (config_.nonlinear_iterations >= 2 && rel_change > 1e-8)
                    throw ConvergenceError(
                        "BpmEngine: nonlinear index fixed point did not converge at z = " +
                        std::to_string(z_mid) + " (relative change " +
                        std::to_string(rel_change) + ")");
                fields = std::move(out);
            }

            // advance reference phases with the CN-consistent rotation
            for (std::size_t c = 0; c < nch; ++c) {
                const auto bsq = beta_table(traj.channel_names[c], z_mid).at(z_mid);
                for (std::size_t j = 0; j < 2; ++j) {
                    if (bsq[j] == 0.0) continue;
                    const double y = (bsq[j] - knref * knref) / (2.0 * knref);
                    theta[c][j] += 2.0 * std::atan(0.5 * h * y);
                }
            }

            const double z_now = (static_cast<double>(s) + 1.0) * h;
            traj.step_z.push_back(z_now);
            traj.total_power_per_step.push_back(total_power(fields));

            if ((s + 1) % config_.snapshot_stride == 0 || s + 1 == n_steps)
                record_sample(traj, fields, theta, z_now);
        }

        // final per-channel results from the last recorded state
        for (std::size_t c = 0; c < nch; ++c) {
            ChannelResult r;
            r.channel = traj.channel_names[c];
            ComplexField out(grid_);
            out.samples = fields[c];
            const auto& f = gate_frame(*cache_, layout_, r.channel, total, grid_);
            r.gate_modes = std::min<std::size_t>(2, f.modes.size());
            r.total_power = 0.0;
            ComplexField tmp(grid_);
            tmp.samples = fields[c];
            r.total_power = power(tmp);
            double guided = 0.0;
            for (std::size_t j = 0; j < r.gate_modes; ++j) {
                const cplx raw = overlap(f.modes[j], tmp);
                r.gate[j] = raw * std::polar(1.0, theta[c][j]);
                guided += std::norm(r.gate[j]);
            }
            r.residual_power = r.total_power - guided;
            r.theta_ref = theta[c];
            r.output = std::move(out);
            traj.finals.push_back(std::move(r));
        }
        return traj;
    }

private:
    struct PotentialRow {
        std::size_t segment = static_cast<std::size_t>(-1);
        bool z_invariant = false;
        double n_ref = 0.0;
        std::vector<double> v;     // k^2 (n^2 - n_ref^2), cell-averaged, with delta_n
        std::vector<double> n_lin; // sqrt of the cell-averaged n^2
        double max_abs_v = 0.0;
    };

    void build_absorber() {
        sigma_.assign(grid_.n_points, 0.0);
        const double w = config_.absorber_width;
        for (std::size_t i = 0; i < grid_.n_points; ++i) {
            const double x = grid_.x(i);
            const double d = std::min(x - grid_.x_min, grid_.x_max - x);
            if (d < w) {
                const double t = (w - d) / w;
                sigma_[i] = config_.absorber_strength * t * t * t;
            }
        }
    }

    double auto_reference_index(
        const std::vector<std::pair<std::string, ComplexField>>& launches) {
        double acc = 0.0, tot = 0.0;
        for (const auto& [ch, field] : launches) {
            const auto& f = gate_frame(*cache_, layout_, ch, 0.0, grid_);
            for (std::size_t j = 0; j < f.modes.size(); ++j) {
                const double p = std::norm(overlap(f.modes[j], field));
                acc += p * f.n_eff[j];
                tot += p;
            }
        }
        if (!(tot > 0.0))
            throw Error("BpmEngine: launch carries no guided power; cannot pick n_ref");
        return acc / tot;
    }

    const PotentialRow& potential_row(double z, double n_ref) {
        const auto [si, t] = layout_.locate(z);
        const bool invariant = segment_is_invariant(layout_.segments[si]);
        if (pot_.segment == si && pot_.z_invariant && invariant && pot_.n_ref == n_ref)
            return pot_;
        pot_.segment = si;
        pot_.z_invariant = invariant;
        pot_.n_ref = n_ref;
        const std::size_t n = grid_.n_points;
        pot_.v.resize(n);
        pot_.n_lin.resize(n);
        const double dx = grid_.dx();
        pot_.max_abs_v = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = grid_.x(i);
            const double n2 = layout_.index_sq_cell_average(x - 0.5 * dx, x + 0.5 * dx, z, true);
            pot_.n_lin[i] = std::sqrt(n2);
            pot_.v[i] = k_ * k_ * (n2 - n_ref * n_ref);
            pot_.max_abs_v = std::max(pot_.max_abs_v, std::abs(pot_.v[i]));
        }
        return pot_;
    }

    static bool segment_is_invariant(const Segment& s) {
        for (const auto& c : s.cores)
            if (c.center0 != c.center1 || c.width0 != c.width1) return false;
        return true;
    }

    void kerr_row(double z, std::vector<double>& n2_row) {
        const std::size_t n = grid_.n_points;
        n2_row.assign(n, 0.0);
        const auto [si, t] = layout_.locate(z);
        bool any = false;
        for (const auto& c : layout_.segments[si].cores)
            if (c.n2 != 0.0) { any = true; break; }
        if (!any) return;
        const double dx = grid_.dx();
        for (std::size_t i = 0; i < n; ++i) {
            const double x = grid_.x(i);
            n2_row[i] = layout_.kerr_cell_average(x - 0.5 * dx, x + 0.5 * dx, z);
        }
    }

    void kerr_delta_n(const std::vector<double>& n2_row,
                      const std::vector<std::vector<double>>& intens, std::size_t self,
                      std::vector<double>& dn) {
        const std::size_t n = grid_.n_points;
        dn.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (n2_row[i] == 0.0) continue;
            double drive = intens[self][i];
            for (std::size_t c = 0; c < intens.size(); ++c)
                if (c != self) drive += 2.0 * intens[c][i];
            dn[i] = n2_row[i] * drive;
        }
    }

    static double rel_delta(const std::vector<double>& a, const std::vector<double>& b) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            num = std::max(num, std::abs(a[i] - b[i]));
            den = std::max(den, std::abs(b[i]));
        }
        return den > 0.0 ? num / den : 0.0;
    }

    void cn_step(std::vector<cplx>& field, const std::vector<double>& v_row, double c1,
                 double h, double knref, std::vector<cplx>& diag, std::vector<cplx>& rhs,
                 std::vector<cplx>& scratch) {
        const std::size_t n = field.size();
        const cplx off_l(0.0, c1);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = h * v_row[i] / (4.0 * knref);
            const double s = 0.5 * h * sigma_[i];
            diag[i] = cplx(1.0 + s, -2.0 * c1 + r);
            const cplx rd(1.0 - s, 2.0 * c1 - r);
            rhs[i] = rd * field[i];
            if (i > 0) rhs[i] -= off_l * field[i - 1];
            if (i + 1 < n) rhs[i] -= off_l * field[i + 1];
        }
        detail_bpm::thomas_const_off(diag, off_l, rhs, scratch);
        field = rhs;
    }

    void cn_step_kerr(std::vector<cplx>& field, const PotentialRow& pot,
                      const std::vector<double>& dn, double c1, double h, double knref,
                      double n_ref, std::vector<cplx>& diag, std::vector<cplx>& rhs,
                      std::vector<cplx>& scratch) {
        const std::size_t n = field.size();
        kerr_v_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (dn[i] == 0.0) {
                kerr_v_[i] = pot.v[i];
            } else {
                const double nt = pot.n_lin[i] + dn[i];
                kerr_v_[i] = k_ * k_ * (nt * nt - n_ref * n_ref);
            }
        }
        cn_step(field, kerr_v_, c1, h, knref, diag, rhs, scratch);
    }

    double total_power(const std::vector<std::vector<cplx>>& fields) const {
        double p = 0.0;
        for (const auto& f : fields) {
            double acc = 0.0;
            for (std::size_t i = 0; i < f.size(); ++i) {
                const double t = std::norm(f[i]);
                acc += (i == 0 || i + 1 == f.size()) ? 0.5 * t : t;
            }
            p += acc * grid_.dx();
        }
        return p;
    }

    const detail_bpm::SegmentBetaTable& beta_table(const std::string& channel, double z) {
        const auto [si, t] = layout_.locate(z);
        const auto key = std::make_pair(si, channel);
        auto it = beta_tables_.find(key);
        if (it != beta_tables_.end()) return it->second;

        detail_bpm::SegmentBetaTable table;
        double z0 = 0.0;
        for (std::size_t i = 0; i < si; ++i) z0 += layout_.segments[i].length;
        const double z1 = z0 + layout_.segments[si].length;
        const bool invariant = segment_is_invariant(layout_.segments[si]);
        std::vector<double> zs;
        if (invariant) {
            zs.push_back(0.5 * (z0 + z1));
        } else {
            const std::size_t nsamp = std::max<std::size_t>(
                2, static_cast<std::size_t>(std::ceil((z1 - z0) / config_.beta_sample_dz)) + 1);
            for (std::size_t i = 0; i < nsamp; ++i)
                zs.push_back(z0 + (z1 - z0) * static_cast<double>(i) /
                                      static_cast<double>(nsamp - 1));
        }
        for (double zq : zs) {
            // sample strictly inside the segment
            const double zq_in = std::clamp(zq, z0 + 1e-9, z1 - 1e-9);
            const auto& f = gate_frame(*cache_, layout_, channel, zq_in, grid_);
            std::array<double, 2> bsq{0.0, 0.0};
            for (std::size_t j = 0; j < std::min<std::size_t>(2, f.beta_disc_sq.size()); ++j)
                bsq[j] = f.beta_disc_sq[j];
            table.z.push_back(zq);
            table.beta_sq.push_back(bsq);
            table.n_modes = std::max(table.n_modes, f.modes.size());
        }
        return beta_tables_.emplace(key, std::move(table)).first->second;
    }

    void record_sample(FieldTrajectory& traj, const std::vector<std::vector<cplx>>& fields,
                       const std::vector<std::array<double, 2>>& theta, double z) {
        TrajectorySample sample;
        sample.z = z;
        const double z_in = std::clamp(z, 1e-9, layout_.total_length() - 1e-9);
        sample.transition = layout_.in_transition(z_in);

        ComplexField tmp(grid_);
        for (std::size_t c = 0; c < fields.size(); ++c) {
            ChannelSample cs;
            cs.channel = traj.channel_names[c];
            tmp.samples = fields[c];
            cs.total_power = power(tmp);

            const auto& f = gate_frame(*cache_, layout_, cs.channel, z_in, grid_);
            cs.gate_modes = std::min<std::size_t>(2, f.modes.size());
            double guided = 0.0;
            for (std::size_t j = 0; j < cs.gate_modes; ++j) {
                const cplx raw = overlap(f.modes[j], tmp);
                cs.gate[j] = raw * std::polar(1.0, theta[c][j]);
                guided += std::norm(cs.gate[j]);
            }
            cs.residual_power = cs.total_power - guided;

            // per-physical-guide projections (every guide, every channel field)
            for (const auto& core : layout_.cross_section(z_in, false)) {
                const auto& gf = guide_frame(core);
                GuideAmplitudes ga;
                ga.guide = core.guide;
                for (const auto& mode : gf.modes) ga.c.push_back(overlap(mode, tmp));
                cs.guides.push_back(std::move(ga));
            }
            sample.channels.push_back(std::move(cs));

            // absorber saturation check: relative field at the window edge
            double peak = 0.0;
            for (const auto& val : fields[c]) peak = std::max(peak, std::abs(val));
            const double edge =
                std::max(std::abs(fields[c].front()), std::abs(fields[c].back()));
            if (peak > 0.0 && edge > 1e-3 * peak)
                throw WindowError("BpmEngine: field at the window edge exceeds 1e-3 of peak "
                                  "at z = " + std::to_string(z) + "; enlarge the window");
        }

        if (config_.record_fields) {
            traj.snapshot_z.push_back(z);
            std::vector<ComplexField> snap;
            for (const auto& fvec : fields) {
                ComplexField f(grid_);
                f.samples = fvec;
                snap.push_back(std::move(f));
            }
            traj.snapshots.push_back(std::move(snap));
        }
        traj.samples.push_back(std::move(sample));
    }

    /// Isolated-guide probe modes: solved once per (width, index), then
    /// translated to the guide's current center and renormalized.
    const LocalFrame& guide_frame(const CoreSample& core) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "guide|%.7f|%.9f|%.7f|%s", core.width, core.index,
                      core.center, detail_bpm::grid_signature(grid_).c_str());
        return cache_->get(buf, [&] {
            LocalFrame f;
            if (!(core.index > layout_.n_clad)) return f; // cannot guide
            const auto shapes = shifted_guide_shapes(core);
            for (const auto& [shape, beta] : shapes) {
                ComplexField prof = ComplexField::sample(
                    grid_, [&](double x) { return cplx(shape.value(x), 0.0); });
                prof = normalize(prof);
                f.modes.push_back(std::move(prof));
                f.beta.push_back(beta);
                f.n_eff.push_back(beta / k_);
                f.beta_disc_sq.push_back(0.0);
            }
            return f;
        });
    }

    std::vector<std::pair<SlabModeShape, double>> shifted_guide_shapes(const CoreSample& core) {
        // root solve cached per (width, index); shapes rebuild cheaply at
        // any center with the usual sign convention (positive center value,
        // or positive center slope for odd modes)
        char buf[96];
        std::snprintf(buf, sizeof buf, "tpl|%.7f|%.9f", core.width, core.index);
        auto it = guide_templates_.find(buf);
        if (it == guide_templates_.end()) {
            const auto geo0 = SlabGeometry::symmetric(core.index, layout_.n_clad, core.width,
                                                      layout_.wavelength, 0.0);
            std::vector<double> neffs;
            for (const auto& r : detail::find_roots_symmetric(geo0)) {
                if (neffs.size() >= 2) break;
                neffs.push_back(r.n_eff);
            }
            it = guide_templates_.emplace(buf, std::move(neffs)).first;
        }
        const auto geo = SlabGeometry::symmetric(core.index, layout_.n_clad, core.width,
                                                 layout_.wavelength, core.center);
        std::vector<std::pair<SlabModeShape, double>> out;
        for (double n_eff : it->second) {
            SlabModeShape shape = detail::build_shape(geo, n_eff);
            const double vc = shape.value(core.center);
            const double sc = std::abs(vc) > 1e-9 ? vc : shape.derivative(core.center);
            if (sc < 0.0) shape.scale(-1.0);
            out.emplace_back(std::move(shape), k_ * n_eff);
        }
        return out;
    }

    DeviceLayout layout_;
    TransverseGrid grid_;
    BpmConfig config_;
    FrameCache* cache_;
    FrameCache own_cache_;
    double k_ = 0.0;
    std::vector<double> sigma_;
    std::vector<double> kerr_v_;
    PotentialRow pot_;
    std::map<std::pair<std::size_t, std::string>, detail_bpm::SegmentBetaTable> beta_tables_;
    std::map<std::string, std::vector<double>> guide_templates_;
};

/// Linear propagation of a single channel through the layout.
inline FieldTrajectory propagate_linear(const DeviceLayout& layout, const ComplexField& launch,
                                        const BpmConfig& config, FrameCache* cache = nullptr,
                                        const std::string& channel = "target") {
    BpmEngine engine(layout, launch.grid, config, cache);
    return engine.run({{channel, launch}}, false);
}

/// Two-channel Kerr/XPM propagation (control, target).  Reduces exactly
/// to independent linear runs when the nonlinear index vanishes.
inline FieldTrajectory propagate_kerr_xpm(const DeviceLayout& layout,
                                          const ComplexField& control_launch,
                                          const ComplexField& target_launch,
                                          const BpmConfig& config,
                                          FrameCache* cache = nullptr) {
    BpmEngine engine(layout, control_launch.grid, config, cache);
    return engine.run({{"control", control_launch}, {"target", target_launch}}, true);
}

/// Reference index for which the discrete propagation phase of the given
/// mode equals beta z exactly: solve (k n)^2 - 2 beta (k n) + beta_d^2 = 0
/// with beta_d^2 the Rayleigh value of the sampled mode.
inline double calibrate_reference_index(const SlabGeometry& geometry,
                                        const TransverseGrid& grid, std::size_t mode_index = 0) {
    const auto ms = solve_te_modes(geometry, grid);
    if (mode_index >= ms.modes.size())
        throw SolverError("calibrate_reference_index: mode index out of range");
    const double k = geometry.k();
    std::vector<double> row(grid.n_points);
    const double dx = grid.dx();
    for (std::size_t i = 0; i < grid.n_points; ++i) {
        const double x = grid.x(i);
        row[i] = k * k * geometry.index_sq_cell_average(x - 0.5 * dx, x + 0.5 * dx);
    }
    const double beta = ms.modes[mode_index].beta;
    const double bd2 = detail_bpm::rayleigh_beta_sq(ms.modes[mode_index].profile, row);
    const double disc = beta * beta - bd2;
    const double knref = disc >= 0.0 ? beta - std::sqrt(disc) : beta;
    return knref / k;
}

// ---------------------------------------------------------------------------
// Calibration searches
// ---------------------------------------------------------------------------

/// Unwrapped differential phase arg(C_a) - arg(C_b) between two guides,
/// accumulated over samples with z in [z0, z1] (self-consistent as long as
/// the phase advances by < pi between consecutive samples).
inline double differential_guide_phase(const FieldTrajectory& traj, const std::string& channel,
                                       const std::string& guide_a, const std::string& guide_b,
                                       double z0, double z1) {
    double acc = 0.0;
    bool have_prev = false;
    double prev = 0.0;
    for (const auto& s : traj.samples) {
        if (s.z < z0 - 1e-9 || s.z > z1 + 1e-9) continue;
        const ChannelSample* cs = nullptr;
        for (const auto& c : s.channels)
            if (c.channel == channel) cs = &c;
        if (!cs) continue;
        cplx ca(0, 0), cb(0, 0);
        for (const auto& g : cs->guides) {
            if (g.guide == guide_a && !g.c.empty()) ca = g.c[0];
            if (g.guide == guide_b && !g.c.empty()) cb = g.c[0];
        }
        if (std::abs(ca) < 1e-12 || std::abs(cb) < 1e-12) continue;
        const double cur = std::arg(ca * std::conj(cb));
        if (have_prev) {
            double d = cur - prev;
            while (d > kPi) d -= 2.0 * kPi;
            while (d < -kPi) d += 2.0 * kPi;
            acc += d;
        }
        prev = cur;
        have_prev = true;
    }
    return acc;
}

/// z-range spanned by segments satisfying a predicate (e.g. the phase
/// shifter or the Kerr block), padded by one sample on each side.
inline std::pair<double, double> segment_z_range(const DeviceLayout& layout,
                                                 const std::function<bool(const Segment&)>& pred,
                                                 double pad) {
    double z = 0.0, lo = -1.0, hi = -1.0;
    for (const auto& s : layout.segments) {
        const double z1 = z + s.length;
        if (pred(s)) {
            if (lo < 0.0) lo = z;
            hi = z1;
        }
        z = z1;
    }
    if (lo < 0.0) throw GeometryError("segment_z_range: no matching segment");
    return {std::max(0.0, lo - pad), std::min(layout.total_length(), hi + pad)};
}

struct ShifterCalibration {
    double delta_n = 0.0;
    double achieved_phase = 0.0;     // rad
    double conversion_efficiency = 0.0; // |<1|out>|^2 for a |0> launch
    std::size_t iterations = 0;
    std::vector<std::pair<double, double>> trace; // (delta_n, phase)
};

/// Bisection on delta_n until the propagated differential arm phase over
/// the shifter equals target_phase within tol.  The phase is measured by
/// unwrapping the per-arm projections along z, so the response stays
/// monotone past pi and the bracket cannot fold.
inline ShifterCalibration calibrate_phase_shifter(
    const std::function<DeviceLayout(double)>& layout_for_dn, double target_phase,
    const TransverseGrid& grid, const BpmConfig& config, double dn_hint,
    FrameCache* cache = nullptr, double tol = 1e-3) {
    if (!(target_phase >= 0.0))
        throw CalibrationError("calibrate_phase_shifter: target phase must be >= 0");

    FrameCache local;
    FrameCache* cc = cache ? cache : &local;
    BpmConfig cfg = config;
    cfg.record_fields = false;

    ShifterCalibration result;
    auto measure = [&](double dn) {
        const DeviceLayout layout = layout_for_dn(dn);
        const auto [z0, z1] = segment_z_range(
            layout, [](const Segment& s) { return s.kind == SegmentKind::phase_section; },
            2.0 * cfg.dz * static_cast<double>(cfg.snapshot_stride));
        const auto launch = make_launch(*cc, layout, "target", grid, QubitState::zero());
        const auto traj = propagate_linear(layout, launch, cfg, cc);
        double phase = std::abs(
            differential_guide_phase(traj, "target", "arm_m", "arm_p", z0, z1));
        result.trace.emplace_back(dn, phase);
        ++result.iterations;
        return phase;
    };

    if (target_phase == 0.0) {
        result.delta_n = 0.0;
        result.achieved_phase = 0.0;
        return result;
    }

    double hi = dn_hint > 0.0 ? dn_hint : 1e-3;
    double phi_hi = measure(hi);
    double lo = 0.0;
    int expansions = 0;
    while (phi_hi < target_phase) {
        if (++expansions > 12) {
            std::string trace;
            for (const auto& [d, p] : result.trace)
                trace += " (" + std::to_string(d) + ", " + std::to_string(p) + ")";
            throw CalibrationError("calibrate_phase_shifter: cannot bracket target;"
                                   " scan trace:" + trace);
        }
        lo = hi;
        hi *= 1.6;
        const double next = measure(hi);
        if (next < phi_hi - tol) {
            std::string trace;
            for (const auto& [d, p] : result.trace)
                trace += " (" + std::to_string(d) + ", " + std::to_string(p) + ")";
            throw CalibrationError("calibrate_phase_shifter: non-monotone phase response;"
                                   " scan trace:" + trace);
        }
        phi_hi = next;
    }

    double dn = hi, phase = phi_hi;
    for (int it = 0; it < 60 && std::abs(phase - target_phase) > tol; ++it) {
        dn = 0.5 * (lo + hi);
        phase = measure(dn);
        if (phase < target_phase) lo = dn;
        else hi = dn;
    }
    if (std::abs(phase - target_phase) > tol)
        throw CalibrationError("calibrate_phase_shifter: bisection failed to reach target");

    result.delta_n = dn;
    result.achieved_phase = phase;

    // conversion efficiency of the calibrated device for a |0> launch
    const DeviceLayout layout = layout_for_dn(dn);
    const auto launch = make_launch(*cc, layout, "target", grid, QubitState::zero());
    const auto traj = propagate_linear(layout, launch, cfg, cc);
    result.conversion_efficiency = std::norm(traj.result("target").gate[1]);
    return result;
}

struct ControlPowerCalibration {
    bool feasible = false;
    double intensity = 0.0;      // launch power multiplier for the control channel
    double achieved_phase = 0.0; // differential target-arm phase, rad
    std::size_t iterations = 0;
    std::vector<std::pair<double, double>> trace;
};

/// Bisection on the control launch intensity until the XPM-induced
/// differential phase on the target arms over the Kerr block reaches
/// target_phase within tol.  Returns feasible = false when the response
/// does not move (e.g. n2 = 0).
inline ControlPowerCalibration calibrate_control_power(
    const DeviceLayout& layout, double target_phase, const TransverseGrid& grid,
    const BpmConfig& config, double intensity_hint, FrameCache* cache = nullptr,
    double tol = 1e-2) {
    FrameCache local;
    FrameCache* cc = cache ? cache : &local;
    BpmConfig cfg = config;
    cfg.record_fields = false;

    const auto [z0, z1] = segment_z_range(
        layout, [](const Segment& s) { return s.kind == SegmentKind::kerr_section; },
        2.0 * cfg.dz * static_cast<double>(cfg.snapshot_stride));

    ControlPowerCalibration result;
    auto measure = [&](double s) {
        auto ctl = make_launch(*cc, layout, "control", grid, QubitState::one());
        const double amp = std::sqrt(s);
        for (auto& v : ctl.samples) v *= amp;
        const auto tgt = make_launch(*cc, layout, "target", grid, QubitState::zero());
        const auto traj = propagate_kerr_xpm(layout, ctl, tgt, cfg, cc);
        const double phase = std::abs(
            differential_guide_phase(traj, "target", "arm_m", "arm_p", z0, z1));
        result.trace.emplace_back(s, phase);
        ++result.iterations;
        return phase;
    };

    double hi = intensity_hint > 0.0 ? intensity_hint : 1.0;
    double phi_hi = measure(hi);
    double lo = 0.0;
    int expansions = 0;
    while (phi_hi < target_phase) {
        if (++expansions > 10 || phi_hi < 1e-6) {
            result.feasible = false;
            result.achieved_phase = phi_hi;
            return result;
        }
        lo = hi;
        hi *= 2.0;
        phi_hi = measure(hi);
    }
    double s = hi, phase = phi_hi;
    for (int it = 0; it < 60 && std::abs(phase - target_phase) > tol; ++it) {
        s = 0.5 * (lo + hi);
        phase = measure(s);
        if (phase < target_phase) lo = s;
        else hi = s;
    }
    result.feasible = std::abs(phase - target_phase) <= tol;
    result.intensity = s;
    result.achieved_phase = phase;
    return result;
}

} // namespace wgqsim
