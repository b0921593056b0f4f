#pragma once

// Ideal gate algebra on waveguide-mode qubits: |0> = TE0, |1> = TE1.

#include <array>
#include <cmath>
#include <complex>

#include "wgqsim/common.hpp"

namespace wgqsim {

/// Amplitudes over the {TE0, TE1} basis.
struct QubitState {
    cplx c0{1.0, 0.0};
    cplx c1{0.0, 0.0};

    double norm2() const { return std::norm(c0) + std::norm(c1); }

    QubitState normalized() const {
        const double n = std::sqrt(norm2());
        if (!(n > 0.0)) throw Error("QubitState: cannot normalize a zero state");
        return {c0 / n, c1 / n};
    }

    static QubitState zero() { return {1.0, 0.0}; }
    static QubitState one() { return {0.0, 1.0}; }
};

/// 2x2 complex transfer matrix acting on (C0, C1).
struct TransferMatrix2 {
    // row-major: m[r][c], output_r = sum_c m[r][c] * input_c
    std::array<std::array<cplx, 2>, 2> m{{{cplx(1, 0), cplx(0, 0)}, {cplx(0, 0), cplx(1, 0)}}};

    static TransferMatrix2 identity() { return {}; }

    double unitarity_defect() const {
        // max-norm of U^dagger U - I
        double worst = 0.0;
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) {
                cplx acc(0, 0);
                for (int t = 0; t < 2; ++t) acc += std::conj(m[t][r]) * m[t][c];
                if (r == c) acc -= 1.0;
                worst = std::max(worst, std::abs(acc));
            }
        return worst;
    }
};

/// The balanced-MZI unitary with inter-arm phase phi:
///   [[cos(phi/2),  i sin(phi/2)],
///    [i sin(phi/2), cos(phi/2)]]
/// phi = 0 is the identity, phi = pi the mode-swapping NOT (up to the
/// factor i), phi = pi/2 the superposition generator.
inline TransferMatrix2 mzi_unitary(double phi) {
    const double c = std::cos(0.5 * phi);
    const double s = std::sin(0.5 * phi);
    TransferMatrix2 u;
    u.m = {{{cplx(c, 0), cplx(0, s)}, {cplx(0, s), cplx(c, 0)}}};
    return u;
}

inline QubitState apply(const TransferMatrix2& u, const QubitState& s) {
    return {u.m[0][0] * s.c0 + u.m[0][1] * s.c1,
            u.m[1][0] * s.c0 + u.m[1][1] * s.c1};
}

/// compose(u1, u2): apply u2 first, then u1 (matrix product u1 * u2).
inline TransferMatrix2 compose(const TransferMatrix2& u1, const TransferMatrix2& u2) {
    TransferMatrix2 out;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c)
            out.m[r][c] = u1.m[r][0] * u2.m[0][c] + u1.m[r][1] * u2.m[1][c];
    return out;
}

/// Amplitudes over {|00>, |01>, |10>, |11>}, control tensor target.
struct TwoQubitState {
    std::array<cplx, 4> a{cplx(1, 0), cplx(0, 0), cplx(0, 0), cplx(0, 0)};

    double norm2() const {
        double n = 0.0;
        for (const auto& v : a) n += std::norm(v);
        return n;
    }

    static TwoQubitState product(const QubitState& control, const QubitState& target) {
        TwoQubitState s;
        s.a = {control.c0 * target.c0, control.c0 * target.c1,
               control.c1 * target.c0, control.c1 * target.c1};
        return s;
    }

    static TwoQubitState basis(int control, int target) {
        TwoQubitState s;
        s.a = {0, 0, 0, 0};
        s.a[static_cast<std::size_t>(2 * control + target)] = cplx(1, 0);
        return s;
    }
};

/// Target flip conditioned on the control.  The physical gate inherits
/// the factor i of mzi_unitary(pi) on the swapped amplitudes; pass
/// phase_free = true for the textbook phase-free variant.
inline TwoQubitState cnot_ideal(const TwoQubitState& s, bool phase_free = false) {
    const cplx ph = phase_free ? cplx(1, 0) : cplx(0, 1);
    TwoQubitState out = s;
    out.a[2] = ph * s.a[3];
    out.a[3] = ph * s.a[2];
    return out;
}

/// Phase the control amplitude accumulates through the two separator
/// couplers of the physical C-NOT: each full cross-over contributes -i.
inline cplx cnot_control_routing_phase() { return cplx(-1.0, 0.0); } // (-i)^2

inline double fidelity(const QubitState& a, const QubitState& b) {
    const cplx ip = std::conj(a.c0) * b.c0 + std::conj(a.c1) * b.c1;
    return std::norm(ip) / (a.norm2() * b.norm2());
}

inline double fidelity(const TwoQubitState& a, const TwoQubitState& b) {
    cplx ip(0, 0);
    for (std::size_t i = 0; i < 4; ++i) ip += std::conj(a.a[i]) * b.a[i];
    return std::norm(ip) / (a.norm2() * b.norm2());
}

} // namespace wgqsim
