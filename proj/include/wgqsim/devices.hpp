#pragma once

// Piecewise-z device layouts n(x, z) consumed by the propagation engine.
//
// Every segment carries a set of core tracks whose center and width vary
// linearly over the segment, which uniformly expresses straights, tapers,
// Y-branches, coupler transitions and parallel coupler runs.  Phase
// shifters add delta_n to one core; Kerr sections carry a nonlinear
// coefficient n2 (index units per unit of normalized intensity).
//
// x and z in micrometers.  Layouts are immutable after construction and
// serialize to a versioned JSON document that fully determines n(x, z).

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wgqsim/common.hpp"
#include "wgqsim/grid.hpp"
#include "wgqsim/slab.hpp"

namespace wgqsim {

inline constexpr const char* kLayoutSchema = "wgqsim-layout/1";

/// One core whose center/width interpolate linearly across a segment.
struct CoreTrack {
    std::string guide;   // stable identifier ("stem", "arm_p", "control", ...)
    std::string channel; // which propagating channel owns the guide
    double center0 = 0.0, center1 = 0.0;
    double width0 = 0.0, width1 = 0.0;
    double delta_n = 0.0; // phase-shifter index offset on top of the core index
    double n2 = 0.0;      // Kerr coefficient; nonzero only in kerr sections

    double center(double t) const { return center0 + (center1 - center0) * t; }
    double width(double t) const { return width0 + (width1 - width0) * t; }
};

enum class SegmentKind {
    straight,
    taper,
    y_split,
    y_merge,
    phase_section,
    coupler_transition,
    coupler_parallel,
    kerr_section,
};

inline const char* to_string(SegmentKind k) {
    switch (k) {
        case SegmentKind::straight: return "straight";
        case SegmentKind::taper: return "taper";
        case SegmentKind::y_split: return "y_split";
        case SegmentKind::y_merge: return "y_merge";
        case SegmentKind::phase_section: return "phase_section";
        case SegmentKind::coupler_transition: return "coupler_transition";
        case SegmentKind::coupler_parallel: return "coupler_parallel";
        case SegmentKind::kerr_section: return "kerr_section";
    }
    return "straight";
}

inline SegmentKind segment_kind_from_string(const std::string& s) {
    static const std::map<std::string, SegmentKind> table = {
        {"straight", SegmentKind::straight},
        {"taper", SegmentKind::taper},
        {"y_split", SegmentKind::y_split},
        {"y_merge", SegmentKind::y_merge},
        {"phase_section", SegmentKind::phase_section},
        {"coupler_transition", SegmentKind::coupler_transition},
        {"coupler_parallel", SegmentKind::coupler_parallel},
        {"kerr_section", SegmentKind::kerr_section},
    };
    const auto it = table.find(s);
    if (it == table.end()) throw ConfigError("unknown segment kind: " + s);
    return it->second;
}

/// Cross-section geometry changes inside these kinds; modal bookkeeping
/// there is reported but flagged as non-rigorous.
inline bool is_transition_kind(SegmentKind k) {
    return k == SegmentKind::taper || k == SegmentKind::y_split ||
           k == SegmentKind::y_merge || k == SegmentKind::coupler_transition;
}

struct Segment {
    SegmentKind kind = SegmentKind::straight;
    double length = 0.0;
    std::vector<CoreTrack> cores;
};

/// A core evaluated at a fixed z.
struct CoreSample {
    std::string guide;
    std::string channel;
    double center = 0.0;
    double width = 0.0;
    double index = 0.0; // includes delta_n when sampled with perturbations
    double n2 = 0.0;
};

class DeviceLayout {
public:
    std::string name = "device";
    double wavelength = 1.064;
    double n_clad = 1.55;
    double n_core = 1.57;
    std::vector<Segment> segments;

    double total_length() const {
        double l = 0.0;
        for (const auto& s : segments) l += s.length;
        return l;
    }

    /// Segment index and local normalized coordinate t for a given z
    /// (z clamped into [0, total_length]).
    std::pair<std::size_t, double> locate(double z) const {
        if (segments.empty()) throw GeometryError("DeviceLayout: no segments");
        double z0 = 0.0;
        for (std::size_t i = 0; i < segments.size(); ++i) {
            const double z1 = z0 + segments[i].length;
            if (z < z1 || i + 1 == segments.size()) {
                const double t = std::clamp((z - z0) / segments[i].length, 0.0, 1.0);
                return {i, t};
            }
            z0 = z1;
        }
        return {segments.size() - 1, 1.0};
    }

    bool in_transition(double z) const {
        return is_transition_kind(segments[locate(z).first].kind);
    }

    std::vector<CoreSample> cross_section(double z, bool with_perturbation = true,
                                          const std::string& channel_filter = "") const {
        const auto [si, t] = locate(z);
        std::vector<CoreSample> out;
        for (const auto& c : segments[si].cores) {
            if (!channel_filter.empty() && c.channel != channel_filter) continue;
            CoreSample s;
            s.guide = c.guide;
            s.channel = c.channel;
            s.center = c.center(t);
            s.width = c.width(t);
            s.index = n_core + (with_perturbation ? c.delta_n : 0.0);
            s.n2 = c.n2;
            out.push_back(std::move(s));
        }
        std::sort(out.begin(), out.end(),
                  [](const CoreSample& a, const CoreSample& b) { return a.center < b.center; });
        return out;
    }

    /// Local slab stack for one channel's cores at z (base index only when
    /// with_perturbation is false).
    SlabGeometry local_geometry(double z, const std::string& channel_filter = "",
                                bool with_perturbation = false) const {
        const auto cores = cross_section(z, with_perturbation, channel_filter);
        if (cores.empty())
            throw GeometryError("DeviceLayout: no cores for channel '" + channel_filter +
                                "' at z = " + std::to_string(z));
        std::vector<CoreSpec> specs;
        for (const auto& c : cores) specs.push_back({c.center, c.width, c.index});
        return SlabGeometry::from_cores(std::move(specs), n_clad, wavelength);
    }

    /// Exact cell average of n^2 over [x_lo, x_hi] at height z.
    double index_sq_cell_average(double x_lo, double x_hi, double z,
                                 bool with_perturbation = true) const {
        const auto cores = cross_section(z, with_perturbation);
        double acc = (x_hi - x_lo) * n_clad * n_clad;
        for (const auto& c : cores) {
            const double lo = std::max(x_lo, c.center - 0.5 * c.width);
            const double hi = std::min(x_hi, c.center + 0.5 * c.width);
            if (hi > lo) acc += (hi - lo) * (c.index * c.index - n_clad * n_clad);
        }
        return acc / (x_hi - x_lo);
    }

    /// Cell average of the Kerr coefficient over [x_lo, x_hi] at z.
    double kerr_cell_average(double x_lo, double x_hi, double z) const {
        const auto cores = cross_section(z, false);
        double acc = 0.0;
        for (const auto& c : cores) {
            if (c.n2 == 0.0) continue;
            const double lo = std::max(x_lo, c.center - 0.5 * c.width);
            const double hi = std::min(x_hi, c.center + 0.5 * c.width);
            if (hi > lo) acc += (hi - lo) * c.n2;
        }
        return acc / (x_hi - x_lo);
    }

    /// Transverse extent of all cores over the whole device.
    std::pair<double, double> transverse_extent() const {
        double lo = 1e300, hi = -1e300;
        for (const auto& s : segments)
            for (const auto& c : s.cores) {
                lo = std::min({lo, c.center0 - 0.5 * c.width0, c.center1 - 0.5 * c.width1});
                hi = std::max({hi, c.center0 + 0.5 * c.width0, c.center1 + 0.5 * c.width1});
            }
        if (lo > hi) throw GeometryError("DeviceLayout: no cores");
        return {lo, hi};
    }

    std::vector<std::string> channels() const {
        std::vector<std::string> out;
        for (const auto& s : segments)
            for (const auto& c : s.cores)
                if (std::find(out.begin(), out.end(), c.channel) == out.end())
                    out.push_back(c.channel);
        return out;
    }

    /// Number of distinct parallel-coupler z-regions.
    std::size_t count_dc_regions() const {
        std::size_t n = 0;
        for (std::size_t i = 0; i < segments.size(); ++i)
            if (segments[i].kind == SegmentKind::coupler_parallel &&
                (i == 0 || segments[i - 1].kind != SegmentKind::coupler_parallel))
                ++n;
        return n;
    }

    /// Number of distinct (guide x contiguous-z) regions with n2 != 0.
    std::size_t count_kerr_regions() const {
        std::map<std::string, bool> active;
        std::size_t n = 0;
        for (const auto& s : segments) {
            std::map<std::string, bool> now;
            for (const auto& c : s.cores)
                if (c.n2 != 0.0) now[c.guide] = true;
            for (const auto& [g, _] : now)
                if (!active.count(g)) ++n;
            active = std::move(now);
        }
        return n;
    }

    /// Cores must form the same footprint on both sides of every segment
    /// boundary (continuity of n(x) across shared z).
    void validate(double tol = 1e-9) const {
        if (segments.empty()) throw GeometryError("DeviceLayout: no segments");
        for (const auto& s : segments) {
            if (!(s.length > 0.0)) throw GeometryError("DeviceLayout: segment length must be > 0");
            for (const auto& c : s.cores) {
                if (!(c.width0 > 0.0) || !(c.width1 > 0.0))
                    throw GeometryError("DeviceLayout: core widths must be > 0");
            }
            // cores within a segment must not overlap at either end
            for (double t : {0.0, 1.0}) {
                std::vector<std::pair<double, double>> iv;
                for (const auto& c : s.cores)
                    iv.emplace_back(c.center(t) - 0.5 * c.width(t), c.center(t) + 0.5 * c.width(t));
                std::sort(iv.begin(), iv.end());
                for (std::size_t i = 1; i < iv.size(); ++i)
                    if (iv[i].first < iv[i - 1].second - 1e-9)
                        throw GeometryError("DeviceLayout: cores overlap within a segment");
            }
        }
        double z = 0.0;
        for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
            z += segments[i].length;
            const auto a = footprint(segments[i], 1.0);
            const auto b = footprint(segments[i + 1], 0.0);
            if (a.size() != b.size())
                throw GeometryError("DeviceLayout: cross-section mismatch at z = " +
                                    std::to_string(z));
            for (std::size_t j = 0; j < a.size(); ++j)
                if (std::abs(a[j].first - b[j].first) > tol ||
                    std::abs(a[j].second - b[j].second) > tol)
                    throw GeometryError("DeviceLayout: cross-section mismatch at z = " +
                                        std::to_string(z));
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema"] = kLayoutSchema;
        j["name"] = name;
        j["wavelength_um"] = wavelength;
        j["cladding_index"] = n_clad;
        j["core_index"] = n_core;
        j["segments"] = nlohmann::json::array();
        for (const auto& s : segments) {
            nlohmann::json js;
            js["kind"] = to_string(s.kind);
            js["length_um"] = s.length;
            js["cores"] = nlohmann::json::array();
            for (const auto& c : s.cores) {
                nlohmann::json jc;
                jc["guide"] = c.guide;
                jc["channel"] = c.channel;
                jc["center_start"] = c.center0;
                jc["center_end"] = c.center1;
                jc["width_start"] = c.width0;
                jc["width_end"] = c.width1;
                jc["delta_n"] = c.delta_n;
                jc["n2"] = c.n2;
                js["cores"].push_back(std::move(jc));
            }
            j["segments"].push_back(std::move(js));
        }
        return j;
    }

    static DeviceLayout from_json(const nlohmann::json& j) {
        if (!j.contains("schema") || j.at("schema").get<std::string>() != kLayoutSchema)
            throw ConfigError("DeviceLayout: missing or unsupported schema tag");
        DeviceLayout d;
        d.name = j.value("name", std::string("device"));
        d.wavelength = j.at("wavelength_um").get<double>();
        d.n_clad = j.at("cladding_index").get<double>();
        d.n_core = j.at("core_index").get<double>();
        for (const auto& js : j.at("segments")) {
            Segment s;
            s.kind = segment_kind_from_string(js.at("kind").get<std::string>());
            s.length = js.at("length_um").get<double>();
            for (const auto& jc : js.at("cores")) {
                CoreTrack c;
                c.guide = jc.at("guide").get<std::string>();
                c.channel = jc.at("channel").get<std::string>();
                c.center0 = jc.at("center_start").get<double>();
                c.center1 = jc.at("center_end").get<double>();
                c.width0 = jc.at("width_start").get<double>();
                c.width1 = jc.at("width_end").get<double>();
                c.delta_n = jc.at("delta_n").get<double>();
                c.n2 = jc.at("n2").get<double>();
                s.cores.push_back(std::move(c));
            }
            d.segments.push_back(std::move(s));
        }
        d.validate();
        return d;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw Error("DeviceLayout: cannot write " + path);
        out << to_json().dump(2) << "\n";
    }

    static DeviceLayout load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("DeviceLayout: cannot read " + path);
        nlohmann::json j;
        in >> j;
        return from_json(j);
    }

private:
    static std::vector<std::pair<double, double>> footprint(const Segment& s, double t) {
        std::vector<std::pair<double, double>> iv;
        for (const auto& c : s.cores)
            iv.emplace_back(c.center(t) - 0.5 * c.width(t), c.center(t) + 0.5 * c.width(t));
        std::sort(iv.begin(), iv.end());
        // merge touching intervals so a stem and its two just-split arms
        // compare equal where they meet
        std::vector<std::pair<double, double>> merged;
        for (const auto& p : iv) {
            if (!merged.empty() && p.first <= merged.back().second + 1e-9)
                merged.back().second = std::max(merged.back().second, p.second);
            else
                merged.push_back(p);
        }
        return merged;
    }
};

// ---------------------------------------------------------------------------
// Builders.  Shared defaults follow the reproduced device family:
// core/cladding indices 1.57/1.55 at 1.064 um, 3 um dual-mode guides,
// transition slope 0.007 (each guide center moves 0.007 um per um of z).
// ---------------------------------------------------------------------------

struct WaveguideSpec {
    double n_core = 1.57;
    double n_clad = 1.55;
    double wavelength = 1.064;
};

inline DeviceLayout build_straight(double width, double length,
                                   const WaveguideSpec& wg = {}, double center = 0.0) {
    if (!(width > 0.0) || !(length > 0.0))
        throw GeometryError("build_straight: width and length must be > 0");
    DeviceLayout d;
    d.name = "straight";
    d.wavelength = wg.wavelength;
    d.n_clad = wg.n_clad;
    d.n_core = wg.n_core;
    Segment s;
    s.kind = SegmentKind::straight;
    s.length = length;
    s.cores.push_back({"stem", "target", center, center, width, width, 0.0, 0.0});
    d.segments.push_back(std::move(s));
    d.validate();
    return d;
}

struct MziParams {
    double arm_separation = 10.0;  // center-to-center, um
    double arm_length = 0.0;       // 0: derived from total_span
    double delta_n = 8.0e-4;       // phase-shifter index offset
    double shifter_length = 1000.0;
    double stem_width = 3.0;       // dual-mode input/output guide
    double arm_width = 1.5;        // single-mode arms; must be stem_width / 2
    double slope = 0.007;          // Y-branch center slope per arm
    double stem_pad = 250.0;       // straight runs before/after the Ys
    double total_span = 5000.0;    // used when arm_length == 0
    int shifter_arm = -1;          // -1: arm on the -x side, +1: +x side
};

/// Dual-mode stem, adiabatic Y-split into two single-mode arms, delta_n on
/// one arm over shifter_length, mirror Y-merge back to the stem.
inline DeviceLayout build_phase_shifter_mzi(const MziParams& p, const WaveguideSpec& wg = {}) {
    if (std::abs(p.stem_width - 2.0 * p.arm_width) > 1e-12)
        throw GeometryError("build_phase_shifter_mzi: arms must split the stem exactly "
                            "(stem_width == 2 * arm_width)");
    if (!(p.slope > 0.0) || p.slope > 0.01)
        throw GeometryError("build_phase_shifter_mzi: Y-branch slope must be in (0, 0.01] "
                            "to stay adiabatic");
    if (p.arm_separation < 2.0 * p.arm_width)
        throw GeometryError("build_phase_shifter_mzi: arms overlap "
                            "(separation below the sum of half-widths)");
    const double split_len = (0.5 * p.arm_separation - 0.5 * p.arm_width) / p.slope;
    double arm_length = p.arm_length;
    if (arm_length <= 0.0) {
        arm_length = p.total_span - 2.0 * p.stem_pad - 2.0 * split_len;
        if (arm_length <= 0.0)
            throw GeometryError("build_phase_shifter_mzi: total_span too short for the Ys");
    }
    if (p.shifter_length > arm_length)
        throw GeometryError("build_phase_shifter_mzi: shifter longer than the arms");

    DeviceLayout d;
    d.name = "phase_shifter_mzi";
    d.wavelength = wg.wavelength;
    d.n_clad = wg.n_clad;
    d.n_core = wg.n_core;

    const double a0 = 0.5 * p.arm_width;       // arm centers at the junction
    const double a1 = 0.5 * p.arm_separation;  // arm centers when separated
    const double w = p.arm_width;
    auto arms = [&](double cm0, double cm1, double dn_m, double dn_p) {
        std::vector<CoreTrack> cs;
        cs.push_back({"arm_m", "target", -cm0, -cm1, w, w, dn_m, 0.0});
        cs.push_back({"arm_p", "target", +cm0, +cm1, w, w, dn_p, 0.0});
        return cs;
    };

    Segment stem_in{SegmentKind::straight, p.stem_pad,
                    {{"stem", "target", 0.0, 0.0, p.stem_width, p.stem_width, 0.0, 0.0}}};
    Segment split{SegmentKind::y_split, split_len, arms(a0, a1, 0.0, 0.0)};
    const double pad = 0.5 * (arm_length - p.shifter_length);
    const double dn_m = p.shifter_arm < 0 ? p.delta_n : 0.0;
    const double dn_p = p.shifter_arm < 0 ? 0.0 : p.delta_n;
    Segment merge{SegmentKind::y_merge, split_len, arms(a1, a0, 0.0, 0.0)};
    Segment stem_out{SegmentKind::straight, p.stem_pad,
                     {{"stem", "target", 0.0, 0.0, p.stem_width, p.stem_width, 0.0, 0.0}}};

    d.segments.push_back(std::move(stem_in));
    d.segments.push_back(std::move(split));
    if (pad > 0.0)
        d.segments.push_back(Segment{SegmentKind::straight, pad, arms(a1, a1, 0.0, 0.0)});
    if (p.shifter_length > 0.0)
        d.segments.push_back(
            Segment{SegmentKind::phase_section, p.shifter_length, arms(a1, a1, dn_m, dn_p)});
    if (pad > 0.0)
        d.segments.push_back(Segment{SegmentKind::straight, pad, arms(a1, a1, 0.0, 0.0)});
    d.segments.push_back(std::move(merge));
    d.segments.push_back(std::move(stem_out));
    d.validate();
    return d;
}

struct DcParams {
    double gap = 1.2;            // edge-to-edge separation in the parallel run
    double parallel_length = 823.0;
    double slope = 0.007;        // per-guide center slope in the transitions
    double far_gap = 6.0;        // edge-to-edge separation at the ports
    double width = 3.0;
    double pad = 100.0;          // straight run at the ports
};

/// Two identical guides approach along linear transitions, run parallel
/// at the given gap, then separate symmetrically (mirror-symmetric in z).
inline DeviceLayout build_directional_coupler(const DcParams& p, const WaveguideSpec& wg = {}) {
    if (p.gap < 0.0) throw GeometryError("build_directional_coupler: negative gap");
    if (!(p.slope > 0.0)) throw GeometryError("build_directional_coupler: slope must be > 0");
    if (p.far_gap < p.gap)
        throw GeometryError("build_directional_coupler: far_gap must be >= gap");
    if (p.gap == 0.0)
        throw GeometryError("build_directional_coupler: guides would intersect (gap = 0)");

    const double w = p.width;
    const double c_near = 0.5 * (w + p.gap);     // |center| in the parallel run
    const double c_far = 0.5 * (w + p.far_gap);  // |center| at the ports
    const double trans_len = (p.far_gap - p.gap) / (2.0 * p.slope);

    DeviceLayout d;
    d.name = "directional_coupler";
    d.wavelength = wg.wavelength;
    d.n_clad = wg.n_clad;
    d.n_core = wg.n_core;
    auto pair = [&](double m0, double m1) {
        std::vector<CoreTrack> cs;
        cs.push_back({"g1", "target", -m0, -m1, w, w, 0.0, 0.0});
        cs.push_back({"g2", "target", +m0, +m1, w, w, 0.0, 0.0});
        return cs;
    };
    if (p.pad > 0.0)
        d.segments.push_back(Segment{SegmentKind::straight, p.pad, pair(c_far, c_far)});
    if (trans_len > 0.0)
        d.segments.push_back(
            Segment{SegmentKind::coupler_transition, trans_len, pair(c_far, c_near)});
    d.segments.push_back(
        Segment{SegmentKind::coupler_parallel, p.parallel_length, pair(c_near, c_near)});
    if (trans_len > 0.0)
        d.segments.push_back(
            Segment{SegmentKind::coupler_transition, trans_len, pair(c_near, c_far)});
    if (p.pad > 0.0)
        d.segments.push_back(Segment{SegmentKind::straight, p.pad, pair(c_far, c_far)});
    d.validate();
    return d;
}

struct CnotParams {
    // separator couplers between the control guide and the near arm
    double dc_gap = 1.2;
    double dc_length = 823.0;      // parallel interaction length of each DC
    double slope = 0.007;
    double control_far_gap = 9.0;  // control-to-near-arm gap outside the DCs
    // target MZI with dual-mode arms
    double guide_width = 3.0;      // stem, arms and control are all dual-mode
    double arm_separation = 15.0;  // center-to-center
    double taper_length = 200.0;
    double stem_pad = 150.0;
    // Kerr medium in both arms between the two DCs
    double kerr_n2 = 1.0e-3;       // index shift per unit normalized intensity
    double kerr_length = 800.0;
    double total_span = 10000.0;   // padding stretches straight runs to this
};

/// Nonlinear MZI C-NOT: the control guide (waveguide 1) runs beside the
/// target MZI (waveguide 2); the first DC couples control TE1 light into
/// the near arm, both arms carry a Kerr section, the second DC returns
/// the control light.
inline DeviceLayout build_cnot(const CnotParams& p, const WaveguideSpec& wg = {}) {
    const double w = p.guide_width;
    if (!(p.dc_gap > 0.0)) throw GeometryError("build_cnot: dc_gap must be > 0");
    if (p.control_far_gap < p.dc_gap)
        throw GeometryError("build_cnot: control_far_gap must be >= dc_gap");
    if (p.arm_separation < 2.0 * w)
        throw GeometryError("build_cnot: arms overlap");

    const double arm_c = 0.5 * p.arm_separation;          // arm centers +-arm_c
    const double split0 = 0.5 * w;                        // arm centers after the taper
    const double split_len = (arm_c - split0) / p.slope;
    const double ctl_near = arm_c + w + p.dc_gap;         // control center in a DC
    const double ctl_far = arm_c + w + p.control_far_gap; // control center elsewhere
    const double ctl_trans = (p.control_far_gap - p.dc_gap) / p.slope;

    const double fixed = 2.0 * p.stem_pad + 2.0 * p.taper_length + 2.0 * split_len +
                         4.0 * ctl_trans + 2.0 * p.dc_length + p.kerr_length;
    const double slack = p.total_span - fixed;
    if (slack < 0.0)
        throw GeometryError("build_cnot: total_span too short for the requested sections");
    const double pad_arm = slack / 4.0; // straight arm runs around the DC block

    DeviceLayout d;
    d.name = "cnot";
    d.wavelength = wg.wavelength;
    d.n_clad = wg.n_clad;
    d.n_core = wg.n_core;

    auto stem = [&](double width0, double width1) {
        return CoreTrack{"stem", "target", 0.0, 0.0, width0, width1, 0.0, 0.0};
    };
    auto arm_m = [&](double c0, double c1, double n2) {
        return CoreTrack{"arm_m", "target", -c0, -c1, w, w, 0.0, n2};
    };
    auto arm_p = [&](double c0, double c1, double n2) {
        return CoreTrack{"arm_p", "target", c0, c1, w, w, 0.0, n2};
    };
    auto ctl = [&](double c0, double c1) {
        return CoreTrack{"control", "control", c0, c1, w, w, 0.0, 0.0};
    };

    auto seg = [&](SegmentKind kind, double len, std::vector<CoreTrack> cores) {
        d.segments.push_back(Segment{kind, len, std::move(cores)});
    };

    seg(SegmentKind::straight, p.stem_pad, {stem(w, w), ctl(ctl_far, ctl_far)});
    seg(SegmentKind::taper, p.taper_length, {stem(w, 2.0 * w), ctl(ctl_far, ctl_far)});
    seg(SegmentKind::y_split, split_len,
        {arm_m(split0, arm_c, 0.0), arm_p(split0, arm_c, 0.0), ctl(ctl_far, ctl_far)});
    seg(SegmentKind::coupler_transition, ctl_trans,
        {arm_m(arm_c, arm_c, 0.0), arm_p(arm_c, arm_c, 0.0), ctl(ctl_far, ctl_near)});
    seg(SegmentKind::coupler_parallel, p.dc_length,
        {arm_m(arm_c, arm_c, 0.0), arm_p(arm_c, arm_c, 0.0), ctl(ctl_near, ctl_near)});
    seg(SegmentKind::coupler_transition, ctl_trans,
        {arm_m(arm_c, arm_c, 0.0), arm_p(arm_c, arm_c, 0.0), ctl(ctl_near, ctl_far)});
    seg(SegmentKind::straight, pad_arm,
        {arm_m(arm_c, arm_c, 0.0), arm_p(arm_c, arm_c, 0.0), ctl(ctl_far, ctl_far)});
    seg(SegmentKind::kerr_section, p.kerr_length,
        {arm_m(arm_c, arm_c, p.kerr_n2), arm_p(arm_c, arm_c, p.kerr_n2),
         ctl(ctl_far, ctl_far)});
    seg(SegmentKind::straight, pad_arm,
        {arm_m(arm_c, arm_c, 0.0), arm_p(arm_c, arm_c, 0.0), ctl(ctl_far, ctl_far)});
    seg(SegmentKind::coupler_transition, ctl_trans,
        {arm_m(arm_c, arm_c, 0.0), arm_p(arm_c, arm_c, 0.0), ctl(ctl_far, ctl_near)});
    seg(SegmentKind::coupler_parallel, p.dc_length,
        {arm_m(arm_c, arm_c, 0.0), arm_p(arm_c, arm_c, 0.0), ctl(ctl_near, ctl_near)});
    seg(SegmentKind::coupler_transition, ctl_trans,
        {arm_m(arm_c, arm_c, 0.0), arm_p(arm_c, arm_c, 0.0), ctl(ctl_near, ctl_far)});
    seg(SegmentKind::straight, 2.0 * pad_arm,
        {arm_m(arm_c, arm_c, 0.0), arm_p(arm_c, arm_c, 0.0), ctl(ctl_far, ctl_far)});
    seg(SegmentKind::y_merge, split_len,
        {arm_m(arm_c, split0, 0.0), arm_p(arm_c, split0, 0.0), ctl(ctl_far, ctl_far)});
    seg(SegmentKind::taper, p.taper_length, {stem(2.0 * w, w), ctl(ctl_far, ctl_far)});
    seg(SegmentKind::straight, p.stem_pad, {stem(w, w), ctl(ctl_far, ctl_far)});

    d.validate();
    return d;
}

} // namespace wgqsim
