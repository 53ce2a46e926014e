#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace ew {

using complexd = std::complex<double>;

struct ModeId {
    int index = 0;
    std::string label;
};

// Beamsplitter convention used throughout: the 2x2 mode map is
// [[t, r], [r, t]] with t real-positive and r = i*|r| unless a builder
// overrides it, so a 50/50 splitter is (1/sqrt2)[[1, i], [i, 1]].
struct Beamsplitter {
    int mode_a = 0;
    int mode_b = 0;
    complexd t{1.0, 0.0};
    complexd r{0.0, 0.0};
};

struct PhaseShift {
    int mode = 0;
    double phase = 0.0;  // radians
};

// A delay carries no mode-space phase; it only offsets the wave packet of
// whatever source feeds this mode (consumed by the Fock engine's overlap).
struct Delay {
    int mode = 0;
    double delay = 0.0;  // time units
};

struct Detector {
    int mode = 0;
    int detector_id = 0;
};

struct Element {
    int stage = 0;
    std::variant<Beamsplitter, PhaseShift, Delay, Detector> op;
};

struct PacketParams {
    double center_time = 0.0;
    double bandwidth = 1.0;  // Gaussian, sigma > 0
};

struct TwoPhotonSource {
    int idler_mode = 0;
    int signal_mode = 1;
    PacketParams idler_packet;
    PacketParams signal_packet;
    std::optional<double> relative_phase = 0.0;  // nullopt: uniform-random
};

struct CoherentSource {
    std::vector<complexd> amplitudes;  // one alpha per mode
};

struct FockInput {
    std::vector<int> occupation;  // one count per mode
};

using SourceSpec = std::variant<std::monostate, TwoPhotonSource, CoherentSource, FockInput>;

struct Circuit {
    std::vector<ModeId> modes;
    std::vector<Element> elements;  // must be processed in stage order
    SourceSpec source;

    int mode_count() const { return static_cast<int>(modes.size()); }

    std::vector<Element> sorted_elements() const {
        std::vector<Element> out = elements;
        std::stable_sort(out.begin(), out.end(),
                         [](const Element& a, const Element& b) { return a.stage < b.stage; });
        return out;
    }

    // detector_id -> mode
    std::map<int, int> detector_modes() const {
        std::map<int, int> out;
        for (const auto& e : elements)
            if (const auto* d = std::get_if<Detector>(&e.op)) out[d->detector_id] = d->mode;
        return out;
    }

    std::vector<int> source_modes() const {
        std::vector<int> out;
        if (const auto* tp = std::get_if<TwoPhotonSource>(&source)) {
            out = {tp->idler_mode, tp->signal_mode};
        } else if (const auto* co = std::get_if<CoherentSource>(&source)) {
            for (int m = 0; m < static_cast<int>(co->amplitudes.size()); ++m)
                if (std::abs(co->amplitudes[m]) > 0.0) out.push_back(m);
        } else if (const auto* fi = std::get_if<FockInput>(&source)) {
            for (int m = 0; m < static_cast<int>(fi->occupation.size()); ++m)
                if (fi->occupation[m] > 0) out.push_back(m);
        }
        return out;
    }

    // accumulated delay on a mode (any stage); see Delay above
    double total_delay(int mode) const {
        double d = 0.0;
        for (const auto& e : elements)
            if (const auto* dl = std::get_if<Delay>(&e.op))
                if (dl->mode == mode) d += dl->delay;
        return d;
    }
};

struct ValidationReport {
    bool ok = true;
    std::vector<std::string> violations;

    void fail(const std::string& what) {
        ok = false;
        violations.push_back(what);
    }
};

namespace detail {

inline int element_modes(const Element& e, int out[2]) {
    return std::visit(
        [&](const auto& op) -> int {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, Beamsplitter>) {
                out[0] = op.mode_a;
                out[1] = op.mode_b;
                return 2;
            } else {
                out[0] = op.mode;
                return 1;
            }
        },
        e.op);
}

}  // namespace detail

inline ValidationReport validate(const Circuit& c) {
    ValidationReport rep;
    const int m = c.mode_count();

    std::set<int> indices;
    std::set<std::string> labels;
    for (const auto& mode : c.modes) {
        if (!indices.insert(mode.index).second)
            rep.fail("duplicate mode index " + std::to_string(mode.index));
        if (!mode.label.empty() && !labels.insert(mode.label).second)
            rep.fail("duplicate mode label '" + mode.label + "'");
        if (mode.index < 0 || mode.index >= m)
            rep.fail("mode index " + std::to_string(mode.index) + " outside [0, modes)");
    }

    auto known = [&](int mode) { return mode >= 0 && mode < m && indices.count(mode) > 0; };

    std::set<std::pair<int, int>> used;  // (stage, mode): at most one element per mode per stage
    std::map<int, int> detector_stage;   // mode -> stage of its detector
    std::set<int> detector_ids;

    for (const auto& e : c.elements) {
        if (e.stage < 0) rep.fail("negative stage");
        int mm[2];
        int n = detail::element_modes(e, mm);
        for (int i = 0; i < n; ++i) {
            if (!known(mm[i])) {
                rep.fail("unknown mode " + std::to_string(mm[i]));
                continue;
            }
            if (!used.insert({e.stage, mm[i]}).second)
                rep.fail("mode " + std::to_string(mm[i]) + " fed twice at stage " +
                         std::to_string(e.stage));
        }
        if (const auto* bs = std::get_if<Beamsplitter>(&e.op)) {
            if (bs->mode_a == bs->mode_b) rep.fail("beamsplitter on a single mode");
            double norm = std::norm(bs->t) + std::norm(bs->r);
            double cross = std::abs(bs->t * std::conj(bs->r) + bs->r * std::conj(bs->t));
            if (std::abs(norm - 1.0) > 1e-12 || cross > 1e-12) rep.fail("non-unitary element");
        } else if (const auto* d = std::get_if<Detector>(&e.op)) {
            if (known(d->mode)) detector_stage[d->mode] = e.stage;
            if (!detector_ids.insert(d->detector_id).second)
                rep.fail("duplicate detector id " + std::to_string(d->detector_id));
        }
    }

    // detectors terminate their modes
    for (const auto& e : c.elements) {
        int mm[2];
        int n = detail::element_modes(e, mm);
        bool is_det = std::holds_alternative<Detector>(e.op);
        for (int i = 0; i < n; ++i) {
            auto it = detector_stage.find(mm[i]);
            if (it != detector_stage.end() && e.stage > it->second && !is_det)
                rep.fail("element acts on mode " + std::to_string(mm[i]) +
                         " after its detector");
        }
    }

    // source modes exist, and every lit path ends in a detector
    std::vector<int> src = c.source_modes();
    for (int s : src)
        if (!known(s)) rep.fail("source feeds unknown mode " + std::to_string(s));
    if (const auto* tp = std::get_if<TwoPhotonSource>(&c.source)) {
        if (tp->idler_mode == tp->signal_mode) rep.fail("two-photon source on a single mode");
        if (tp->idler_packet.bandwidth <= 0.0 || tp->signal_packet.bandwidth <= 0.0)
            rep.fail("non-positive packet bandwidth");
    }
    if (const auto* co = std::get_if<CoherentSource>(&c.source)) {
        for (const auto& a : co->amplitudes)
            if (!std::isfinite(a.real()) || !std::isfinite(a.imag()))
                rep.fail("non-finite coherent amplitude");
        if (static_cast<int>(co->amplitudes.size()) != m)
            rep.fail("coherent amplitude count != mode count");
    }
    if (!src.empty()) {
        std::set<int> lit(src.begin(), src.end());
        for (const auto& e : c.sorted_elements()) {
            if (const auto* bs = std::get_if<Beamsplitter>(&e.op))
                if (lit.count(bs->mode_a) || lit.count(bs->mode_b)) {
                    lit.insert(bs->mode_a);
                    lit.insert(bs->mode_b);
                }
        }
        for (int mode : lit)
            if (!detector_stage.count(mode))
                rep.fail("lit mode " + std::to_string(mode) + " does not end in a detector");
    }

    return rep;
}

inline void ensure_valid(const Circuit& c) {
    ValidationReport rep = validate(c);
    if (!rep.ok) {
        std::ostringstream os;
        os << "invalid circuit:";
        for (const auto& v : rep.violations) os << " [" << v << "]";
        throw std::invalid_argument(os.str());
    }
}

// Mode-space unitary of the passive network (sources ignored).
inline Eigen::MatrixXcd compile_unitary(const Circuit& c) {
    ensure_valid(c);
    const int m = c.mode_count();
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(m, m);
    for (const auto& e : c.sorted_elements()) {
        if (const auto* bs = std::get_if<Beamsplitter>(&e.op)) {
            Eigen::MatrixXcd step = Eigen::MatrixXcd::Identity(m, m);
            step(bs->mode_a, bs->mode_a) = bs->t;
            step(bs->mode_a, bs->mode_b) = bs->r;
            step(bs->mode_b, bs->mode_a) = bs->r;
            step(bs->mode_b, bs->mode_b) = bs->t;
            u = step * u;
        } else if (const auto* ps = std::get_if<PhaseShift>(&e.op)) {
            u.row(ps->mode) *= std::exp(complexd(0.0, ps->phase));
        }
        // Delay and Detector leave the mode unitary untouched.
    }
    return u;
}

inline Beamsplitter splitter50(int a, int b) {
    return Beamsplitter{a, b, complexd(1.0 / std::sqrt(2.0), 0.0),
                        complexd(0.0, 1.0 / std::sqrt(2.0))};
}

}  // namespace ew
