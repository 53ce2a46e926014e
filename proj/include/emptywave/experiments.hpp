#pragma once

#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "emptywave/bohmian.hpp"
#include "emptywave/circuit.hpp"
#include "emptywave/emptywave3d.hpp"
#include "emptywave/fock.hpp"
#include "emptywave/stats.hpp"

namespace ew {

enum class Model { CI, Bohm3ND, DeBroglie3D };

inline std::string model_name(Model m) {
    switch (m) {
        case Model::CI: return "CI";
        case Model::Bohm3ND: return "Bohm3ND";
        case Model::DeBroglie3D: return "DeBroglie3D";
    }
    return "?";
}

inline std::optional<Model> model_from_name(const std::string& s) {
    if (s == "CI") return Model::CI;
    if (s == "Bohm3ND") return Model::Bohm3ND;
    if (s == "DeBroglie3D") return Model::DeBroglie3D;
    return std::nullopt;
}

struct ExperimentParams {
    std::optional<double> delta_theta = 0.0;  // nullopt: uniform-random per sample
    double delta_phi = 0.0;
    double tau = 0.0;
    double sigma = 1.0;
    double alpha = 1.0;
};

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"hom", "mz", "croca_full", "appendix1",
                                                   "laser_calibration"};
    return names;
}

// ---------------------------------------------------------------------
// Circuit builders.
//
// Shared conventions: every splitter is 50/50 with transmission 1/sqrt2 and
// reflection i/sqrt2; detector ids follow the coincidence pairing 3<->2 and
// 4<->1 (a tap click at 3 accompanies an exit at 2, and 4 accompanies 1).
// ---------------------------------------------------------------------

// Two input arms onto one splitter, detectors 1 and 2.
inline Circuit build_hom(const ExperimentParams& p) {
    Circuit c;
    c.modes = {{0, "idler-in"}, {1, "signal-in"}};
    c.elements = {{0, splitter50(0, 1)}, {1, Detector{0, 1}}, {1, Detector{1, 2}}};
    c.source = TwoPhotonSource{0, 1, PacketParams{0.0, p.sigma},
                               PacketParams{p.tau, p.sigma}, p.delta_theta};
    return c;
}

// Two-splitter loop with the internal dephasing; a single photon enters arm 0
// and, at zero dephasing, exits at detector 1 (the arm parallel to its input).
inline Circuit build_mz(const ExperimentParams& p) {
    Circuit c;
    c.modes = {{0, "mz-in"}, {1, "mz-other"}};
    c.elements = {{0, splitter50(0, 1)},
                  {1, PhaseShift{1, p.delta_phi}},
                  {2, splitter50(0, 1)},
                  {3, Detector{1, 1}},
                  {3, Detector{0, 2}}};
    c.source = FockInput{{1, 0}};
    return c;
}

// Full empty-wave circuit: a tap on each input arm (reflected port to
// detectors 4 and 3), then the shared splitter, the internal dephasing and
// the recombining splitter to detectors 1 and 2.
//
// The dephasing parameter is the relative phase between the two-photon
// branches inside the loop, so the plate carries half the angle: the bunched
// pair crosses it twice, and the conditional coincidence at detectors 1 and 2
// sweeps a full fringe as delta_phi runs from 0 to pi.
inline Circuit build_croca_full(const ExperimentParams& p) {
    Circuit c;
    c.modes = {{0, "idler-arm"}, {1, "signal-arm"}, {2, "tap-4"}, {3, "tap-3"}};
    c.elements = {{0, splitter50(0, 2)},  // tap on the idler arm -> detector 4
                  {0, splitter50(1, 3)},  // tap on the signal arm -> detector 3
                  {1, Detector{2, 4}},
                  {1, Detector{3, 3}},
                  {2, splitter50(0, 1)},
                  {3, PhaseShift{1, 0.5 * p.delta_phi}},
                  {4, splitter50(0, 1)},
                  {5, Detector{0, 1}},
                  {5, Detector{1, 2}}};
    c.source = TwoPhotonSource{0, 1, PacketParams{0.0, p.sigma},
                               PacketParams{p.tau, p.sigma}, p.delta_theta};
    return c;
}

// Taps plus the single splitter, no recombination (detectors 1 and 2 sit
// directly on the splitter outputs).
inline Circuit build_appendix1(const ExperimentParams& p) {
    Circuit c;
    c.modes = {{0, "idler-arm"}, {1, "signal-arm"}, {2, "tap-4"}, {3, "tap-3"}};
    c.elements = {{0, splitter50(0, 2)},
                  {0, splitter50(1, 3)},
                  {1, Detector{2, 4}},
                  {1, Detector{3, 3}},
                  {2, splitter50(0, 1)},
                  {3, Detector{1, 1}},
                  {3, Detector{0, 2}}};
    c.source = TwoPhotonSource{0, 1, PacketParams{0.0, p.sigma},
                               PacketParams{p.tau, p.sigma}, p.delta_theta};
    return c;
}

// Laser source split onto the same optics. The taps transmit toward
// detectors 4 and 3 here, and the output legs carry fixed phase plates
// (pi and pi/2); with those conventions the four detector amplitudes come
// out exactly as
//   a1 = (i a/4)(-1 + e^{i dtheta} + e^{i dphi} + e^{i(dtheta+dphi)})
//   a2 = (i a/4)(-1 + e^{i dtheta} - e^{i dphi} - e^{i(dtheta+dphi)})
//   a3 = i a/2,  a4 = a/2.
inline Circuit build_laser_calibration(const ExperimentParams& p) {
    Circuit c;
    c.modes = {{0, "laser-arm-4"}, {1, "laser-arm-3"}, {2, "mz-p"}, {3, "mz-q"}};
    double theta = p.delta_theta.value_or(0.0);
    c.elements = {{0, splitter50(0, 1)},        // source split
                  {1, splitter50(0, 2)},        // tap: transmit to 4, reflect into the loop
                  {1, splitter50(1, 3)},        // tap: transmit to 3
                  {2, Detector{0, 4}},
                  {2, Detector{1, 3}},
                  {3, PhaseShift{3, theta}},    // input dephasing on the 3-side arm
                  {4, splitter50(2, 3)},
                  {5, PhaseShift{3, p.delta_phi}},
                  {6, splitter50(2, 3)},
                  {7, PhaseShift{2, M_PI}},     // output-leg plates
                  {7, PhaseShift{3, M_PI / 2.0}},
                  {8, Detector{2, 1}},
                  {8, Detector{3, 2}}};
    CoherentSource src;
    src.amplitudes.assign(4, complexd{0, 0});
    src.amplitudes[0] = complexd(p.alpha, 0.0);
    c.source = src;
    return c;
}

inline Circuit build(const std::string& name, const ExperimentParams& p) {
    if (name == "hom") return build_hom(p);
    if (name == "mz") return build_mz(p);
    if (name == "croca_full") return build_croca_full(p);
    if (name == "appendix1") return build_appendix1(p);
    if (name == "laser_calibration") return build_laser_calibration(p);
    throw std::invalid_argument("unknown experiment '" + name + "'");
}

// Reference detector-plane state of the full circuit at zero dephasing:
// occupation amplitude -1/2 on each of the four click pairs
// {1,2}, {2,3}, {1,4}, {3,4}.
inline FockState croca_reference_state() {
    // wire order of build_croca_full: 0 -> detector 1, 1 -> detector 2,
    // 2 -> detector 4, 3 -> detector 3
    FockState s = vacuum(4);
    s.amps.clear();
    auto put = [&](int wa, int wb) {
        Occ o = s.empty_occ();
        o[wa] += 1;
        o[wb] += 1;
        s.amps[o] = complexd(-0.5, 0.0);
    };
    put(0, 1);  // detectors 1 & 2
    put(1, 3);  // detectors 2 & 3
    put(0, 2);  // detectors 1 & 4
    put(2, 3);  // detectors 3 & 4
    return s;
}

// Closed-form coherent amplitudes of the laser network, by detector id.
inline std::map<int, complexd> laser_reference_amplitudes(double alpha, double theta,
                                                          double phi) {
    complexd i{0, 1};
    complexd et = std::exp(i * theta), ep = std::exp(i * phi);
    std::map<int, complexd> out;
    out[1] = i * alpha / 4.0 * (-1.0 + et + ep + et * ep);
    out[2] = i * alpha / 4.0 * (-1.0 + et - ep - et * ep);
    out[3] = i * alpha / 2.0;
    out[4] = alpha / 2.0;
    return out;
}

// ---------------------------------------------------------------------
// Cross-model comparison harness.
// ---------------------------------------------------------------------

struct ExperimentSpec {
    std::string name;
    std::vector<Model> models{Model::CI, Model::Bohm3ND, Model::DeBroglie3D};
    ExperimentParams params;
    int n_samples = 100000;
    std::uint64_t seed = 1;

    void validate() const {
        bool known = false;
        for (const auto& n : experiment_names()) known |= (n == name);
        if (!known) throw std::invalid_argument("unknown experiment '" + name + "'");
        if (models.empty()) throw std::invalid_argument("no models requested");
        if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
        if (params.sigma <= 0.0) throw std::invalid_argument("sigma must be positive");
        auto phase_ok = [](double x) { return x >= 0.0 && x < 2.0 * M_PI + 1e-12; };
        if (params.delta_theta && !phase_ok(*params.delta_theta))
            throw std::invalid_argument("delta_theta outside [0, 2pi)");
        if (!phase_ok(params.delta_phi))
            throw std::invalid_argument("delta_phi outside [0, 2pi)");
    }
};

struct StatValue {
    double value = 0.0;
    double stderr_ = 0.0;  // zero for exact/analytic entries
    bool exact = true;
};

struct ModelResult {
    std::map<std::string, StatValue> stats;
    double runtime_ms = 0.0;
};

struct ExperimentResult {
    std::string experiment;
    ExperimentParams params;
    std::map<Model, ModelResult> per_model;
    std::vector<std::string> divergences;
};

namespace detail {

inline double exact_conditional(const ClickDistribution& d,
                                const std::function<bool(const Pattern&)>& event,
                                const std::function<bool(const Pattern&)>& cond) {
    double pj = 0.0, pc = 0.0;
    for (const auto& [pat, p] : d.p)
        if (cond(pat)) {
            pc += p;
            if (event(pat)) pj += p;
        }
    if (pc <= 0.0) throw std::domain_error("condition has zero probability");
    return pj / pc;
}

struct PatternViews {
    int i1 = -1, i2 = -1, i3 = -1, i4 = -1;

    explicit PatternViews(const ClickDistribution& d) {
        for (size_t i = 0; i < d.detector_ids.size(); ++i) {
            int id = d.detector_ids[i];
            if (id == 1) i1 = static_cast<int>(i);
            if (id == 2) i2 = static_cast<int>(i);
            if (id == 3) i3 = static_cast<int>(i);
            if (id == 4) i4 = static_cast<int>(i);
        }
    }
};

// statistics shared by the exact engine and the samplers, computed off a
// click distribution (with stderrs when present)
inline std::map<std::string, StatValue> pattern_statistics(const std::string& experiment,
                                                           const ClickDistribution& d,
                                                           long n_samples) {
    PatternViews v(d);
    bool sampled = n_samples > 0;
    auto freq = [&](const std::function<bool(const Pattern&)>& event,
                    const std::function<bool(const Pattern&)>& cond) {
        double pj = 0.0, pc = 0.0;
        for (const auto& [pat, p] : d.p)
            if (cond(pat)) {
                pc += p;
                if (event(pat)) pj += p;
            }
        StatValue s;
        if (pc <= 0.0) return s;
        s.value = pj / pc;
        if (sampled) {
            long nc = std::lround(pc * n_samples);
            s.exact = false;
            s.stderr_ = nc > 0 ? std::sqrt(std::max(0.0, s.value * (1 - s.value)) / nc) : 0.0;
        }
        return s;
    };
    auto always = [](const Pattern&) { return true; };
    std::map<std::string, StatValue> out;
    if (experiment == "hom") {
        out["p_coinc_12"] =
            freq([&](const Pattern& k) { return k[v.i1] > 0 && k[v.i2] > 0; }, always);
    } else if (experiment == "mz") {
        out["p_d1"] = freq([&](const Pattern& k) { return k[v.i1] > 0; }, always);
        out["p_d2"] = freq([&](const Pattern& k) { return k[v.i2] > 0; }, always);
    } else if (experiment == "croca_full") {
        auto xor34 = [&](const Pattern& k) { return (k[v.i3] > 0) != (k[v.i4] > 0); };
        auto only3 = [&](const Pattern& k) { return k[v.i3] > 0 && k[v.i4] == 0; };
        auto only4 = [&](const Pattern& k) { return k[v.i4] > 0 && k[v.i3] == 0; };
        auto both_mz = [&](const Pattern& k) { return k[v.i1] + k[v.i2] == 2; };
        out["p1_given_3xor4"] =
            freq([&](const Pattern& k) { return k[v.i1] > 0; }, xor34);
        out["p2_given_3xor4"] =
            freq([&](const Pattern& k) { return k[v.i2] > 0; }, xor34);
        out["p2_given_3only"] = freq([&](const Pattern& k) { return k[v.i2] > 0; }, only3);
        out["p1_given_4only"] = freq([&](const Pattern& k) { return k[v.i1] > 0; }, only4);
        out["p_coinc12_given_bothmz"] =
            freq([&](const Pattern& k) { return k[v.i1] == 1 && k[v.i2] == 1; }, both_mz);
        out["p_joint_34"] =
            freq([&](const Pattern& k) { return k[v.i3] > 0 && k[v.i4] > 0; }, always);
    } else if (experiment == "appendix1") {
        auto xor34 = [&](const Pattern& k) { return (k[v.i3] > 0) != (k[v.i4] > 0); };
        out["p1_and_3xor4"] =
            freq([&](const Pattern& k) { return k[v.i1] > 0 && xor34(k); }, always);
        out["p2_and_3xor4"] =
            freq([&](const Pattern& k) { return k[v.i2] > 0 && xor34(k); }, always);
    }
    return out;
}

}  // namespace detail

// Exact (collapse-interpretation) statistics from the truncated Fock engine.
inline ModelResult run_ci(const ExperimentSpec& spec) {
    auto t0 = std::chrono::steady_clock::now();
    Circuit c = build(spec.name, spec.params);
    ModelResult out;
    if (spec.name == "laser_calibration") {
        CoherentField in;
        const auto* src = std::get_if<CoherentSource>(&c.source);
        in.alpha = src->amplitudes;
        CoherentField f = propagate_coherent(in, c);
        for (const auto& [id, mode] : c.detector_modes())
            out.stats["mean_d" + std::to_string(id)] = {std::norm(f.alpha[mode]), 0.0, true};
    } else {
        FockState final_state = propagate(make_input_state(c, 4, 0.0), c);
        ClickDistribution d = detection_distribution(final_state, c);
        out.stats = detail::pattern_statistics(spec.name, d, 0);
    }
    out.runtime_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    return out;
}

// Configuration-space pilot-wave statistics (branch sampler). Coherent
// sources take the analytic route: linear-optics coherent states stay
// product states, so the pilot-wave marginals coincide with the exact ones.
inline ModelResult run_bohm(const ExperimentSpec& spec) {
    auto t0 = std::chrono::steady_clock::now();
    Circuit c = build(spec.name, spec.params);
    ModelResult out;
    if (spec.name == "laser_calibration") {
        out = run_ci(spec);
        return out;
    }
    BranchOptions opt;
    opt.n_samples = spec.n_samples;
    opt.seed = spec.seed;
    auto ens = sample_branch_dynamics(c, opt);
    out.stats = detail::pattern_statistics(spec.name, ens.clicks, spec.n_samples);
    out.runtime_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    return out;
}

// 3D hybrid-model statistics (classical waves + intensity-share routing).
inline ModelResult run_debroglie(const ExperimentSpec& spec) {
    auto t0 = std::chrono::steady_clock::now();
    Circuit c = build(spec.name, spec.params);
    ModelResult out;
    if (spec.name == "laser_calibration") {
        // the wave amplitudes ARE the coherent amplitudes: exact agreement
        auto intens = detector_intensities(c, 0.0);  // dephasings sit in the circuit
        for (const auto& [id, val] : intens)
            out.stats["mean_d" + std::to_string(id)] = {val, 0.0, true};
        out.runtime_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        return out;
    }
    CoherenceMode mode = spec.params.delta_theta
                             ? CoherenceMode::fixed(*spec.params.delta_theta)
                             : CoherenceMode::uniform();
    auto ens = run_hybrid_model(c, mode, spec.n_samples, spec.seed);
    out.stats = detail::pattern_statistics(spec.name, ens.ensemble.clicks, spec.n_samples);
    if (ens.breakdowns > 0)
        out.stats["model_breakdown_rate"] = {
            static_cast<double>(ens.breakdowns) / spec.n_samples, 0.0, false};
    out.runtime_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    return out;
}

inline ModelResult run_model(Model m, const ExperimentSpec& spec) {
    switch (m) {
        case Model::CI: return run_ci(spec);
        case Model::Bohm3ND: return run_bohm(spec);
        case Model::DeBroglie3D: return run_debroglie(spec);
    }
    throw std::logic_error("unreachable");
}

// Runs every requested model on the identical circuit and seed discipline,
// then flags any pair of models separated by more than five combined
// standard errors on a shared statistic.
inline ExperimentResult compare_models(const ExperimentSpec& spec) {
    spec.validate();
    ExperimentResult out;
    out.experiment = spec.name;
    out.params = spec.params;
    for (Model m : spec.models) out.per_model[m] = run_model(m, spec);

    std::vector<Model> models;
    for (const auto& [m, r] : out.per_model) models.push_back(m);
    for (size_t i = 0; i < models.size(); ++i)
        for (size_t j = i + 1; j < models.size(); ++j) {
            const auto& a = out.per_model.at(models[i]);
            const auto& b = out.per_model.at(models[j]);
            for (const auto& [stat, va] : a.stats) {
                auto it = b.stats.find(stat);
                if (it == b.stats.end()) continue;
                const auto& vb = it->second;
                double se = std::hypot(va.stderr_, vb.stderr_);
                double gap = std::abs(va.value - vb.value);
                bool diverges = se > 0.0 ? gap > 5.0 * se : gap > 1e-9;
                if (diverges)
                    out.divergences.push_back(model_name(models[i]) + " vs " +
                                              model_name(models[j]) + " on " + stat);
            }
        }
    return out;
}

struct SweepResult {
    std::string parameter;
    std::vector<double> grid;
    std::vector<ExperimentResult> points;

    // series of one statistic across the sweep
    std::vector<double> series(Model m, const std::string& stat) const {
        std::vector<double> out;
        for (const auto& pt : points) out.push_back(pt.per_model.at(m).stats.at(stat).value);
        return out;
    }

    FringeFit visibility(Model m, const std::string& stat) const {
        return fit_fringe(grid, series(m, stat));
    }
};

inline bool parameter_is_sweepable(const std::string& p) {
    return p == "delta_theta" || p == "delta_phi" || p == "tau" || p == "alpha";
}

inline SweepResult sweep(ExperimentSpec spec, const std::string& parameter,
                         const std::vector<double>& grid) {
    if (!parameter_is_sweepable(parameter))
        throw std::invalid_argument("parameter '" + parameter + "' is not sweepable");
    SweepResult out;
    out.parameter = parameter;
    out.grid = grid;
    for (double x : grid) {
        ExperimentSpec pt = spec;
        if (parameter == "delta_theta") pt.params.delta_theta = x;
        if (parameter == "delta_phi") pt.params.delta_phi = x;
        if (parameter == "tau") pt.params.tau = x;
        if (parameter == "alpha") pt.params.alpha = x;
        out.points.push_back(compare_models(pt));
    }
    return out;
}

}  // namespace ew
