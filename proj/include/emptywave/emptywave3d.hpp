#pragma once

// 3D hybrid pilot-wave model: classical complex amplitudes propagate through
// every branch of the network and never collapse; the particles hop between
// arms at each junction with probability proportional to the local
// coherent-sum intensity.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "emptywave/bohmian.hpp"
#include "emptywave/circuit.hpp"
#include "emptywave/rng.hpp"
#include "emptywave/stats.hpp"

namespace ew {

struct CoherenceMode {
    enum class Kind { Fixed, UniformRandom };
    Kind kind = Kind::Fixed;
    double delta_theta = 0.0;

    static CoherenceMode fixed(double theta) { return {Kind::Fixed, theta}; }
    static CoherenceMode uniform() { return {Kind::UniformRandom, 0.0}; }
};

class ModelBreakdown : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Per-wave amplitudes after every element, in processing order.
struct ArmField {
    std::vector<Element> elements;                    // processed order
    std::vector<Eigen::VectorXcd> initial;            // [wave] -> amplitudes
    std::vector<std::vector<Eigen::VectorXcd>> after; // [step][wave]

    complexd coherent_sum(int step, int mode) const {
        complexd s{0, 0};
        for (const auto& w : after[step]) s += w(mode);
        return s;
    }

    double intensity(int step, int mode) const { return std::norm(coherent_sum(step, mode)); }

    int steps() const { return static_cast<int>(after.size()); }
};

inline ArmField propagate_fields(const Circuit& c, std::vector<Eigen::VectorXcd> waves) {
    ensure_valid(c);
    const int m = c.mode_count();
    for (const auto& w : waves)
        if (w.size() != m) throw std::invalid_argument("wave amplitude size != mode count");
    ArmField out;
    out.elements = c.sorted_elements();
    out.initial = waves;
    for (const auto& e : out.elements) {
        if (const auto* bs = std::get_if<Beamsplitter>(&e.op)) {
            for (auto& w : waves) {
                complexd a = w(bs->mode_a), b = w(bs->mode_b);
                w(bs->mode_a) = bs->t * a + bs->r * b;
                w(bs->mode_b) = bs->r * a + bs->t * b;
            }
        } else if (const auto* ps = std::get_if<PhaseShift>(&e.op)) {
            for (auto& w : waves) w(ps->mode) *= std::exp(complexd(0, ps->phase));
        }
        out.after.push_back(waves);
    }
    return out;
}

struct ParticleState {
    int mode = 0;
    bool detected = false;
    int detector_id = -1;
};

// Routing rule of the hybrid model: output j with probability
// |A_j|^2 / sum_k |A_k|^2 over the junction's coherent sums.
inline ParticleState route_particle(const ParticleState& p,
                                    const std::vector<std::pair<int, double>>& outputs,
                                    RngStream& rng) {
    double total = 0.0;
    for (const auto& [mode, intensity] : outputs) total += intensity;
    if (total <= 0.0)
        throw ModelBreakdown("all junction output intensities vanish");
    double u = rng.uniform() * total;
    ParticleState out = p;
    for (const auto& [mode, intensity] : outputs) {
        u -= intensity;
        if (u < 0.0) {
            out.mode = mode;
            return out;
        }
    }
    out.mode = outputs.back().first;
    return out;
}

struct EmptyWaveEnsemble {
    TrajectoryEnsemble ensemble;
    int breakdowns = 0;
};

namespace detail {

// wave inputs implied by the circuit source; theta multiplies the signal wave
inline std::vector<Eigen::VectorXcd> source_waves(const Circuit& c, double theta) {
    const int m = c.mode_count();
    std::vector<Eigen::VectorXcd> waves;
    if (const auto* tp = std::get_if<TwoPhotonSource>(&c.source)) {
        Eigen::VectorXcd idler = Eigen::VectorXcd::Zero(m);
        Eigen::VectorXcd signal = Eigen::VectorXcd::Zero(m);
        idler(tp->idler_mode) = complexd(1, 0);
        signal(tp->signal_mode) = std::exp(complexd(0, theta));
        waves.push_back(idler);
        waves.push_back(signal);
    } else if (const auto* fi = std::get_if<FockInput>(&c.source)) {
        int photons = 0;
        for (int n : fi->occupation) photons += n;
        if (photons != 1)
            throw std::invalid_argument("hybrid walker supports one- or two-photon sources");
        Eigen::VectorXcd w = Eigen::VectorXcd::Zero(m);
        for (int i = 0; i < m && i < static_cast<int>(fi->occupation.size()); ++i)
            if (fi->occupation[i] > 0) w(i) = complexd(1, 0);
        waves.push_back(w);
    } else if (const auto* co = std::get_if<CoherentSource>(&c.source)) {
        // classical-wave picture of a laser: one wave carrying the alphas
        Eigen::VectorXcd w = Eigen::VectorXcd::Zero(m);
        for (int i = 0; i < m && i < static_cast<int>(co->amplitudes.size()); ++i)
            w(i) = co->amplitudes[i];
        waves.push_back(w);
    } else {
        throw std::invalid_argument("hybrid walker needs a photon-number source");
    }
    return waves;
}

inline std::vector<int> particle_start_modes(const Circuit& c) {
    if (const auto* tp = std::get_if<TwoPhotonSource>(&c.source))
        return {tp->idler_mode, tp->signal_mode};
    return c.source_modes();
}

}  // namespace detail

// Monte-Carlo run of the hybrid model over the circuit. Waves propagate
// through all branches for the whole run (no collapse at clicks); each
// particle routes junction by junction through the coherent-sum intensities.
inline EmptyWaveEnsemble run_hybrid_model(const Circuit& circuit, CoherenceMode coherence,
                                          int n_samples, std::uint64_t seed) {
    ensure_valid(circuit);
    const auto det_modes = circuit.detector_modes();
    std::vector<int> det_ids;
    for (const auto& [id, mode] : det_modes) det_ids.push_back(id);
    std::map<int, int> id_index;
    for (size_t i = 0; i < det_ids.size(); ++i) id_index[det_ids[i]] = static_cast<int>(i);

    bool fixed = coherence.kind == CoherenceMode::Kind::Fixed;
    std::optional<ArmField> cached;
    if (fixed)
        cached = propagate_fields(circuit, detail::source_waves(circuit, coherence.delta_theta));

    std::map<Pattern, long> counts;
    int breakdowns = 0;
    std::mutex merge_mutex;

    ew::detail::parallel_samples(n_samples, [&](int lo, int hi) {
        std::map<Pattern, long> local;
        int local_breakdowns = 0;
        for (int sample = lo; sample < hi; ++sample) {
            RngStream rng(seed, static_cast<std::uint64_t>(sample));
            double theta = fixed ? coherence.delta_theta : rng.uniform(0.0, 2.0 * M_PI);
            ArmField owned;
            const ArmField* fld;
            if (fixed) {
                fld = &*cached;
            } else {
                owned = propagate_fields(circuit, detail::source_waves(circuit, theta));
                fld = &owned;
            }

            std::vector<ParticleState> particles;
            for (int mode : detail::particle_start_modes(circuit))
                particles.push_back(ParticleState{mode});

            Pattern pattern(det_ids.size(), 0);
            bool broke = false;
            for (int step = 0; step < fld->steps() && !broke; ++step) {
                const Element& e = fld->elements[step];
                if (const auto* bs = std::get_if<Beamsplitter>(&e.op)) {
                    std::vector<std::pair<int, double>> outputs = {
                        {bs->mode_a, fld->intensity(step, bs->mode_a)},
                        {bs->mode_b, fld->intensity(step, bs->mode_b)}};
                    for (auto& p : particles) {
                        if (p.detected || (p.mode != bs->mode_a && p.mode != bs->mode_b))
                            continue;
                        try {
                            p = route_particle(p, outputs, rng);
                        } catch (const ModelBreakdown&) {
                            broke = true;
                            break;
                        }
                    }
                } else if (const auto* d = std::get_if<Detector>(&e.op)) {
                    for (auto& p : particles) {
                        if (p.detected || p.mode != d->mode) continue;
                        p.detected = true;
                        p.detector_id = d->detector_id;
                        pattern[id_index[d->detector_id]] += 1;
                    }
                }
            }
            if (broke) {
                ++local_breakdowns;
                continue;
            }
            auto [it, inserted] = local.emplace(pattern, 1);
            if (!inserted) it->second += 1;
        }
        std::lock_guard<std::mutex> lock(merge_mutex);
        for (const auto& [pat, n] : local) counts[pat] += n;
        breakdowns += local_breakdowns;
    });

    EmptyWaveEnsemble out;
    out.breakdowns = breakdowns;
    out.ensemble.seed = seed;
    out.ensemble.n_samples = n_samples;
    out.ensemble.clicks.detector_ids = det_ids;
    for (const auto& [pat, n] : counts) {
        double p = static_cast<double>(n) / n_samples;
        out.ensemble.clicks.p[pat] = p;
        out.ensemble.clicks.stderrs[pat] = std::sqrt(p * (1.0 - p) / n_samples);
    }
    return out;
}

// Coherent-sum intensity at each detector for a given theta (analytic path).
inline std::map<int, double> detector_intensities(const Circuit& c, double theta) {
    ArmField field = propagate_fields(c, detail::source_waves(c, theta));
    std::map<int, double> out;
    int last = field.steps() - 1;
    for (const auto& [id, mode] : c.detector_modes())
        out[id] = field.intensity(last, mode);
    return out;
}

// --- the two named experiments of the model -----------------------------

struct CrocaResult {
    TrajectoryEnsemble::Estimate p1_given_xor;       // P(1 | click at 3 xor 4)
    TrajectoryEnsemble::Estimate p2_given_xor;
    TrajectoryEnsemble::Estimate p2_given_3only;     // the discriminating statistic
    TrajectoryEnsemble::Estimate p1_given_4only;
    double p_no_mz_click_given_xor = 0.0;            // normalization check
    double analytic_p1_given_xor = 0.0;              // from the intensity fast path
    ClickDistribution clicks;
    int breakdowns = 0;
};

// Conditional firing statistics of detectors 1/2 given a click at 3 xor 4
// on the full empty-wave circuit. The analytic path integrates the
// closed-form intensities (midpoint rule is exact for this trig polynomial).
inline CrocaResult run_croca(const Circuit& circuit, CoherenceMode coherence, int n_samples,
                             std::uint64_t seed) {
    EmptyWaveEnsemble ens = run_hybrid_model(circuit, coherence, n_samples, seed);
    const auto& clicks = ens.ensemble.clicks;
    int i1 = clicks.id_index(1), i2 = clicks.id_index(2);
    int i3 = clicks.id_index(3), i4 = clicks.id_index(4);
    auto xor34 = [=](const Pattern& k) { return (k[i3] > 0) != (k[i4] > 0); };
    auto only3 = [=](const Pattern& k) { return k[i3] > 0 && k[i4] == 0; };
    auto only4 = [=](const Pattern& k) { return k[i4] > 0 && k[i3] == 0; };
    CrocaResult out;
    out.clicks = clicks;
    out.breakdowns = ens.breakdowns;
    out.p1_given_xor = ens.ensemble.conditional([=](const Pattern& k) { return k[i1] > 0; },
                                                xor34);
    out.p2_given_xor = ens.ensemble.conditional([=](const Pattern& k) { return k[i2] > 0; },
                                                xor34);
    out.p2_given_3only = ens.ensemble.conditional(
        [=](const Pattern& k) { return k[i2] > 0; }, only3);
    out.p1_given_4only = ens.ensemble.conditional(
        [=](const Pattern& k) { return k[i1] > 0; }, only4);
    out.p_no_mz_click_given_xor =
        ens.ensemble
            .conditional([=](const Pattern& k) { return k[i1] == 0 && k[i2] == 0; }, xor34)
            .value;

    auto p1_at = [&](double theta) {
        auto intens = detector_intensities(circuit, theta);
        double i_mz = intens.at(1) + intens.at(2);
        return i_mz > 0.0 ? intens.at(1) / i_mz : 0.0;
    };
    if (coherence.kind == CoherenceMode::Kind::Fixed) {
        out.analytic_p1_given_xor = p1_at(coherence.delta_theta);
    } else {
        double acc = 0.0;
        const int grid = 32;
        for (int i = 0; i < grid; ++i) acc += p1_at((i + 0.5) * 2.0 * M_PI / grid);
        out.analytic_p1_given_xor = acc / grid;
    }
    return out;
}

struct Appendix1Result {
    std::vector<double> thetas;
    std::vector<TrajectoryEnsemble::Estimate> p1_and_xor;  // unconditional normalization
    std::vector<TrajectoryEnsemble::Estimate> p2_and_xor;
    std::vector<double> analytic_p1_and_xor;
    FringeFit fit;                      // fitted to the analytic curve
    std::optional<FringeFit> fit_mc;    // fitted to the sampled points

    double visibility() const { return fit.visibility(); }
};

// Interference of the surviving photon over a delta-theta sweep on the
// tap-only circuit (no recombining splitter). The reported statistic is
// P(detector fires AND a click at 3 xor 4), normalized over all outcomes.
inline Appendix1Result run_appendix1(const Circuit& circuit, CoherenceMode coherence,
                                     const std::vector<double>& theta_sweep, int n_samples,
                                     std::uint64_t seed, bool sample_mc = true) {
    Appendix1Result out;
    out.thetas = theta_sweep;
    std::vector<double> fit_ys;
    for (size_t i = 0; i < theta_sweep.size(); ++i) {
        CoherenceMode point = coherence;
        if (coherence.kind == CoherenceMode::Kind::Fixed)
            point = CoherenceMode::fixed(theta_sweep[i]);
        // analytic value: P(xor) = 1/2 exactly (each tap splits 50/50), then
        // the survivor follows the coherent-sum intensity share
        auto share = [&](double theta) {
            auto intens = detector_intensities(circuit, theta);
            double tot = intens.at(1) + intens.at(2);
            return tot > 0.0 ? 0.5 * intens.at(1) / tot : 0.0;
        };
        double analytic;
        if (coherence.kind == CoherenceMode::Kind::Fixed) {
            analytic = share(theta_sweep[i]);
        } else {
            double acc = 0.0;
            const int grid = 32;
            for (int g = 0; g < grid; ++g) acc += share((g + 0.5) * 2.0 * M_PI / grid);
            analytic = acc / grid;
        }
        out.analytic_p1_and_xor.push_back(analytic);
        fit_ys.push_back(analytic);

        if (sample_mc) {
            EmptyWaveEnsemble ens = run_hybrid_model(circuit, point, n_samples,
                                                     seed + static_cast<std::uint64_t>(i));
            const auto& clicks = ens.ensemble.clicks;
            int i1 = clicks.id_index(1), i2 = clicks.id_index(2);
            int i3 = clicks.id_index(3), i4 = clicks.id_index(4);
            auto xor34 = [=](const Pattern& k) { return (k[i3] > 0) != (k[i4] > 0); };
            auto all = [](const Pattern&) { return true; };
            out.p1_and_xor.push_back(ens.ensemble.conditional(
                [=](const Pattern& k) { return k[i1] > 0 && xor34(k); }, all));
            out.p2_and_xor.push_back(ens.ensemble.conditional(
                [=](const Pattern& k) { return k[i2] > 0 && xor34(k); }, all));
        }
    }
    out.fit = fit_fringe(out.thetas, fit_ys);
    if (sample_mc) {
        std::vector<double> mc;
        for (const auto& e : out.p1_and_xor) mc.push_back(e.value);
        out.fit_mc = fit_fringe(out.thetas, mc);
    }
    return out;
}

}  // namespace ew
