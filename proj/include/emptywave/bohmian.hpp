#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "emptywave/circuit.hpp"
#include "emptywave/fock.hpp"
#include "emptywave/rng.hpp"

namespace ew {

// ---------------------------------------------------------------------
// Configuration-space guidance integrator (one spatial dimension per
// particle, so an N-particle wave function lives on an N-dimensional grid).
// ---------------------------------------------------------------------

struct AxisSpec {
    int n = 0;
    double x0 = 0.0;
    double dx = 1.0;
};

struct GuidanceField {
    std::vector<AxisSpec> axes;
    std::vector<complexd> psi;  // row-major over axes
    double hbar_over_m = 1.0;

    int dim() const { return static_cast<int>(axes.size()); }

    int count() const {
        int c = 1;
        for (const auto& a : axes) c *= a.n;
        return c;
    }

    int index(const std::vector<int>& idx) const {
        int lin = 0;
        for (int d = 0; d < dim(); ++d) lin = lin * axes[d].n + idx[d];
        return lin;
    }

    double cell_volume() const {
        double v = 1.0;
        for (const auto& a : axes) v *= a.dx;
        return v;
    }

    double norm2() const {
        double s = 0.0;
        for (const auto& z : psi) s += std::norm(z);
        return s * cell_volume();
    }

    GuidanceField& normalize() {
        double n = std::sqrt(norm2());
        if (n == 0.0) throw std::domain_error("cannot normalize zero field");
        for (auto& z : psi) z /= n;
        return *this;
    }

    double peak_density() const {
        double m = 0.0;
        for (const auto& z : psi) m = std::max(m, std::norm(z));
        return m;
    }
};

struct GuidanceVelocity {
    std::vector<double> v;
    bool defined = false;
};

namespace detail {

// multilinear interpolation of psi and its centered-difference gradient
struct FieldProbe {
    complexd psi;
    std::vector<complexd> grad;
};

inline FieldProbe probe_field(const GuidanceField& f, const std::vector<double>& x) {
    int d = f.dim();
    std::vector<int> base(d);
    std::vector<double> frac(d);
    for (int i = 0; i < d; ++i) {
        double u = (x[i] - f.axes[i].x0) / f.axes[i].dx;
        int b = static_cast<int>(std::floor(u));
        b = std::clamp(b, 0, f.axes[i].n - 2);
        base[i] = b;
        frac[i] = std::clamp(u - b, 0.0, 1.0);
    }
    FieldProbe out;
    out.psi = complexd{0, 0};
    out.grad.assign(d, complexd{0, 0});
    std::vector<int> idx(d);
    int corners = 1 << d;
    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        for (int i = 0; i < d; ++i) {
            int bit = (c >> i) & 1;
            idx[i] = base[i] + bit;
            w *= bit ? frac[i] : 1.0 - frac[i];
        }
        if (w == 0.0) continue;
        int lin = f.index(idx);
        out.psi += w * f.psi[lin];
        for (int i = 0; i < d; ++i) {
            // centered difference at the corner, one-sided at the edges
            std::vector<int> p = idx;
            int hi = std::min(idx[i] + 1, f.axes[i].n - 1);
            int lo = std::max(idx[i] - 1, 0);
            p[i] = hi;
            complexd up = f.psi[f.index(p)];
            p[i] = lo;
            complexd dn = f.psi[f.index(p)];
            out.grad[i] += w * (up - dn) / ((hi - lo) * f.axes[i].dx);
        }
    }
    return out;
}

}  // namespace detail

// v = (hbar/m) Im(psi* grad psi) / |psi|^2; undefined below the density floor.
inline GuidanceVelocity guidance_velocity(const GuidanceField& f, const std::vector<double>& x,
                                          double density_floor = -1.0) {
    if (static_cast<int>(x.size()) != f.dim())
        throw std::invalid_argument("point dimension mismatch");
    if (density_floor < 0.0) density_floor = 1e-12 * f.peak_density();
    auto probe = detail::probe_field(f, x);
    GuidanceVelocity out;
    double rho = std::norm(probe.psi);
    if (rho <= density_floor) return out;
    out.defined = true;
    out.v.resize(f.dim());
    for (int i = 0; i < f.dim(); ++i)
        out.v[i] = f.hbar_over_m * std::imag(std::conj(probe.psi) * probe.grad[i]) / rho;
    return out;
}

struct TrajectoryOptions {
    int n_samples = 1000;
    std::uint64_t seed = 1;
    double density_floor_rel = 1e-12;
    int max_halvings = 20;
};

struct Trajectories {
    std::vector<std::vector<std::vector<double>>> pos;  // [sample][frame][dim]
    std::vector<std::uint8_t> failed;

    std::vector<double> endpoints(int axis) const {
        std::vector<double> out;
        for (size_t s = 0; s < pos.size(); ++s)
            if (!failed[s]) out.push_back(pos[s].back()[axis]);
        return out;
    }
};

namespace detail {

inline GuidanceField lerp_field(const GuidanceField& a, const GuidanceField& b, double s) {
    GuidanceField out = a;
    for (size_t i = 0; i < out.psi.size(); ++i)
        out.psi[i] = (1.0 - s) * a.psi[i] + s * b.psi[i];
    return out;
}

inline bool advance_midpoint(const GuidanceField& fa, const GuidanceField& fb,
                             std::vector<double>& x, double dt, double floor_a,
                             double floor_b, int halvings_left) {
    double floor_m = 0.5 * (floor_a + floor_b);
    GuidanceField mid = lerp_field(fa, fb, 0.5);
    auto v0 = guidance_velocity(fa, x, floor_a);
    if (v0.defined) {
        std::vector<double> xm = x;
        for (size_t i = 0; i < x.size(); ++i) xm[i] += 0.5 * dt * v0.v[i];
        auto vm = guidance_velocity(mid, xm, floor_m);
        if (vm.defined) {
            for (size_t i = 0; i < x.size(); ++i) x[i] += dt * vm.v[i];
            return true;
        }
    }
    if (halvings_left <= 0) return false;
    GuidanceField half = lerp_field(fa, fb, 0.5);
    std::vector<double> saved = x;
    if (advance_midpoint(fa, half, x, dt / 2, floor_a, floor_m, halvings_left - 1) &&
        advance_midpoint(half, fb, x, dt / 2, floor_m, floor_b, halvings_left - 1))
        return true;
    x = saved;
    return false;
}

inline void parallel_samples(int n, const std::function<void(int, int)>& body) {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    int chunks = static_cast<int>(std::min<unsigned>(hw, 8));
    if (n < 64 || chunks == 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    int per = (n + chunks - 1) / chunks;
    for (int t = 0; t < chunks; ++t) {
        int lo = t * per, hi = std::min(n, lo + per);
        if (lo >= hi) break;
        pool.emplace_back(body, lo, hi);
    }
    for (auto& th : pool) th.join();
}

}  // namespace detail

// Initial points sampled from |psi_0|^2, then transported through the given
// field frames (uniform spacing dt). Endpoint statistics stay Born-distributed
// (equivariance); single-particle 1D trajectories never cross.
inline Trajectories integrate_trajectories(const std::vector<GuidanceField>& frames, double dt,
                                           const TrajectoryOptions& opt) {
    if (frames.size() < 2) throw std::invalid_argument("need at least two field frames");
    const GuidanceField& f0 = frames.front();
    for (const auto& f : frames)
        if (std::abs(f.norm2() - 1.0) > 1e-8)
            throw std::invalid_argument("field frames must stay normalized");
    int d = f0.dim();
    int cells = f0.count();
    std::vector<double> weights(cells);
    for (int i = 0; i < cells; ++i) weights[i] = std::norm(f0.psi[i]);
    std::vector<double> cdf(cells);
    double acc = 0.0;
    for (int i = 0; i < cells; ++i) {
        acc += weights[i];
        cdf[i] = acc;
    }
    std::vector<double> floors(frames.size());
    for (size_t k = 0; k < frames.size(); ++k)
        floors[k] = opt.density_floor_rel * frames[k].peak_density();

    Trajectories out;
    out.pos.assign(opt.n_samples, {});
    out.failed.assign(opt.n_samples, 0);

    detail::parallel_samples(opt.n_samples, [&](int lo, int hi) {
        for (int s = lo; s < hi; ++s) {
            RngStream rng(opt.seed, static_cast<std::uint64_t>(s));
            double u = rng.uniform() * acc;
            int cell = static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), u) -
                                        cdf.begin());
            cell = std::min(cell, cells - 1);
            std::vector<int> idx(d);
            int rem = cell;
            for (int i = d - 1; i >= 0; --i) {
                idx[i] = rem % f0.axes[i].n;
                rem /= f0.axes[i].n;
            }
            std::vector<double> x(d);
            for (int i = 0; i < d; ++i)
                x[i] = f0.axes[i].x0 + (idx[i] + rng.uniform() - 0.5) * f0.axes[i].dx;
            auto& path = out.pos[s];
            path.reserve(frames.size());
            path.push_back(x);
            for (size_t k = 0; k + 1 < frames.size(); ++k) {
                if (!detail::advance_midpoint(frames[k], frames[k + 1], x, dt, floors[k],
                                              floors[k + 1], opt.max_halvings)) {
                    out.failed[s] = 1;
                    break;
                }
                path.push_back(x);
            }
        }
    });
    return out;
}

// One-sample Kolmogorov-Smirnov statistic against an analytic CDF.
inline double ks_statistic(std::vector<double> samples,
                           const std::function<double(double)>& cdf) {
    std::sort(samples.begin(), samples.end());
    double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        double f = cdf(samples[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    }
    return d;
}

// critical KS value at significance alpha (asymptotic)
inline double ks_critical(double alpha, int n) {
    return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

// ---------------------------------------------------------------------
// Branch-level photon dynamics with effective collapse.
// ---------------------------------------------------------------------

// Reduced state after a click: one photon annihilated at (mode, layer),
// renormalized.
inline FockState conditional_wavefunction(const FockState& joint, int mode, int layer = 0) {
    FockState out = joint;
    out.amps.clear();
    int slot = joint.slot(mode, layer);
    for (const auto& [o, a] : joint.amps) {
        if (o[slot] == 0) continue;
        Occ oo = o;
        oo[slot] -= 1;
        out.add(oo, a * std::sqrt(static_cast<double>(o[slot])));
    }
    if (out.norm2() <= 0.0) throw std::domain_error("zero-amplitude condition");
    out.normalize();
    return out;
}

// detector-id flavoured overload
inline FockState conditional_wavefunction(const FockState& joint, const Circuit& c,
                                          int detector_id, int layer = 0) {
    auto det = c.detector_modes();
    auto it = det.find(detector_id);
    if (it == det.end()) throw std::out_of_range("unknown detector id");
    return conditional_wavefunction(joint, it->second, layer);
}

struct BranchEvent {
    double time = 0.0;
    int photon = 0;
    int mode = 0;
    double position = 0.0;  // along the arm, advancing at speed c
};

struct SampleHistory {
    int sample = 0;
    Pattern pattern;
    std::vector<BranchEvent> events;
};

struct BranchOptions {
    int n_samples = 100000;
    std::uint64_t seed = 1;
    bool effective_collapse = true;  // collapse the survivor's wave on a click
    bool record_histories = false;
    int n_max = 4;
    double speed = 1.0;  // c, for positions in the event log
};

struct TrajectoryEnsemble {
    std::uint64_t seed = 0;
    int n_samples = 0;
    ClickDistribution clicks;  // frequencies with Monte-Carlo standard errors
    std::vector<SampleHistory> histories;

    struct Estimate {
        double value = 0.0;
        double stderr_ = 0.0;
        long n_condition = 0;
    };

    // conditional frequency P(event | condition) with its standard error
    Estimate conditional(const std::function<bool(const Pattern&)>& event,
                         const std::function<bool(const Pattern&)>& condition) const {
        double p_joint = 0.0, p_cond = 0.0;
        for (const auto& [pat, p] : clicks.p) {
            if (condition(pat)) {
                p_cond += p;
                if (event(pat)) p_joint += p;
            }
        }
        Estimate e;
        e.n_condition = std::lround(p_cond * n_samples);
        if (e.n_condition == 0) return e;
        e.value = p_joint / p_cond;
        e.stderr_ = std::sqrt(std::max(0.0, e.value * (1.0 - e.value)) /
                              static_cast<double>(e.n_condition));
        return e;
    }
};

namespace detail {

struct TrackedPhoton {
    int mode = 0;
    int layer = 0;
    bool detected = false;
    int detector_id = -1;
    double detect_time = 0.0;
};

// Occupation of the tracked photons over (mode, layer) slots.
inline Occ tracked_occ(const FockState& s, const std::vector<TrackedPhoton>& photons,
                       bool include_detected) {
    Occ o(s.slot_count(), 0);
    for (const auto& p : photons)
        if (!p.detected || include_detected) o[s.slot(p.mode, p.layer)] += 1;
    return o;
}

}  // namespace detail

// Monte-Carlo branch sampler: photons ride the arms at speed c; every
// beamsplitter re-routes the photons it touches by the conditional Born
// flow of the propagated joint state given every other photon's branch; a
// click collapses the surviving photons' wave function (toggleable, with
// identical statistics either way).
inline TrajectoryEnsemble sample_branch_dynamics(const Circuit& circuit,
                                                 const BranchOptions& opt) {
    ensure_valid(circuit);
    if (std::holds_alternative<CoherentSource>(circuit.source) ||
        std::holds_alternative<std::monostate>(circuit.source))
        throw std::invalid_argument("branch sampler needs a photon-number source");

    const auto elements = circuit.sorted_elements();
    const auto det_modes = circuit.detector_modes();
    std::vector<int> det_ids;
    for (const auto& [id, mode] : det_modes) det_ids.push_back(id);
    std::map<int, int> id_index;
    for (size_t i = 0; i < det_ids.size(); ++i) id_index[det_ids[i]] = static_cast<int>(i);

    const auto* two_photon = std::get_if<TwoPhotonSource>(&circuit.source);
    bool uniform_theta = two_photon && !two_photon->relative_phase.has_value();
    FockState base_state = make_input_state(circuit, opt.n_max, uniform_theta
                                                                    ? std::optional<double>(0.0)
                                                                    : std::nullopt);

    std::map<Pattern, long> counts;
    std::vector<SampleHistory> histories;
    std::mutex merge_mutex;

    detail::parallel_samples(opt.n_samples, [&](int lo, int hi) {
        std::map<Pattern, long> local;
        std::vector<SampleHistory> local_hist;
        for (int sample = lo; sample < hi; ++sample) {
            RngStream rng(opt.seed, static_cast<std::uint64_t>(sample));
            FockState state = base_state;
            if (uniform_theta) {
                complexd g = std::exp(complexd(0.0, rng.uniform(0.0, 2.0 * M_PI)));
                for (auto& [o, a] : state.amps) a *= g;
            }

            // initial branches from |amplitude|^2 over occupations
            std::vector<double> w;
            std::vector<const Occ*> occs;
            for (const auto& [o, a] : state.amps) {
                occs.push_back(&o);
                w.push_back(std::norm(a));
            }
            const Occ& start = *occs[rng.pick_weighted(w)];
            std::vector<detail::TrackedPhoton> photons;
            for (int slot = 0; slot < state.slot_count(); ++slot)
                for (int rep = 0; rep < start[slot]; ++rep) {
                    detail::TrackedPhoton p;
                    p.mode = slot / state.layers;
                    p.layer = slot % state.layers;
                    photons.push_back(p);
                }

            SampleHistory hist;
            auto log_positions = [&](double time) {
                if (!opt.record_histories) return;
                for (size_t i = 0; i < photons.size(); ++i)
                    if (!photons[i].detected)
                        hist.events.push_back({time, static_cast<int>(i), photons[i].mode,
                                               opt.speed * time});
            };
            log_positions(0.0);

            Pattern pattern(det_ids.size(), 0);
            for (const auto& e : elements) {
                double now = static_cast<double>(e.stage + 1);
                if (const auto* bs = std::get_if<Beamsplitter>(&e.op)) {
                    state = apply_element(state, e);
                    std::vector<int> movers;
                    for (size_t i = 0; i < photons.size(); ++i)
                        if (!photons[i].detected && (photons[i].mode == bs->mode_a ||
                                                     photons[i].mode == bs->mode_b))
                            movers.push_back(static_cast<int>(i));
                    if (!movers.empty()) {
                        // conditional flow: every occupation consistent with the
                        // untouched slots and per-layer totals inside the element;
                        // under collapse the state no longer holds detected photons
                        Occ fixed =
                            detail::tracked_occ(state, photons, !opt.effective_collapse);
                        std::vector<const Occ*> cand;
                        std::vector<double> cw;
                        for (const auto& [o, a] : state.amps) {
                            bool match = true;
                            for (int slot = 0; slot < state.slot_count() && match; ++slot) {
                                int mode = slot / state.layers;
                                if (mode == bs->mode_a || mode == bs->mode_b) continue;
                                match = (o[slot] == fixed[slot]);
                            }
                            if (!match) continue;
                            for (int l = 0; l < state.layers && match; ++l) {
                                int sa = state.slot(bs->mode_a, l);
                                int sb = state.slot(bs->mode_b, l);
                                match = (o[sa] + o[sb] == fixed[sa] + fixed[sb]);
                            }
                            if (!match) continue;
                            cand.push_back(&o);
                            cw.push_back(std::norm(a));
                        }
                        if (cand.empty()) throw std::domain_error("zero-norm branch flow");
                        const Occ& chosen = *cand[rng.pick_weighted(cw)];
                        // hand the movers their new arms, layer by layer
                        for (int l = 0; l < state.layers; ++l) {
                            int na = chosen[state.slot(bs->mode_a, l)];
                            for (int m : movers) {
                                if (photons[m].layer != l) continue;
                                photons[m].mode = (na-- > 0) ? bs->mode_a : bs->mode_b;
                            }
                        }
                    }
                } else if (const auto* d = std::get_if<Detector>(&e.op)) {
                    for (size_t i = 0; i < photons.size(); ++i) {
                        auto& p = photons[i];
                        if (p.detected || p.mode != d->mode) continue;
                        p.detected = true;
                        p.detector_id = d->detector_id;
                        p.detect_time = now;
                        pattern[id_index[d->detector_id]] += 1;
                        if (opt.record_histories)
                            hist.events.push_back({now, static_cast<int>(i), p.mode,
                                                   opt.speed * now});
                        if (opt.effective_collapse)
                            state = conditional_wavefunction(state, p.mode, p.layer);
                    }
                } else {
                    state = apply_element(state, e);
                }
                log_positions(now);
            }

            auto [it, inserted] = local.emplace(pattern, 1);
            if (!inserted) it->second += 1;
            if (opt.record_histories) {
                hist.sample = sample;
                hist.pattern = pattern;
                local_hist.push_back(std::move(hist));
            }
        }
        std::lock_guard<std::mutex> lock(merge_mutex);
        for (const auto& [pat, n] : local) counts[pat] += n;
        for (auto& h : local_hist) histories.push_back(std::move(h));
    });

    TrajectoryEnsemble out;
    out.seed = opt.seed;
    out.n_samples = opt.n_samples;
    out.clicks.detector_ids = det_ids;
    for (const auto& [pat, n] : counts) {
        double p = static_cast<double>(n) / opt.n_samples;
        out.clicks.p[pat] = p;
        out.clicks.stderrs[pat] = std::sqrt(p * (1.0 - p) / opt.n_samples);
    }
    std::sort(histories.begin(), histories.end(),
              [](const SampleHistory& a, const SampleHistory& b) { return a.sample < b.sample; });
    out.histories = std::move(histories);
    return out;
}

// CSV rows (sample, time, photon, arm, position) for plotting.
inline void dump_trajectories_csv(const TrajectoryEnsemble& ens, const Circuit& c,
                                  std::ostream& os) {
    os << "sample,time,photon,arm,position\n";
    for (const auto& hist : ens.histories)
        for (const auto& ev : hist.events) {
            const std::string& label = c.modes[ev.mode].label;
            os << hist.sample << ',' << ev.time << ',' << ev.photon << ','
               << (label.empty() ? std::to_string(ev.mode) : label) << ',' << ev.position
               << '\n';
        }
}

}  // namespace ew
