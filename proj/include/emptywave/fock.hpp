#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "emptywave/circuit.hpp"
#include "emptywave/rng.hpp"

namespace ew {

// Occupation vector over engine slots. A slot is (mode, layer); layers are
// internal temporal modes used to represent partial distinguishability and
// are never mixed by circuit elements.
using Occ = std::vector<int>;

namespace detail {

inline double fact(int n) {
    static const double table[] = {1.,      1.,       2.,        6.,         24.,
                                   120.,    720.,     5040.,     40320.,     362880.,
                                   3628800., 39916800., 479001600., 6227020800., 87178291200.};
    if (n < 0) throw std::logic_error("factorial of negative");
    if (n < 15) return table[n];
    double f = table[14];
    for (int k = 15; k <= n; ++k) f *= k;
    return f;
}

inline double binom(int n, int k) { return fact(n) / (fact(k) * fact(n - k)); }

inline complexd ipow(complexd z, int n) {
    complexd out{1.0, 0.0};
    for (int i = 0; i < n; ++i) out *= z;
    return out;
}

}  // namespace detail

struct FockState {
    int modes = 0;
    int layers = 1;
    int n_max = 4;
    std::map<Occ, complexd> amps;

    int slot(int mode, int layer = 0) const { return mode * layers + layer; }
    int slot_count() const { return modes * layers; }

    Occ empty_occ() const { return Occ(slot_count(), 0); }

    static int total(const Occ& o) { return std::accumulate(o.begin(), o.end(), 0); }

    double norm2() const {
        double s = 0.0;
        for (const auto& [o, a] : amps) s += std::norm(a);
        return s;
    }

    FockState& normalize() {
        double n = std::sqrt(norm2());
        if (n == 0.0) throw std::domain_error("cannot normalize zero state");
        for (auto& [o, a] : amps) a /= n;
        return *this;
    }

    void add(const Occ& o, complexd a) {
        if (std::abs(a) == 0.0) return;
        auto [it, inserted] = amps.emplace(o, a);
        if (!inserted) {
            it->second += a;
            if (std::abs(it->second) < 1e-300) amps.erase(it);
        }
    }

    void prune(double eps = 1e-16) {
        for (auto it = amps.begin(); it != amps.end();)
            it = (std::abs(it->second) < eps) ? amps.erase(it) : std::next(it);
    }

    // photon count per mode, layers summed
    std::vector<int> mode_counts(const Occ& o) const {
        std::vector<int> out(modes, 0);
        for (int m = 0; m < modes; ++m)
            for (int l = 0; l < layers; ++l) out[m] += o[slot(m, l)];
        return out;
    }
};

inline FockState vacuum(int modes, int layers = 1, int n_max = 4) {
    FockState s;
    s.modes = modes;
    s.layers = layers;
    s.n_max = n_max;
    s.amps[s.empty_occ()] = complexd(1.0, 0.0);
    return s;
}

// Distance up to one global phase: the phase is fixed on the largest
// reference amplitude, then the max amplitude difference is taken.
inline double phase_aligned_distance(const FockState& a, const FockState& b) {
    if (a.slot_count() != b.slot_count()) throw std::invalid_argument("state shape mismatch");
    const Occ* ref = nullptr;
    double best = -1.0;
    for (const auto& [o, amp] : a.amps)
        if (std::abs(amp) > best) {
            best = std::abs(amp);
            ref = &o;
        }
    complexd phase{1.0, 0.0};
    if (ref) {
        auto it = b.amps.find(*ref);
        if (it != b.amps.end() && std::abs(it->second) > 0.0 && best > 0.0)
            phase = (it->second / std::abs(it->second)) / (a.amps.at(*ref) / best);
    }
    double d = 0.0;
    std::set<Occ> keys;
    for (const auto& [o, amp] : a.amps) keys.insert(o);
    for (const auto& [o, amp] : b.amps) keys.insert(o);
    for (const auto& o : keys) {
        auto ia = a.amps.find(o);
        auto ib = b.amps.find(o);
        complexd va = (ia == a.amps.end()) ? complexd{} : ia->second;
        complexd vb = (ib == b.amps.end()) ? complexd{} : ib->second;
        d = std::max(d, std::abs(va * phase - vb));
    }
    return d;
}

namespace detail {

// Two-slot beamsplitter transform from the substitution
// a_dag -> t a_dag + r b_dag,  b_dag -> r a_dag + t b_dag.
inline void apply_bs_slots(FockState& s, int sa, int sb, complexd t, complexd r) {
    std::map<Occ, complexd> out;
    for (const auto& [o, amp] : s.amps) {
        int n1 = o[sa], n2 = o[sb];
        int n = n1 + n2;
        if (n == 0) {
            out[o] += amp;
            continue;
        }
        for (int m = 0; m <= n; ++m) {
            complexd coeff{0.0, 0.0};
            for (int j = std::max(0, m - n2); j <= std::min(n1, m); ++j) {
                int k = m - j;
                coeff += binom(n1, j) * binom(n2, k) * ipow(t, j) * ipow(r, n1 - j) *
                         ipow(r, k) * ipow(t, n2 - k);
            }
            coeff *= std::sqrt(fact(m) * fact(n - m) / (fact(n1) * fact(n2)));
            if (std::abs(coeff) == 0.0) continue;
            Occ oo = o;
            oo[sa] = m;
            oo[sb] = n - m;
            auto [it, inserted] = out.emplace(oo, amp * coeff);
            if (!inserted) it->second += amp * coeff;
        }
    }
    s.amps = std::move(out);
    s.prune();
}

}  // namespace detail

inline FockState apply_element(const FockState& state, const Element& e) {
    FockState s = state;
    auto check_mode = [&](int m) {
        if (m < 0 || m >= s.modes) throw std::out_of_range("element on unknown mode");
    };
    for (const auto& [o, a] : s.amps)
        if (FockState::total(o) > s.n_max)
            throw std::domain_error("input exceeds N_max");
    if (const auto* bs = std::get_if<Beamsplitter>(&e.op)) {
        check_mode(bs->mode_a);
        check_mode(bs->mode_b);
        for (int l = 0; l < s.layers; ++l)
            detail::apply_bs_slots(s, s.slot(bs->mode_a, l), s.slot(bs->mode_b, l), bs->t,
                                   bs->r);
    } else if (const auto* ps = std::get_if<PhaseShift>(&e.op)) {
        check_mode(ps->mode);
        for (auto& [o, a] : s.amps) {
            int n = 0;
            for (int l = 0; l < s.layers; ++l) n += o[s.slot(ps->mode, l)];
            a *= std::exp(complexd(0.0, ps->phase * n));
        }
    }
    // Delay and Detector act as identity on amplitudes.
    return s;
}

inline FockState propagate(const FockState& state, const Circuit& c) {
    ensure_valid(c);
    FockState s = state;
    for (const auto& e : c.sorted_elements()) s = apply_element(s, e);
    return s;
}

// --- two-photon source ------------------------------------------------

// Overlap integral of two normalized Gaussian packets.
inline double gaussian_overlap(const PacketParams& p1, const PacketParams& p2) {
    double s1 = p1.bandwidth, s2 = p2.bandwidth;
    double tau = p1.center_time - p2.center_time;
    double pref = std::sqrt(2.0 * s1 * s2 / (s1 * s1 + s2 * s2));
    return pref * std::exp(-s1 * s1 * s2 * s2 * tau * tau / (2.0 * (s1 * s1 + s2 * s2)));
}

struct TwoPhotonPrepared {
    FockState state;
    double overlap = 1.0;  // |V|, 1 = indistinguishable
};

// Pair state for the given packets. Identical synchronized packets give
// |1,1> on (idler, signal) with the global phase exp(i*delta_theta);
// otherwise the signal photon is split over two internal temporal layers
// with weight V on the idler's layer.
inline TwoPhotonPrepared two_photon_source(int idler_mode, int signal_mode, int modes,
                                           const PacketParams& idler_packet,
                                           const PacketParams& signal_packet,
                                           double delta_theta, int n_max = 4) {
    if (idler_mode == signal_mode) throw std::invalid_argument("source modes must differ");
    double v = gaussian_overlap(idler_packet, signal_packet);
    TwoPhotonPrepared out;
    out.overlap = v;
    complexd g = std::exp(complexd(0.0, delta_theta));
    bool indist = (1.0 - v) < 1e-12;
    int layers = indist ? 1 : 2;
    FockState s = vacuum(modes, layers, n_max);
    s.amps.clear();
    Occ o = s.empty_occ();
    if (indist) {
        o[s.slot(idler_mode)] = 1;
        o[s.slot(signal_mode)] = 1;
        s.amps[o] = g;
    } else {
        Occ o1 = o;
        o1[s.slot(idler_mode, 0)] = 1;
        o1[s.slot(signal_mode, 0)] = 1;
        s.amps[o1] = g * v;
        Occ o2 = o;
        o2[s.slot(idler_mode, 0)] = 1;
        o2[s.slot(signal_mode, 1)] = 1;
        s.amps[o2] = g * std::sqrt(1.0 - v * v);
    }
    out.state = std::move(s);
    return out;
}

// Input state implied by the circuit's source spec. Two-photon packet
// centers are offset by any Delay elements sitting on the source modes.
inline FockState make_input_state(const Circuit& c, int n_max = 4,
                                  std::optional<double> theta_override = std::nullopt) {
    const int m = c.mode_count();
    if (const auto* tp = std::get_if<TwoPhotonSource>(&c.source)) {
        PacketParams pi = tp->idler_packet;
        PacketParams ps = tp->signal_packet;
        pi.center_time += c.total_delay(tp->idler_mode);
        ps.center_time += c.total_delay(tp->signal_mode);
        double theta = theta_override.value_or(tp->relative_phase.value_or(0.0));
        return two_photon_source(tp->idler_mode, tp->signal_mode, m, pi, ps, theta, n_max)
            .state;
    }
    if (const auto* fi = std::get_if<FockInput>(&c.source)) {
        FockState s = vacuum(m, 1, n_max);
        s.amps.clear();
        Occ o = s.empty_occ();
        for (int i = 0; i < m && i < static_cast<int>(fi->occupation.size()); ++i)
            o[i] = fi->occupation[i];
        if (FockState::total(o) > n_max) throw std::domain_error("input exceeds N_max");
        s.amps[o] = complexd(1.0, 0.0);
        return s;
    }
    throw std::invalid_argument("circuit has no Fock-compatible source");
}

// --- detection ---------------------------------------------------------

// Photon counts per detector, ordered by detector id.
using Pattern = std::vector<int>;

struct ClickDistribution {
    std::vector<int> detector_ids;      // sorted
    std::map<Pattern, double> p;        // counts aligned with detector_ids
    std::map<Pattern, double> stderrs;  // empty for exact distributions
    std::string condition;

    double total() const {
        double s = 0.0;
        for (const auto& [k, v] : p) s += v;
        return s;
    }

    int id_index(int detector_id) const {
        for (int i = 0; i < static_cast<int>(detector_ids.size()); ++i)
            if (detector_ids[i] == detector_id) return i;
        throw std::out_of_range("unknown detector id");
    }

    // probability of the event {predicate(pattern)}
    double prob(const std::function<bool(const Pattern&)>& pred) const {
        double s = 0.0;
        for (const auto& [k, v] : p)
            if (pred(k)) s += v;
        return s;
    }

    double prob_fired(int detector_id) const {
        int i = id_index(detector_id);
        return prob([i](const Pattern& k) { return k[i] > 0; });
    }
};

inline ClickDistribution detection_distribution(const FockState& state, const Circuit& c) {
    std::map<int, int> det = c.detector_modes();
    ClickDistribution out;
    for (const auto& [id, mode] : det) out.detector_ids.push_back(id);
    std::map<int, int> mode_to_idx;
    {
        int i = 0;
        for (const auto& [id, mode] : det) mode_to_idx[mode] = i++;
    }
    for (const auto& [o, a] : state.amps) {
        double w = std::norm(a);
        if (w == 0.0) continue;
        std::vector<int> counts = state.mode_counts(o);
        Pattern pat(det.size(), 0);
        for (int m = 0; m < state.modes; ++m) {
            if (counts[m] == 0) continue;
            auto it = mode_to_idx.find(m);
            if (it == mode_to_idx.end())
                throw std::logic_error("photons left on a mode without a detector");
            pat[it->second] += counts[m];
        }
        out.p[pat] += w;
    }
    return out;
}

inline ClickDistribution conditional_distribution(
    const ClickDistribution& dist, const std::function<bool(const Pattern&)>& pred,
    const std::string& descriptor = "") {
    ClickDistribution out;
    out.detector_ids = dist.detector_ids;
    out.condition = descriptor;
    double z = 0.0;
    for (const auto& [k, v] : dist.p)
        if (pred(k)) z += v;
    if (z <= 0.0) throw std::domain_error("condition has zero probability");
    for (const auto& [k, v] : dist.p)
        if (pred(k)) out.p[k] = v / z;
    return out;
}

// --- HOM dip -----------------------------------------------------------

// Coincidence probability per delay, computed through the engine: a pair
// source with offset packets into one 50/50 splitter, detectors 1 and 2.
inline std::vector<double> hom_dip(double sigma, const std::vector<double>& taus,
                                   int n_max = 4) {
    std::vector<double> out;
    out.reserve(taus.size());
    for (double tau : taus) {
        Circuit c;
        c.modes = {{0, "hom-in-a"}, {1, "hom-in-b"}};
        c.elements = {{0, splitter50(0, 1)}, {1, Detector{0, 1}}, {1, Detector{1, 2}}};
        c.source = TwoPhotonSource{0, 1, PacketParams{0.0, sigma}, PacketParams{tau, sigma},
                                   0.0};
        FockState s = propagate(make_input_state(c, n_max), c);
        ClickDistribution d = detection_distribution(s, c);
        int i1 = d.id_index(1), i2 = d.id_index(2);
        out.push_back(d.prob([&](const Pattern& k) { return k[i1] > 0 && k[i2] > 0; }));
    }
    return out;
}

// --- coherent states ---------------------------------------------------

struct CoherentField {
    std::vector<complexd> alpha;  // one amplitude per mode
};

inline CoherentField propagate_coherent(const CoherentField& in, const Circuit& c) {
    Eigen::MatrixXcd u = compile_unitary(c);
    if (static_cast<int>(in.alpha.size()) != u.rows())
        throw std::invalid_argument("alpha size != mode count");
    Eigen::VectorXcd a(u.rows());
    for (int i = 0; i < u.rows(); ++i) a(i) = in.alpha[i];
    Eigen::VectorXcd b = u * a;
    CoherentField out;
    out.alpha.assign(b.data(), b.data() + b.size());
    return out;
}

// Truncated Fock expansion of a product of coherent states (total photon
// number <= n_max). Not renormalized: the missing weight is the Poisson
// tail, which the product tests account for.
inline FockState coherent_fock_state(const CoherentField& f, int n_max) {
    int m = static_cast<int>(f.alpha.size());
    FockState s = vacuum(m, 1, n_max);
    double e = 0.0;
    for (const auto& a : f.alpha) e += std::norm(a);
    s.amps.clear();
    Occ o = s.empty_occ();
    complexd pref = std::exp(complexd(-e / 2.0, 0.0));
    std::function<void(int, int, complexd)> rec = [&](int mode, int used, complexd acc) {
        if (mode == m) {
            s.add(o, acc);
            return;
        }
        complexd term{1.0, 0.0};
        for (int n = 0; used + n <= n_max; ++n) {
            o[mode] = n;
            rec(mode + 1, used + n, acc * term);
            term *= f.alpha[mode] / std::sqrt(static_cast<double>(n + 1));
        }
        o[mode] = 0;
    };
    rec(0, 0, pref);
    return s;
}

inline double poisson_pmf(int n, double lambda) {
    if (lambda == 0.0) return n == 0 ? 1.0 : 0.0;
    return std::exp(-lambda + n * std::log(lambda) - std::log(detail::fact(n)));
}

struct CoherentClickStats {
    std::vector<double> mean_counts;        // |alpha_i|^2 per detector, by id order
    std::vector<int> detector_ids;
    double factorization_residual = 0.0;    // max | P_fock - prod Poisson |
    double truncation_tail = 0.0;           // Poisson weight beyond N_max
};

// Detector means plus the independence certificate: the truncated Fock
// expansion propagated through the circuit must factorize into per-detector
// Poisson distributions up to the truncation tail.
inline CoherentClickStats coherent_click_statistics(const CoherentField& in, const Circuit& c,
                                                    int n_max = 4) {
    CoherentClickStats out;
    CoherentField f = propagate_coherent(in, c);
    std::map<int, int> det = c.detector_modes();
    std::vector<double> lambdas;
    for (const auto& [id, mode] : det) {
        out.detector_ids.push_back(id);
        out.mean_counts.push_back(std::norm(f.alpha[mode]));
        lambdas.push_back(std::norm(f.alpha[mode]));
    }
    FockState s = propagate(coherent_fock_state(in, n_max), c);
    ClickDistribution d = detection_distribution(s, c);
    double kept = 0.0;
    for (const auto& [pat, p] : d.p) {
        double prod = 1.0;
        for (size_t i = 0; i < pat.size(); ++i) prod *= poisson_pmf(pat[i], lambdas[i]);
        out.factorization_residual = std::max(out.factorization_residual, std::abs(p - prod));
        kept += prod;
    }
    out.truncation_tail = 1.0 - kept;
    return out;
}

// --- factorization of single-mode N=2 states ---------------------------

// Symmetrized Glauber pair amplitude psi(m1, m2) = <0| a_m1 a_m2 |psi> / sqrt(2)
// for a two-photon state over single-layer modes.
inline std::vector<std::vector<complexd>> glauber_pair_amplitude(const FockState& s) {
    if (s.layers != 1) throw std::invalid_argument("pair amplitude expects one layer");
    std::vector<std::vector<complexd>> psi(s.modes, std::vector<complexd>(s.modes, {0, 0}));
    for (const auto& [o, a] : s.amps) {
        if (FockState::total(o) != 2) continue;
        int first = -1, second = -1;
        for (int m = 0; m < s.modes; ++m) {
            if (o[m] == 2) first = second = m;
            if (o[m] == 1) (first < 0 ? first : second) = m;
        }
        if (first == second) {
            psi[first][first] = a;  // <0|a a|2> = sqrt(2), divided by sqrt(2)
        } else {
            psi[first][second] = a / std::sqrt(2.0);
            psi[second][first] = a / std::sqrt(2.0);
        }
    }
    return psi;
}

// Residual of the product form: builds the N=2 state of one internal mode
// with spectrum c and returns max |psi(m1,m2) - c(m1) c(m2)|.
inline double factorization_check(const std::vector<complexd>& spectrum, int n_max = 4) {
    int m = static_cast<int>(spectrum.size());
    double nrm = 0.0;
    for (const auto& z : spectrum) nrm += std::norm(z);
    if (std::abs(nrm - 1.0) > 1e-10) throw std::invalid_argument("spectrum not normalized");
    // (tilde a_dag)^2 / sqrt(2) |0>
    FockState s = vacuum(m, 1, std::max(2, n_max));
    s.amps.clear();
    for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) {
            Occ o = s.empty_occ();
            complexd a;
            if (i == j) {
                o[i] = 2;
                a = spectrum[i] * spectrum[i];  // sqrt(2!)/sqrt(2!) = 1
            } else {
                o[i] = 1;
                o[j] = 1;
                a = std::sqrt(2.0) * spectrum[i] * spectrum[j];
            }
            s.add(o, a);
        }
    auto psi = glauber_pair_amplitude(s);
    double res = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            res = std::max(res, std::abs(psi[i][j] - spectrum[i] * spectrum[j]));
    return res;
}

// Distance of a two-photon state from the closest normalized product
// spectrum, minimized numerically (random restarts + coordinate descent).
inline double best_product_residual(const FockState& state, int iterations = 60) {
    auto psi = glauber_pair_amplitude(state);
    int m = state.modes;
    auto residual = [&](const std::vector<complexd>& c) {
        double r = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) r = std::max(r, std::abs(psi[i][j] - c[i] * c[j]));
        return r;
    };
    double best = residual(std::vector<complexd>(m, complexd(0.0, 0.0)));
    RngStream rng(12345, 0);
    for (int trial = 0; trial < 24; ++trial) {
        std::vector<double> y(2 * m);
        for (auto& v : y) v = rng.uniform(-1.0, 1.0);
        double step = 0.5;
        auto val = [&](const std::vector<double>& p) {
            std::vector<complexd> c(m);
            double n = 0.0;
            for (int i = 0; i < m; ++i) {
                c[i] = complexd(p[2 * i], p[2 * i + 1]);
                n += std::norm(c[i]);
            }
            if (n == 0.0) return residual(c);
            for (auto& z : c) z /= std::sqrt(n);
            return residual(c);
        };
        double f = val(y);
        for (int it = 0; it < iterations; ++it) {
            bool improved = false;
            for (int d = 0; d < 2 * m; ++d)
                for (double sgn : {+1.0, -1.0}) {
                    std::vector<double> z = y;
                    z[d] += sgn * step;
                    double fz = val(z);
                    if (fz < f) {
                        f = fz;
                        y = z;
                        improved = true;
                    }
                }
            if (!improved) step *= 0.5;
        }
        best = std::min(best, f);
    }
    return best;
}

}  // namespace ew
