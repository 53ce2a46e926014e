#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <vector>

#include "emptywave/rng.hpp"

namespace ew {

using complexd = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;

// Natural units by default; mu0 is tied to (c, eps0) so the Poynting ratio
// of a plane wave comes out at exactly c.
struct FieldConstants {
    double c = 1.0;
    double eps0 = 1.0;
    double mu0() const { return 1.0 / (eps0 * c * c); }
};

struct SpectrumPoint {
    Vec3 k;
    std::array<complexd, 2> coeff{complexd{0, 0}, complexd{0, 0}};  // c_lambda
    std::array<CVec3, 2> pol;                                       // eps_lambda, unit, perp k
};

// Deterministic transverse basis: Gram-Schmidt of the Cartesian axis least
// aligned with k, then the cross product.
inline std::array<CVec3, 2> polarization_basis(const Vec3& k) {
    Vec3 khat = k.normalized();
    int axis = 0;
    double best = std::abs(khat[0]);
    for (int i = 1; i < 3; ++i)
        if (std::abs(khat[i]) < best) {
            best = std::abs(khat[i]);
            axis = i;
        }
    Vec3 e = Vec3::Zero();
    e[axis] = 1.0;
    Vec3 e1 = (e - khat.dot(e) * khat).normalized();
    Vec3 e2 = khat.cross(e1);
    return {e1.cast<complexd>(), e2.cast<complexd>()};
}

struct ModeSpectrum {
    std::vector<SpectrumPoint> points;

    double max_k() const {
        double m = 0.0;
        for (const auto& p : points) m = std::max(m, p.k.norm());
        return m;
    }

    double norm2() const {
        double s = 0.0;
        for (const auto& p : points) s += std::norm(p.coeff[0]) + std::norm(p.coeff[1]);
        return s;
    }

    ModeSpectrum& normalize() {
        double n = std::sqrt(norm2());
        if (n == 0.0) return *this;
        for (auto& p : points)
            for (auto& c : p.coeff) c /= n;
        return *this;
    }

    void validate() const {
        for (const auto& p : points) {
            double kn = p.k.norm();
            if (kn <= 0.0) throw std::invalid_argument("spectrum point at k = 0");
            for (int l = 0; l < 2; ++l) {
                if (std::abs(p.pol[l].dot(p.k.cast<complexd>())) > 1e-10 * kn)
                    throw std::invalid_argument("polarization not transverse");
                if (std::abs(p.pol[l].squaredNorm() - 1.0) > 1e-10)
                    throw std::invalid_argument("polarization not unit");
            }
            if (std::abs(p.pol[0].dot(p.pol[1])) > 1e-10)
                throw std::invalid_argument("polarizations not orthogonal");
        }
    }
};

// Lattice of wave vectors around k0 (counts per axis) with Gaussian weights.
inline ModeSpectrum gaussian_spectrum(const Vec3& k0, double sigma_k,
                                      const std::array<int, 3>& n, double dk) {
    ModeSpectrum s;
    Vec3 mid = 0.5 * Vec3(n[0] - 1, n[1] - 1, n[2] - 1);
    for (int i = 0; i < n[0]; ++i)
        for (int j = 0; j < n[1]; ++j)
            for (int l = 0; l < n[2]; ++l) {
                SpectrumPoint p;
                p.k = k0 + dk * (Vec3(i, j, l) - mid);
                if (p.k.norm() <= 1e-12) continue;
                double w = std::exp(-(p.k - k0).squaredNorm() / (2.0 * sigma_k * sigma_k));
                p.pol = polarization_basis(p.k);
                p.coeff = {complexd(w, 0.0), complexd(0.0, 0.0)};
                s.points.push_back(p);
            }
    s.normalize();
    return s;
}

inline ModeSpectrum gaussian_spectrum(const Vec3& k0, double sigma_k, int n_per_axis,
                                      double dk) {
    return gaussian_spectrum(k0, sigma_k, {n_per_axis, n_per_axis, n_per_axis}, dk);
}

inline ModeSpectrum random_spectrum(RngStream& rng, const Vec3& k0, int n_per_axis,
                                    double dk) {
    ModeSpectrum s;
    double mid = 0.5 * (n_per_axis - 1);
    for (int i = 0; i < n_per_axis; ++i)
        for (int j = 0; j < n_per_axis; ++j)
            for (int l = 0; l < n_per_axis; ++l) {
                SpectrumPoint p;
                p.k = k0 + dk * Vec3(i - mid, j - mid, l - mid);
                if (p.k.norm() <= 1e-12) continue;
                p.pol = polarization_basis(p.k);
                p.coeff = {complexd(rng.uniform(-1, 1), rng.uniform(-1, 1)),
                           complexd(rng.uniform(-1, 1), rng.uniform(-1, 1))};
                s.points.push_back(p);
            }
    s.normalize();
    return s;
}

struct GridSpec {
    Vec3 origin = Vec3::Zero();
    double h = 0.25;
    std::array<int, 3> n{16, 16, 16};

    int count() const { return n[0] * n[1] * n[2]; }
    int index(int i, int j, int k) const { return (i * n[1] + j) * n[2] + k; }
    Vec3 point(int i, int j, int k) const { return origin + h * Vec3(i, j, k); }
};

struct FieldGrid {
    GridSpec grid;
    double time = 0.0;
    FieldConstants consts;
    std::vector<CVec3> e;  // psi^E
    std::vector<CVec3> b;  // psi^B
};

namespace detail {

inline void parallel_for(int n, const std::function<void(int, int)>& body) {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    int chunks = static_cast<int>(std::min<unsigned>(hw, 8));
    if (n < 256 || chunks == 1) {
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

// psi^E = i c  sum_lambda sqrt|k| c_l eps_l exp(i(k.x - c|k|t))
// psi^B = i    sum_lambda (k x eps_l)/sqrt|k| c_l exp(i(k.x - c|k|t))
// The grid must resolve the largest wave vector (h |k|max <= pi/4).
inline FieldGrid synthesize(const ModeSpectrum& spec, const GridSpec& grid, double t,
                            FieldConstants consts = {}) {
    spec.validate();
    if (grid.h * spec.max_k() > M_PI / 4.0 + 1e-12)
        throw std::domain_error("under-resolved grid: h * |k|max > pi/4");
    FieldGrid out;
    out.grid = grid;
    out.time = t;
    out.consts = consts;
    out.e.assign(grid.count(), CVec3::Zero());
    out.b.assign(grid.count(), CVec3::Zero());

    struct Term {
        Vec3 k;
        CVec3 ee;  // i c sqrt|k| c_l eps_l  (time phase folded in)
        CVec3 bb;  // i (k x eps_l)/sqrt|k| c_l
    };
    std::vector<Term> terms;
    const complexd ii(0.0, 1.0);
    for (const auto& p : spec.points) {
        double kn = p.k.norm();
        complexd tphase = std::exp(complexd(0.0, -consts.c * kn * t));
        for (int l = 0; l < 2; ++l) {
            if (std::abs(p.coeff[l]) == 0.0) continue;
            Term term;
            term.k = p.k;
            complexd base = p.coeff[l] * tphase;
            term.ee = ii * consts.c * std::sqrt(kn) * base * p.pol[l];
            term.bb = ii / std::sqrt(kn) * base * p.k.cast<complexd>().cross(p.pol[l]);
            terms.push_back(term);
        }
    }

    detail::parallel_for(grid.count(), [&](int lo, int hi) {
        for (int idx = lo; idx < hi; ++idx) {
            int i = idx / (grid.n[1] * grid.n[2]);
            int j = (idx / grid.n[2]) % grid.n[1];
            int k = idx % grid.n[2];
            Vec3 x = grid.point(i, j, k);
            CVec3 e = CVec3::Zero(), b = CVec3::Zero();
            for (const auto& term : terms) {
                complexd phase = std::exp(complexd(0.0, term.k.dot(x)));
                e += term.ee * phase;
                b += term.bb * phase;
            }
            out.e[idx] = e;
            out.b[idx] = b;
        }
    });
    return out;
}

namespace detail {

// centered spatial derivative of component c of field f along axis, interior only
template <class Field>
inline CVec3 curl_at(const Field& f, const GridSpec& g, int i, int j, int k) {
    auto d = [&](int axis, int comp) -> complexd {
        int ii = i, jj = j, kk = k;
        int* idx[3] = {&ii, &jj, &kk};
        *idx[axis] += 1;
        complexd hi = f[g.index(ii, jj, kk)][comp];
        *idx[axis] -= 2;
        complexd lo = f[g.index(ii, jj, kk)][comp];
        return (hi - lo) / (2.0 * g.h);
    };
    CVec3 out;
    out[0] = d(1, 2) - d(2, 1);
    out[1] = d(2, 0) - d(0, 2);
    out[2] = d(0, 1) - d(1, 0);
    return out;
}

template <class Field>
inline complexd div_at(const Field& f, const GridSpec& g, int i, int j, int k) {
    complexd s{0, 0};
    int base[3] = {i, j, k};
    for (int axis = 0; axis < 3; ++axis) {
        int p[3] = {base[0], base[1], base[2]};
        p[axis] += 1;
        complexd hi = f[g.index(p[0], p[1], p[2])][axis];
        p[axis] -= 2;
        complexd lo = f[g.index(p[0], p[1], p[2])][axis];
        s += (hi - lo) / (2.0 * g.h);
    }
    return s;
}

inline void check_consistent(const FieldGrid& a, const FieldGrid& b) {
    if (a.grid.n != b.grid.n || a.grid.h != b.grid.h ||
        (a.grid.origin - b.grid.origin).norm() > 1e-14)
        throw std::invalid_argument("field grids are not consistent");
}

}  // namespace detail

struct MaxwellResiduals {
    double faraday = 0.0;  // curl E + dB/dt
    double ampere = 0.0;   // curl B - (1/c^2) dE/dt
    double div_e = 0.0;
    double div_b = 0.0;

    double max_any() const {
        return std::max(std::max(faraday, ampere), std::max(div_e, div_b));
    }
};

// Max-norm residuals of the four vacuum equations, centered differences in
// space and time; converges at second order in h and dt.
inline MaxwellResiduals maxwell_residual(const FieldGrid& minus, const FieldGrid& center,
                                         const FieldGrid& plus) {
    detail::check_consistent(minus, center);
    detail::check_consistent(plus, center);
    double dt = 0.5 * (plus.time - minus.time);
    if (dt <= 0.0) throw std::invalid_argument("time samples must be ordered");
    const GridSpec& g = center.grid;
    double c2 = center.consts.c * center.consts.c;
    MaxwellResiduals r;
    for (int i = 1; i + 1 < g.n[0]; ++i)
        for (int j = 1; j + 1 < g.n[1]; ++j)
            for (int k = 1; k + 1 < g.n[2]; ++k) {
                int idx = g.index(i, j, k);
                CVec3 dbdt = (plus.b[idx] - minus.b[idx]) / (2.0 * dt);
                CVec3 dedt = (plus.e[idx] - minus.e[idx]) / (2.0 * dt);
                CVec3 curl_e = detail::curl_at(center.e, g, i, j, k);
                CVec3 curl_b = detail::curl_at(center.b, g, i, j, k);
                r.faraday = std::max(r.faraday, (curl_e + dbdt).cwiseAbs().maxCoeff());
                r.ampere = std::max(r.ampere, (curl_b - dedt / c2).cwiseAbs().maxCoeff());
                r.div_e = std::max(r.div_e, std::abs(detail::div_at(center.e, g, i, j, k)));
                r.div_b = std::max(r.div_b, std::abs(detail::div_at(center.b, g, i, j, k)));
            }
    return r;
}

inline double energy_density(const FieldGrid& f, int idx) {
    double c2 = f.consts.c * f.consts.c;
    return 0.5 * f.consts.eps0 * (f.e[idx].squaredNorm() + c2 * f.b[idx].squaredNorm());
}

inline Vec3 poynting_vector(const FieldGrid& f, int idx) {
    CVec3 s = f.e[idx].conjugate().cross(f.b[idx]) + f.e[idx].cross(f.b[idx].conjugate());
    return s.real() / (2.0 * f.consts.mu0());
}

struct PoyntingField {
    std::vector<Vec3> v;
    std::vector<std::uint8_t> defined;  // 0 where the density is below the floor
};

// Local velocity S/u; undefined (flagged) where u is below floor_rel * max(u).
inline PoyntingField poynting_velocity(const FieldGrid& f, double floor_rel = 1e-12) {
    PoyntingField out;
    int n = f.grid.count();
    out.v.assign(n, Vec3::Zero());
    out.defined.assign(n, 0);
    double umax = 0.0;
    for (int i = 0; i < n; ++i) umax = std::max(umax, energy_density(f, i));
    double floor = floor_rel * umax;
    for (int i = 0; i < n; ++i) {
        double u = energy_density(f, i);
        if (u <= floor) continue;
        out.v[i] = poynting_vector(f, i) / u;
        out.defined[i] = 1;
    }
    return out;
}

// Max-norm of d_t u + div S over interior points.
inline double continuity_residual(const FieldGrid& minus, const FieldGrid& center,
                                  const FieldGrid& plus) {
    detail::check_consistent(minus, center);
    detail::check_consistent(plus, center);
    double dt = 0.5 * (plus.time - minus.time);
    const GridSpec& g = center.grid;
    std::vector<Vec3> s(g.count());
    for (int i = 0; i < g.count(); ++i) s[i] = poynting_vector(center, i);
    double r = 0.0;
    for (int i = 1; i + 1 < g.n[0]; ++i)
        for (int j = 1; j + 1 < g.n[1]; ++j)
            for (int k = 1; k + 1 < g.n[2]; ++k) {
                int idx = g.index(i, j, k);
                double dudt =
                    (energy_density(plus, idx) - energy_density(minus, idx)) / (2.0 * dt);
                double div_s = 0.0;
                int base[3] = {i, j, k};
                for (int axis = 0; axis < 3; ++axis) {
                    int p[3] = {base[0], base[1], base[2]};
                    p[axis] += 1;
                    double hi = s[g.index(p[0], p[1], p[2])][axis];
                    p[axis] -= 2;
                    double lo = s[g.index(p[0], p[1], p[2])][axis];
                    div_s += (hi - lo) / (2.0 * g.h);
                }
                r = std::max(r, std::abs(dudt + div_s));
            }
    return r;
}

// energy centroid, for packet-motion checks
inline Vec3 energy_centroid(const FieldGrid& f) {
    Vec3 num = Vec3::Zero();
    double den = 0.0;
    const GridSpec& g = f.grid;
    for (int i = 0; i < g.n[0]; ++i)
        for (int j = 0; j < g.n[1]; ++j)
            for (int k = 0; k < g.n[2]; ++k) {
                double u = energy_density(f, g.index(i, j, k));
                num += u * g.point(i, j, k);
                den += u;
            }
    return num / den;
}

// CSV slice along the given axis at the given index:
// x,y,z,re_ex,im_ex,...,re_bz,im_bz
inline void dump_slice_csv(const FieldGrid& f, int axis, int slice, std::ostream& os) {
    const GridSpec& g = f.grid;
    os << "x,y,z,re_ex,im_ex,re_ey,im_ey,re_ez,im_ez,re_bx,im_bx,re_by,im_by,re_bz,im_bz\n";
    for (int i = 0; i < g.n[0]; ++i)
        for (int j = 0; j < g.n[1]; ++j)
            for (int k = 0; k < g.n[2]; ++k) {
                int pos[3] = {i, j, k};
                if (pos[axis] != slice) continue;
                Vec3 x = g.point(i, j, k);
                int idx = g.index(i, j, k);
                os << x[0] << ',' << x[1] << ',' << x[2];
                for (int comp = 0; comp < 3; ++comp)
                    os << ',' << f.e[idx][comp].real() << ',' << f.e[idx][comp].imag();
                for (int comp = 0; comp < 3; ++comp)
                    os << ',' << f.b[idx][comp].real() << ',' << f.b[idx][comp].imag();
                os << '\n';
            }
}

}  // namespace ew
