#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "emptywave/field.hpp"

using namespace ew;
using Catch::Approx;

namespace {

ModeSpectrum plane_wave(const Vec3& k, int lambda = 0) {
    ModeSpectrum s;
    SpectrumPoint p;
    p.k = k;
    p.pol = polarization_basis(k);
    p.coeff[lambda] = complexd(1.0, 0.0);
    s.points.push_back(p);
    return s;
}

GridSpec small_grid(int n, double h) {
    GridSpec g;
    g.n = {n, n, n};
    g.h = h;
    g.origin = -0.5 * h * (n - 1) * Vec3::Ones();
    return g;
}

struct ResidualSample {
    MaxwellResiduals maxwell;
    double continuity;
};

ResidualSample residuals_at(const ModeSpectrum& spec, const GridSpec& g, double dt) {
    FieldGrid minus = synthesize(spec, g, -dt);
    FieldGrid center = synthesize(spec, g, 0.0);
    FieldGrid plus = synthesize(spec, g, dt);
    return {maxwell_residual(minus, center, plus), continuity_residual(minus, center, plus)};
}

}  // namespace

TEST_CASE("plane-wave synthesis") {
    Vec3 k(0.0, 0.0, 1.3);
    ModeSpectrum s = plane_wave(k);
    GridSpec g = small_grid(8, 0.4);
    double t = 0.7;
    FieldGrid f = synthesize(s, g, t);
    CVec3 eps = polarization_basis(k)[0];
    for (int i = 0; i < g.n[0]; ++i)
        for (int j = 0; j < g.n[1]; ++j)
            for (int kk = 0; kk < g.n[2]; ++kk) {
                Vec3 x = g.point(i, j, kk);
                complexd phase = std::exp(complexd(0.0, k.dot(x) - k.norm() * t));
                CVec3 expected = complexd(0, 1) * std::sqrt(k.norm()) * phase * eps;
                REQUIRE((f.e[g.index(i, j, kk)] - expected).cwiseAbs().maxCoeff() < 1e-12);
            }
}

TEST_CASE("zero spectrum gives zero fields") {
    ModeSpectrum s = plane_wave(Vec3(0, 0, 1));
    s.points[0].coeff = {complexd(0, 0), complexd(0, 0)};
    FieldGrid f = synthesize(s, small_grid(6, 0.4), 0.0);
    for (const auto& e : f.e) CHECK(e.cwiseAbs().maxCoeff() == 0.0);
    for (const auto& b : f.b) CHECK(b.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("under-resolved grids are rejected") {
    ModeSpectrum s = plane_wave(Vec3(0, 0, 8.0));
    CHECK_THROWS_AS(synthesize(s, small_grid(6, 0.4), 0.0), std::domain_error);
}

TEST_CASE("spectrum validation") {
    ModeSpectrum s = plane_wave(Vec3(0, 0, 1));
    SECTION("k = 0 rejected") {
        s.points[0].k = Vec3::Zero();
        CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    }
    SECTION("non-transverse polarization rejected") {
        s.points[0].pol[0] = CVec3(0, 0, 1);
        CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    }
}

TEST_CASE("synthesis is linear in the spectrum") {
    RngStream rng(11, 0);
    ModeSpectrum s1 = random_spectrum(rng, Vec3(0, 0, 1.2), 2, 0.3);
    ModeSpectrum s2 = s1;
    for (auto& p : s2.points)
        p.coeff = {complexd(rng.uniform(-1, 1), rng.uniform(-1, 1)),
                   complexd(rng.uniform(-1, 1), rng.uniform(-1, 1))};
    complexd a(0.7, -0.2), b(-0.3, 0.5);
    ModeSpectrum combo = s1;
    for (size_t i = 0; i < combo.points.size(); ++i)
        for (int l = 0; l < 2; ++l)
            combo.points[i].coeff[l] = a * s1.points[i].coeff[l] + b * s2.points[i].coeff[l];
    GridSpec g = small_grid(6, 0.4);
    FieldGrid f1 = synthesize(s1, g, 0.4);
    FieldGrid f2 = synthesize(s2, g, 0.4);
    FieldGrid fc = synthesize(combo, g, 0.4);
    for (int i = 0; i < g.count(); ++i) {
        REQUIRE((fc.e[i] - a * f1.e[i] - b * f2.e[i]).cwiseAbs().maxCoeff() < 1e-12);
        REQUIRE((fc.b[i] - a * f1.b[i] - b * f2.b[i]).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("Maxwell residuals") {
    SECTION("zero fields give zero residuals") {
        ModeSpectrum s = plane_wave(Vec3(0, 0, 1));
        s.points[0].coeff = {complexd(0, 0), complexd(0, 0)};
        auto r = residuals_at(s, small_grid(6, 0.4), 0.05);
        CHECK(r.maxwell.max_any() == 0.0);
    }
    SECTION("plane-wave residual drops by >= 3.5x under refinement") {
        ModeSpectrum s = plane_wave(Vec3(0.4, -0.2, 1.1));
        auto coarse = residuals_at(s, small_grid(9, 0.4), 0.1);
        auto fine = residuals_at(s, small_grid(17, 0.2), 0.05);
        CHECK(coarse.maxwell.faraday / fine.maxwell.faraday >= 3.5);
        CHECK(coarse.maxwell.ampere / fine.maxwell.ampere >= 3.5);
    }
    SECTION("random superposition converges at second order") {
        RngStream rng(42, 1);
        ModeSpectrum s = random_spectrum(rng, Vec3(0, 0, 1.0), 2, 0.4);
        auto coarse = residuals_at(s, small_grid(9, 0.4), 0.1);
        auto fine = residuals_at(s, small_grid(17, 0.2), 0.05);
        double c_fit = coarse.maxwell.max_any() / (0.4 * 0.4 + 0.1 * 0.1);
        CHECK(fine.maxwell.max_any() <= 1.2 * c_fit * (0.2 * 0.2 + 0.05 * 0.05));
        CHECK(coarse.maxwell.max_any() / fine.maxwell.max_any() >= 3.5);
    }
    SECTION("Maxwell holds for non-unit light speed") {
        FieldConstants consts;
        consts.c = 2.5;
        ModeSpectrum s = plane_wave(Vec3(0.2, 0.1, 0.9));
        GridSpec g = small_grid(9, 0.4);
        double dt = 0.02;
        auto coarse = maxwell_residual(synthesize(s, g, -dt, consts),
                                       synthesize(s, g, 0.0, consts),
                                       synthesize(s, g, dt, consts));
        GridSpec g2 = small_grid(17, 0.2);
        auto fine = maxwell_residual(synthesize(s, g2, -dt / 2, consts),
                                     synthesize(s, g2, 0.0, consts),
                                     synthesize(s, g2, dt / 2, consts));
        CHECK(coarse.faraday / fine.faraday >= 3.5);
        CHECK(coarse.ampere / fine.ampere >= 3.5);
    }
}

TEST_CASE("Poynting velocity") {
    SECTION("single plane wave moves at c along k") {
        Vec3 k(0.3, -0.5, 1.0);
        FieldGrid f = synthesize(plane_wave(k), small_grid(6, 0.4), 0.3);
        auto pv = poynting_velocity(f);
        Vec3 expected = k.normalized();  // c = 1
        for (int i = 0; i < f.grid.count(); ++i) {
            REQUIRE(pv.defined[i] == 1);
            REQUIRE((pv.v[i] - expected).norm() < 1e-10);
        }
    }
    SECTION("counter-propagating pair cancels at the symmetric point") {
        Vec3 k(0.0, 0.0, 1.0);
        ModeSpectrum s;
        SpectrumPoint fwd, bwd;
        fwd.k = k;
        fwd.pol = polarization_basis(k);
        fwd.coeff = {complexd(1, 0), complexd(0, 0)};
        bwd.k = -k;
        bwd.pol = {fwd.pol[0], -fwd.pol[1]};  // keep the same transverse frame
        bwd.coeff = {complexd(1, 0), complexd(0, 0)};
        s.points = {fwd, bwd};
        s.normalize();
        GridSpec g;
        g.n = {3, 3, 3};
        g.h = 0.4;
        g.origin = Vec3(-0.4, -0.4, -0.4);  // center point sits at the origin
        FieldGrid f = synthesize(s, g, 0.0);
        auto pv = poynting_velocity(f);
        int center = g.index(1, 1, 1);
        REQUIRE(pv.defined[center] == 1);
        CHECK(pv.v[center].norm() < 1e-10);
    }
    SECTION("zero-density points are flagged undefined") {
        ModeSpectrum zero = plane_wave(Vec3(0, 0, 1));
        zero.points[0].coeff = {complexd(0, 0), complexd(0, 0)};
        FieldGrid f = synthesize(zero, small_grid(4, 0.4), 0.0);
        auto pv = poynting_velocity(f);
        for (auto d : pv.defined) CHECK(d == 0);
    }
    SECTION("speed never exceeds c (random spectra)") {
        RngStream rng(7, 7);
        for (int trial = 0; trial < 1000; ++trial) {
            ModeSpectrum s = random_spectrum(rng, Vec3(0, 0, 1.0), 2, 0.45);
            FieldGrid f = synthesize(s, small_grid(4, 0.5), rng.uniform(0, 2));
            auto pv = poynting_velocity(f);
            for (int i = 0; i < f.grid.count(); ++i)
                if (pv.defined[i]) REQUIRE(pv.v[i].norm() <= 1.0 + 1e-10);
        }
    }
}

TEST_CASE("continuity equation") {
    SECTION("plane wave has constant u and S") {
        ModeSpectrum s = plane_wave(Vec3(0.0, 0.2, 1.0));
        auto r = residuals_at(s, small_grid(7, 0.4), 0.05);
        CHECK(r.continuity < 1e-10);
    }
    SECTION("Gaussian packet converges at second order") {
        ModeSpectrum s = gaussian_spectrum(Vec3(0, 0, 1.1), 0.3, 3, 0.25);
        auto coarse = residuals_at(s, small_grid(17, 0.16), 0.02);
        auto fine = residuals_at(s, small_grid(33, 0.08), 0.01);
        CHECK(coarse.continuity / fine.continuity >= 3.5);
        double c_fit = coarse.continuity / (0.16 * 0.16 + 0.02 * 0.02);
        CHECK(fine.continuity <= 1.2 * c_fit * (0.08 * 0.08 + 0.01 * 0.01));
    }
}

TEST_CASE("Gaussian packet centroid moves at c along k0") {
    // spectrum concentrated along the propagation axis, so the envelope is
    // well localized inside the grid and translates rigidly
    Vec3 k0(0, 0, 1.5);
    ModeSpectrum s = gaussian_spectrum(k0, 0.3, {1, 1, 9}, 0.2);
    GridSpec g;
    g.n = {4, 4, 56};
    g.h = 0.33;
    g.origin = -0.5 * g.h * Vec3(3, 3, 55);
    double dt = 1.0;
    FieldGrid f0 = synthesize(s, g, 0.0);
    FieldGrid f1 = synthesize(s, g, dt);
    Vec3 vel = (energy_centroid(f1) - energy_centroid(f0)) / dt;
    CHECK((vel - k0.normalized()).norm() < 0.02);
}

TEST_CASE("transversality keeps divergence at discretization order") {
    RngStream rng(3, 3);
    ModeSpectrum s = random_spectrum(rng, Vec3(0, 0, 1.0), 2, 0.4);
    auto coarse = residuals_at(s, small_grid(9, 0.4), 0.05);
    auto fine = residuals_at(s, small_grid(17, 0.2), 0.025);
    CHECK(coarse.maxwell.div_e / fine.maxwell.div_e >= 3.5);
    CHECK(coarse.maxwell.div_b / fine.maxwell.div_b >= 3.5);
}

TEST_CASE("CSV slice dump") {
    FieldGrid f = synthesize(plane_wave(Vec3(0, 0, 1)), small_grid(4, 0.4), 0.0);
    std::ostringstream os;
    dump_slice_csv(f, 2, 1, os);
    std::string text = os.str();
    CHECK(text.find("re_ex") != std::string::npos);
    CHECK(std::count(text.begin(), text.end(), '\n') == 17);  // header + 4x4 rows
}
