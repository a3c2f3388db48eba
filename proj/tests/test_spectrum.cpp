#include "gam/errors.hpp"
#include "gam/hamiltonian.hpp"
#include "gam/spectrum.hpp"

#include <doctest.h>

#include <cmath>

using namespace gam;

namespace {

IntervalUnion single(double a, double b) { return IntervalUnion{{{a, b}}}; }

/// eigenvalues of a long Dirichlet approximant of the periodic operator
std::vector<double> approximant(const PeriodicWord& w, const BlockProfile& p, std::size_t sites) {
    std::vector<double> d(sites);
    for (std::size_t n = 0; n < sites; ++n) {
        std::size_t k = (n / static_cast<std::size_t>(p.alpha)) % w.omega.size();
        d[n] = w.omega[k] * p.f[n % static_cast<std::size_t>(p.alpha)];
    }
    return eigenvalues_tridiagonal(d);
}

void check_against_approximant(const IntervalUnion& bands, const std::vector<double>& ev) {
    CHECK(containment_fraction(bands, ev, 0.01) >= 0.99);
    for (const auto& I : bands.parts) {
        for (double edge : {I.a, I.b}) {
            double best = 1e9;
            for (double e : ev) best = std::min(best, std::abs(e - edge));
            CHECK(best < 0.01);
        }
    }
}

}  // namespace

TEST_CASE("interval union algebra") {
    IntervalUnion u{{{2, 3}, {0, 1}, {1.0005, 1.5}}};
    u.normalize(1e-3);
    REQUIRE(u.parts.size() == 2);
    CHECK(u.parts[0].b == 1.5);
    CHECK(u.measure() == doctest::Approx(2.5));
    CHECK(u.distance(1.75) == doctest::Approx(0.25));
    CHECK(hausdorff(single(0, 1), single(0, 1.2)) == doctest::Approx(0.2));
    // a gap in one set inside an interval of the other
    IntervalUnion g{{{0, 1}, {3, 4}}};
    CHECK(hausdorff(g, single(0, 4)) == doctest::Approx(1.0));
}

TEST_CASE("free and shifted bands") {
    BlockProfile p;
    Background zero;
    auto b0 = word_bands({{0.0}}, p, zero, -5, 5, 1e-3);
    REQUIRE(b0.parts.size() == 1);
    CHECK(b0.parts[0].a == doctest::Approx(-2).epsilon(1e-7));
    CHECK(b0.parts[0].b == doctest::Approx(2).epsilon(1e-7));
    auto bc = word_bands({{0.7}}, p, zero, -5, 5, 1e-3);
    CHECK(bc.parts[0].a == doctest::Approx(-1.3).epsilon(1e-7));
    CHECK(bc.parts[0].b == doctest::Approx(2.7).epsilon(1e-7));
}

TEST_CASE("period-two word") {
    BlockProfile p;
    PeriodicWord w{{0.0, 1.0}};
    for (double E : {-1.3, 0.2, 2.4}) CHECK(discriminant(w, E, p, {}) == doctest::Approx(E * (E - 1) - 2));
    auto bands = word_bands(w, p, {}, -4, 5, 1e-3);
    CHECK(bands.parts.size() == 2);
    check_against_approximant(bands, approximant(w, p, 2000));
}

TEST_CASE("alpha = 2 single periodic operator") {
    BlockProfile p{2, {1, 2}};
    PeriodicWord w{{1.0}};
    ModelConfig cfg;
    cfg.profile = p;
    cfg.law = SingleSiteLaw::delta(1.0);
    SpectrumOptions opt;
    opt.max_period = 1;
    auto res = almost_sure_spectrum(cfg, {1.0}, opt);
    CHECK(res.sigma.parts.size() == 2);
    check_against_approximant(res.sigma, approximant(w, p, 4000));
}

TEST_CASE("background must share the word period") {
    BlockProfile p;
    auto v0 = Background::periodic_table({0.1, 0.2, 0.3});
    CHECK_THROWS_AS(discriminant({{0.0, 1.0}}, 0.0, p, v0), ConfigError);
    CHECK_NOTHROW(discriminant({{0.0, 1.0, 2.0}}, 0.0, p, v0));
    CHECK_THROWS_AS(discriminant({{0.0}}, 0.0, p, Background::zero_extended({1.0})), ConfigError);
}

TEST_CASE("Anderson-type spectra") {
    ModelConfig cfg;
    cfg.law = SingleSiteLaw::uniform(0, 1);
    SpectrumOptions opt;
    opt.max_period = 4;
    opt.step = 1e-3;
    auto res = almost_sure_spectrum(cfg, cfg.law.support_sample(17), opt);
    CHECK(hausdorff(res.sigma, single(-2, 3)) < 0.05);
    CHECK(res.exhaustive[0]);
    CHECK_FALSE(res.exhaustive[3]);

    ModelConfig d;
    d.law = SingleSiteLaw::delta(0.0);
    auto rd = almost_sure_spectrum(d, {0.0}, opt);
    CHECK(hausdorff(rd.sigma, single(-2, 2)) <= opt.step);
}

TEST_CASE("monotone in the period budget, symmetric, and containing box spectra") {
    ModelConfig cfg;
    cfg.law = SingleSiteLaw::atomic({-1.5, 0.0, 1.5}, {0.25, 0.5, 0.25});
    SpectrumOptions opt;
    opt.step = 2e-3;
    IntervalUnion prev;
    for (int P = 1; P <= 5; ++P) {
        opt.max_period = P;
        auto res = almost_sure_spectrum(cfg, cfg.law.support_sample(), opt);
        if (P > 1)
            for (const auto& I : prev.parts) {
                CHECK(res.sigma.distance(I.a) <= opt.step);
                CHECK(res.sigma.distance(I.b) <= opt.step);
            }
        prev = res.sigma;
    }
    IntervalUnion mirrored;
    for (const auto& I : prev.parts) mirrored.parts.push_back({-I.b, -I.a});
    mirrored.normalize();
    CHECK(hausdorff(prev, mirrored) <= 2 * opt.step);

    std::vector<double> ev;
    for (std::uint64_t s = 0; s < 4; ++s) {
        auto r = sample_realization(cfg, 200, s);
        auto e = eigenvalues_tridiagonal(assemble_finite_box(cfg, r, 200).diag);
        ev.insert(ev.end(), e.begin(), e.end());
    }
    CHECK(containment_fraction(prev, ev, 2 * opt.step + 0.02) >= 0.99);
}
