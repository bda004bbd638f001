#include <catch2/catch.hpp>

#include <cmath>
#include <complex>

#include "pathloss/math/fft.hpp"
#include "pathloss/math/rng.hpp"
#include "pathloss/math/special.hpp"

using namespace pathloss;

TEST_CASE("normal quantile inverts the cdf", "[math]") {
    for (double p : {1e-9, 1e-4, 0.025, 0.31, 0.5, 0.69, 0.975, 0.9999, 1.0 - 1e-9}) {
        REQUIRE(norm_cdf(norm_quantile(p)) == Approx(p).epsilon(1e-10));
    }
    REQUIRE(norm_quantile(0.975) == Approx(1.959963984540054).epsilon(1e-10));
    REQUIRE(norm_quantile(0.5) == Approx(0.0).margin(1e-12));
}

TEST_CASE("incomplete beta against known values", "[math]") {
    // I_x(a,b) at symmetric points
    REQUIRE(betainc(2.0, 2.0, 0.5) == Approx(0.5).epsilon(1e-12));
    // I_0.5(1,3) = 1 - (1-0.5)^3
    REQUIRE(betainc(1.0, 3.0, 0.5) == Approx(1.0 - std::pow(0.5, 3.0)).epsilon(1e-12));
    // t cdf: dof=1 is cauchy
    REQUIRE(student_t_cdf(1.0, 1.0) == Approx(0.75).epsilon(1e-10));
    REQUIRE(student_t_cdf(0.0, 7.0) == Approx(0.5).margin(1e-12));
}

TEST_CASE("chi-squared survival", "[math]") {
    // dof 2: exp(-x/2)
    REQUIRE(chi2_sf(3.0, 2.0) == Approx(std::exp(-1.5)).epsilon(1e-10));
    REQUIRE(chi2_sf(0.0, 5.0) == Approx(1.0));
    // dof 1 is a squared standard normal
    REQUIRE(chi2_sf(1.96 * 1.96, 1.0) ==
            Approx(2.0 * (1.0 - norm_cdf(1.96))).epsilon(1e-9));
}

TEST_CASE("classical table anchors for t and f tails", "[math]") {
    // t table: P(T_10 <= 2.2281) = 0.975
    REQUIRE(student_t_cdf(2.2281, 10.0) == Approx(0.975).margin(2e-4));
    // F(1, df) is t^2: upper 5% point of F(1,10) is 2.2281^2
    REQUIRE(f_sf(2.2281 * 2.2281, 1.0, 10.0) == Approx(0.05).margin(2e-4));
    // F table: upper 5% point of F(3, 20) is 3.098
    REQUIRE(f_sf(3.098, 3.0, 20.0) == Approx(0.05).margin(5e-4));
}

TEST_CASE("owens t reductions", "[math]") {
    // T(h, 1) = Phi(h)(1 - Phi(h))/2
    for (double h : {0.1, 0.7, 2.0}) {
        const double phi = norm_cdf(h);
        REQUIRE(owens_t(h, 1.0) == Approx(0.5 * phi * (1.0 - phi)).epsilon(1e-9));
    }
    // T(0, a) = atan(a)/(2 pi)
    REQUIRE(owens_t(0.0, 0.6) == Approx(std::atan(0.6) / (2.0 * kPi)).epsilon(1e-10));
    REQUIRE(owens_t(0.5, -0.8) == Approx(-owens_t(0.5, 0.8)).epsilon(1e-12));
}

TEST_CASE("fft matches a naive dft", "[math]") {
    Rng rng(3);
    const std::size_t n = 64;
    std::vector<std::complex<double>> a(n);
    for (auto& v : a) v = {rng.normal(), rng.normal()};
    auto b = a;
    fft_radix2(b, false);
    for (std::size_t k = 0; k < n; k += 7) {
        std::complex<double> ref = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double ang = -2.0 * kPi * static_cast<double>(k * t) / static_cast<double>(n);
            ref += a[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        REQUIRE(std::abs(b[k] - ref) < 1e-10);
    }
    fft_radix2(b, true);
    for (std::size_t t = 0; t < n; ++t) REQUIRE(std::abs(b[t] - a[t]) < 1e-12);
}

TEST_CASE("rng determinism and moments", "[math]") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());

    Rng rng(7);
    double sum = 0.0, ss = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        ss += x * x;
    }
    REQUIRE(sum / n == Approx(0.0).margin(0.01));
    REQUIRE(ss / n == Approx(1.0).margin(0.02));

    // gamma mean = shape
    Rng g(11);
    double gs = 0.0;
    for (int i = 0; i < 100000; ++i) gs += g.gamma(3.5);
    REQUIRE(gs / 100000 == Approx(3.5).margin(0.05));
}

TEST_CASE("derived seeds differ per stream", "[math]") {
    REQUIRE(derive_seed(1, 0) != derive_seed(1, 1));
    REQUIRE(derive_seed(1, 0) != derive_seed(2, 0));
    REQUIRE(derive_seed(5, 3) == derive_seed(5, 3));
}
