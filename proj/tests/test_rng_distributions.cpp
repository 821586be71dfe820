#include <catch_amalgamated.hpp>

#include "helpers.hpp"
#include "uqsim/uqsim.hpp"

using namespace uqsim;

TEST_CASE("named streams are stable and independent", "[rng]") {
    RngStream a(derive_stream_seed(42, "proc:A"));
    RngStream a2(derive_stream_seed(42, "proc:A"));
    RngStream b(derive_stream_seed(42, "proc:B"));
    bool same = true, differ = false;
    for (int i = 0; i < 64; ++i) {
        auto va = a.next_u64();
        same &= (va == a2.next_u64());
        differ |= (va != b.next_u64());
    }
    REQUIRE(same);
    REQUIRE(differ);
}

TEST_CASE("uniform01 stays inside the open interval", "[rng]") {
    RngStream r(1);
    for (int i = 0; i < 100000; ++i) {
        double u = r.uniform01();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("exponential sample mean converges at 1e6 draws", "[rng]") {
    RngStream r(3);
    double acc = 0.0;
    const int n = 1'000'000;
    for (int i = 0; i < n; ++i) acc += r.exponential(100.0);
    REQUIRE(acc / n == Catch::Approx(100.0).epsilon(0.005));
}

TEST_CASE("lognormal sample mean matches exp(mu + sigma^2/2)", "[rng]") {
    RngStream r(4);
    double acc = 0.0;
    const int n = 400'000;
    for (int i = 0; i < n; ++i) acc += r.lognormal(3.0, 0.5);
    REQUIRE(acc / n == Catch::Approx(std::exp(3.0 + 0.125)).epsilon(0.02));
}

TEST_CASE("single-bucket histogram draws interpolate inside (0, bound]", "[distributions]") {
    HistogramPdf pdf;
    pdf.upper_bound_us = {100.0};
    pdf.probability = {1.0};
    pdf.finalize();
    RngStream r(5);
    double acc = 0.0;
    const int n = 200'000;
    for (int i = 0; i < n; ++i) {
        double v = pdf.sample(r);
        REQUIRE(v > 0.0);
        REQUIRE(v <= 100.0);
        acc += v;
    }
    REQUIRE(acc / n == Catch::Approx(50.0).epsilon(0.01));
}

TEST_CASE("histogram validation flags bad distributions", "[distributions]") {
    HistogramTable table;
    HistogramPdf ok;
    ok.upper_bound_us = {100.0, 200.0};
    ok.probability = {0.5, 0.5};
    ok.finalize();
    table[{"svc", 0, 2.6}] = ok;
    REQUIRE_NOTHROW(validate_histograms(table));

    HistogramPdf bad_sum = ok;
    bad_sum.probability = {0.7, 0.5};
    bad_sum.finalize();
    table[{"svc", 1, 2.6}] = bad_sum;
    REQUIRE_THROWS_AS(validate_histograms(table), ProbabilityError);

    HistogramPdf bad_bounds;
    bad_bounds.upper_bound_us = {200.0, 100.0};
    bad_bounds.probability = {0.5, 0.5};
    bad_bounds.finalize();
    REQUIRE_THROWS_AS(bad_bounds.validate("k"), SchemaError);
}

TEST_CASE("multi-bucket histogram reproduces bucket masses", "[distributions]") {
    HistogramPdf pdf;
    pdf.upper_bound_us = {20.0, 50.0, 100.0};
    pdf.probability = {0.2, 0.5, 0.3};
    pdf.finalize();
    RngStream r(6);
    int in_first = 0;
    const int n = 200'000;
    for (int i = 0; i < n; ++i)
        if (pdf.sample(r) <= 20.0) ++in_first;
    REQUIRE(static_cast<double>(in_first) / n == Catch::Approx(0.2).margin(0.005));
}
