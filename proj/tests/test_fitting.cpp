#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "geowarp/fitting.hpp"
#include "support.hpp"

using namespace geowarp;

namespace {

const ParamRange kRanges = ParamRange::defaults();

double cell_width(DistortionType t, int c) { return kRanges.of(t, c).width() / 100.0; }

// Replaces a fraction of pixels by uniform noise in [-amp, amp].
FlowField corrupt(const FlowField& f, double fraction, std::uint64_t seed, double amp = 20.0) {
    FlowField out = f;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> noise(-amp, amp);
    for (auto& v : out.vectors())
        if (unit(rng) < fraction) v = {float(noise(rng)), float(noise(rng))};
    return out;
}

}  // namespace

TEST_CASE("accumulator") {
    SUBCASE("votes land in the right cell and out-of-range is dropped") {
        HoughAccumulator acc({Interval{0.0, 1.0}}, 10);
        const double a[] = {0.05};
        const double b[] = {0.95};
        const double out[] = {1.5};
        const double nan[] = {NAN};
        CHECK(acc.vote(a));
        CHECK(acc.vote(b));
        CHECK_FALSE(acc.vote(out));
        CHECK_FALSE(acc.vote(nan));
        CHECK(acc.total_votes() == 2);
        CHECK(acc.count(0) == 1);
        CHECK(acc.count(9) == 1);
    }

    SUBCASE("the upper bound belongs to the last cell") {
        HoughAccumulator acc({Interval{-1.0, 1.0}}, 4);
        const double top[] = {1.0};
        CHECK(acc.vote(top));
        CHECK(acc.count(3) == 1);
    }

    SUBCASE("winner mean is the average of its samples") {
        HoughAccumulator acc({Interval{0.0, 10.0}}, 10);
        for (double v : {3.1, 3.3, 3.8, 7.2}) {
            const double s[] = {v};
            acc.vote(s);
        }
        CHECK(acc.winner() == 3);
        CHECK(acc.cell_mean(3)[0] == doctest::Approx((3.1 + 3.3 + 3.8) / 3.0));
    }

    SUBCASE("ties prefer the cell nearest the origin") {
        HoughAccumulator acc({Interval{-1.0, 1.0}}, 10);
        for (double v : {-0.75, 0.15, 0.55}) {
            const double s[] = {v};
            acc.vote(s);
        }
        CHECK(acc.winner() == 5);
        HoughAccumulator sym({Interval{-1.0, 1.0}}, 10);
        for (double v : {0.15, -0.15}) {
            const double s[] = {v};
            sym.vote(s);
        }
        CHECK(sym.winner() == 4);
    }

    SUBCASE("two-dimensional cells and merging") {
        HoughAccumulator a({Interval{0.0, 1.0}, Interval{0.0, 1.0}}, 4);
        HoughAccumulator b({Interval{0.0, 1.0}, Interval{0.0, 1.0}}, 4);
        const double s1[] = {0.1, 0.9};
        const double s2[] = {0.12, 0.8};
        a.vote(s1);
        b.vote(s2);
        a.merge(b);
        CHECK(a.total_votes() == 2);
        CHECK(a.count(3 * 4 + 0) == 2);
        CHECK(a.cell_mean(12)[1] == doctest::Approx(0.85));
        CHECK(a.cell_centre(12)[0] == doctest::Approx(0.125));
        CHECK_THROWS_AS(a.merge(HoughAccumulator({Interval{0.0, 1.0}}, 4)), InvalidInput);
    }
}

TEST_CASE("rotation of 10 degrees is recovered within half a cell") {
    const FitResult fit = hough_fit(flow_field(DistortionParams::rotation(10.0), 128, 128),
                                    DistortionType::Rotation, kRanges);
    CHECK(fit.params.type == DistortionType::Rotation);
    CHECK(std::abs(fit.params.rho[0] - 10.0) <= 0.3);
    CHECK(fit.inlier_fraction > 0.9);
    CHECK(fit.inlier_fraction <= 1.0);
}

TEST_CASE("zero flow fits a zero shear") {
    const FitResult fit = hough_fit(FlowField(64, 64), DistortionType::Shear, kRanges);
    CHECK(fit.params.rho[0] == 0.0);
    CHECK(fit.refit_epe == 0.0);
}

TEST_CASE("noisy barrel") {
    const FlowField clean = flow_field(DistortionParams::barrel(-0.2), 128, 128);
    const FlowField noisy = corrupt(clean, 0.10, 7);
    const FitResult fit = hough_fit(noisy, DistortionType::Barrel, kRanges);
    CHECK(std::abs(fit.params.rho[0] + 0.2) <= cell_width(DistortionType::Barrel, 0));

    const FlowField refined = refine_flow(fit, 128, 128);
    CHECK(fit.refit_epe > masked_epe(refined, refined));
    CHECK(masked_epe(refined, clean) < masked_epe(noisy, clean));
}

TEST_CASE("refine_flow") {
    SUBCASE("exact fit reproduces the generator") {
        const FlowField truth = flow_field(DistortionParams::shear(0.3), 96, 80);
        const FitResult fit = hough_fit(truth, DistortionType::Shear, kRanges);
        CHECK(epe(refine_flow(fit, 96, 80), truth) < 1e-5);
    }

    SUBCASE("fit at 64, refine at 256") {
        const FitResult fit = hough_fit(flow_field(DistortionParams::rotation(10.0), 64, 64),
                                        DistortionType::Rotation, kRanges);
        const FlowField big = refine_flow(fit, 256, 256);
        CHECK(epe(big, flow_field(DistortionParams::rotation(10.0), 256, 256)) < 0.5);
    }
}

TEST_CASE("insufficient data") {
    CHECK_THROWS_AS(hough_fit(FlowField(8, 8), DistortionType::Rotation, kRanges), InsufficientData);
    // Every estimate lands outside the barrel range.
    CHECK_THROWS_AS(hough_fit(flow_field(DistortionParams::pincushion(0.3), 64, 64), DistortionType::Barrel, kRanges),
                    InsufficientData);
}

TEST_CASE("two-parameter fits") {
    SUBCASE("perspective") {
        const FitResult fit = hough_fit(flow_field(DistortionParams::perspective(0.12, -0.21), 128, 128),
                                        DistortionType::Perspective, kRanges);
        CHECK(std::abs(fit.params.rho[0] - 0.12) <= 0.5 * cell_width(DistortionType::Perspective, 0));
        CHECK(std::abs(fit.params.rho[1] + 0.21) <= 0.5 * cell_width(DistortionType::Perspective, 1));
    }
    SUBCASE("wave") {
        const FitResult fit = hough_fit(flow_field(DistortionParams::wave(5.5, 47.0), 128, 128),
                                        DistortionType::Wave, kRanges);
        CHECK(std::abs(fit.params.rho[0] - 5.5) <= 0.5 * cell_width(DistortionType::Wave, 0));
        CHECK(std::abs(fit.params.rho[1] - 47.0) <= 0.5 * cell_width(DistortionType::Wave, 1));
    }
}

TEST_CASE("exact recovery over random draws") {
    for (DistortionType t : kAllTypes) {
        CAPTURE(type_name(t));
        for (std::uint64_t seed = 0; seed < 12; ++seed) {
            const DistortionParams truth = sample_params(t, kRanges, 1000 + seed);
            const FitResult fit = hough_fit(flow_field(truth, 96, 96), t, kRanges);
            for (int c = 0; c < param_count(t); ++c) {
                CAPTURE(truth.rho[c]);
                CHECK(std::abs(fit.params.rho[c] - truth.rho[c]) <= 0.5 * cell_width(t, c));
            }
        }
    }
}

TEST_CASE("single-parameter fits shrug off 20% outliers") {
    for (DistortionType t : {DistortionType::Barrel, DistortionType::Pincushion, DistortionType::Rotation,
                             DistortionType::Shear}) {
        CAPTURE(type_name(t));
        for (std::uint64_t seed = 0; seed < 6; ++seed) {
            const DistortionParams truth = sample_params(t, kRanges, 50 + seed);
            const FlowField clean = flow_field(truth, 96, 96);
            const FlowField noisy = corrupt(clean, 0.20, seed);
            const FitResult fit = hough_fit(noisy, t, kRanges);
            CHECK(std::abs(fit.params.rho[0] - truth.rho[0]) <= cell_width(t, 0));
            CHECK(masked_epe(refine_flow(fit, 96, 96), clean) <= masked_epe(noisy, clean));
        }
    }
}

TEST_CASE("normalized parameters do not depend on resolution") {
    for (DistortionType t : {DistortionType::Barrel, DistortionType::Pincushion, DistortionType::Rotation,
                             DistortionType::Shear, DistortionType::Perspective}) {
        CAPTURE(type_name(t));
        const DistortionParams truth = sample_params(t, kRanges, 77);
        const FitResult small = hough_fit(flow_field(truth, 64, 64), t, kRanges);
        const FitResult big = hough_fit(flow_field(truth, 256, 256), t, kRanges);
        for (int c = 0; c < param_count(t); ++c)
            CHECK(std::abs(small.params.rho[c] - big.params.rho[c]) <= cell_width(t, c));
    }
}

TEST_CASE("masked pixels do not vote") {
    FlowField f = flow_field(DistortionParams::rotation(-12.0), 64, 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 32; ++x) {
            f.at(x, y) = {100.0F, -100.0F};
            f.set_valid(x, y, false);
        }
    const FitResult fit = hough_fit(f, DistortionType::Rotation, kRanges);
    CHECK(std::abs(fit.params.rho[0] + 12.0) <= 0.3);
    CHECK(fit.refit_epe < 1e-4);
}

TEST_CASE("serial and parallel fits are identical") {
    const FlowField noisy = corrupt(flow_field(DistortionParams::perspective(-0.1, 0.25), 96, 96), 0.1, 3);
    FitOptions serial;
    serial.execution = Execution::Serial;
    const FitResult a = hough_fit(noisy, DistortionType::Perspective, kRanges, serial);
    const FitResult b = hough_fit(noisy, DistortionType::Perspective, kRanges);
    CHECK(a.params.rho == b.params.rho);
    CHECK(a.votes == b.votes);
    CHECK(a.refit_epe == b.refit_epe);
}

TEST_CASE("identify_model") {
    SUBCASE("shear is found exactly") {
        const auto ranked = identify_model(flow_field(DistortionParams::shear(0.2), 96, 96), kRanges);
        REQUIRE_FALSE(ranked.empty());
        CHECK(ranked.front().params.type == DistortionType::Shear);
        CHECK(ranked.front().refit_epe < 1e-6);
        for (std::size_t i = 1; i < ranked.size(); ++i) CHECK(ranked[i - 1].refit_epe <= ranked[i].refit_epe);
    }

    SUBCASE("zero flow ties resolve in canonical order") {
        const auto ranked = identify_model(FlowField(64, 64), kRanges);
        REQUIRE_FALSE(ranked.empty());
        for (const FitResult& r : ranked) CHECK(r.refit_epe == 0.0);
        for (std::size_t i = 1; i < ranked.size(); ++i)
            CHECK(int(ranked[i - 1].params.type) < int(ranked[i].params.type));
        CHECK(ranked.front().params.type == DistortionType::Rotation);
    }

    SUBCASE("pincushion survives 5% outliers") {
        const FlowField noisy = corrupt(flow_field(DistortionParams::pincushion(0.25), 96, 96), 0.05, 11);
        CHECK(identify_model(noisy, kRanges).front().params.type == DistortionType::Pincushion);
    }

    SUBCASE("every type is identified from its own flow") {
        for (DistortionType t : kAllTypes) {
            const DistortionParams truth = sample_params(t, kRanges, 5);
            CHECK(identify_model(flow_field(truth, 96, 96), kRanges).front().params.type == t);
        }
    }

    SUBCASE("a tiny flow is unidentifiable") {
        CHECK_THROWS_AS(identify_model(FlowField(6, 6), kRanges), Unidentifiable);
    }
}
