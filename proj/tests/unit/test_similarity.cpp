#include <doctest.h>

#include <Eigen/Dense>
#include <cstring>

#include "test_support.hpp"
#include "zspacing/similarity.hpp"

using namespace zspacing;
using zspacing::testing::make_f32_stack;
using zspacing::testing::make_u8_stack;

namespace {

Psm grid_psm(int n, int range) {
    Psm psm;
    psm.range = range;
    psm.values = Eigen::MatrixXd::Constant(n, n, Psm::not_computed);
    for (int i = 0; i < n; ++i) {
        psm.values(i, i) = 1.0;
        for (int j = i + 1; j <= std::min(n - 1, i + range); ++j) {
            const double v = std::exp(-(j - i) / 3.0);
            psm.values(i, j) = v;
            psm.values(j, i) = v;
        }
    }
    return psm;
}

} // namespace

TEST_CASE("ncc matches a hand-computed value") {
    Eigen::Matrix2d a, b;
    a << 0, 1, 2, 3;
    b << 0, 1, 2, 5;
    // means 1.5 and 2; cov 2; sigmas sqrt(1.25) and sqrt(3.5)
    CHECK(ncc(a, b) == doctest::Approx(0.9561828874675149).epsilon(1e-14));
    CHECK(ncc(b, a) == doctest::Approx(ncc(a, b)).epsilon(1e-15));
}

TEST_CASE("ncc is 1 against itself and -1 against its negation") {
    Eigen::MatrixXd a(3, 4);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 4; ++x) a(y, x) = std::sin(1.7 * x + 0.3 * y);
    CHECK(ncc(a, a) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(ncc(a, (-a).eval()) == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("ncc is invariant under affine intensity changes") {
    Eigen::MatrixXd a(5, 5), b(5, 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) {
            a(y, x) = 0.1 * x * x + 0.7 * y + 0.01 * x * y;
            b(y, x) = std::cos(0.9 * x) - 0.2 * y;
        }
    const double base = ncc(a, b);
    CHECK(std::abs(ncc((2.0 * a).eval(), b) - base) <= 1e-6);
    CHECK(std::abs(ncc((a.array() + 17.0).matrix().eval(), b) - base) <= 1e-6);
    CHECK(std::abs(ncc((0.25 * a.array() - 3.0).matrix().eval(),
                       (4.0 * b.array() + 11.0).matrix().eval()) -
                   base) <= 1e-6);
    CHECK(ncc(a, (3.0 * a.array() + 1.0).matrix().eval()) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ncc rejects mismatched and degenerate inputs") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Random(2, 3);
    Eigen::MatrixXd b = Eigen::MatrixXd::Random(3, 2);
    CHECK_THROWS_WITH_AS(static_cast<void>(ncc(a, b)),
                         "ncc: image dimensions differ (2x3 vs 3x2)", data_error);
    Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(2, 2, 0.5);
    CHECK_THROWS_WITH_AS(static_cast<void>(ncc(flat, a.topRows(2).leftCols(2).eval())),
                         "ncc: zero-variance image", data_error);
}

TEST_CASE("compute_psm produces a valid banded symmetric matrix") {
    const ImageStack stack = make_f32_stack(8, 6, 7, [](int x, int y, int z) {
        return std::sin(0.31f * x + 0.17f * y + 1.3f * z) + 0.05f * z * x;
    });
    const Psm psm = compute_psm(stack, 3);
    CHECK(psm.n() == 7);
    CHECK(psm.range == 3);
    validate_psm(psm);
    for (int i = 0; i < 7; ++i) {
        CHECK(psm.values(i, i) == 1.0);
        for (int j = 0; j < 7; ++j) {
            CHECK(psm.computed(i, j) == (std::abs(i - j) <= 3));
            if (psm.computed(i, j)) CHECK(psm.values(i, j) == psm.values(j, i));
        }
    }
    // adjacent sections of a smooth signal correlate better than distant ones
    CHECK(psm.values(2, 3) > psm.values(2, 5));
}

TEST_CASE("compute_psm accepts u8 input and range bounds") {
    const ImageStack stack = make_u8_stack(6, 5, 4, [](int x, int y, int z) {
        return static_cast<std::uint8_t>((x * 13 + y * 7 + z * 29) % 251);
    });
    validate_psm(compute_psm(stack, 1));
    validate_psm(compute_psm(stack, 3));
    CHECK_THROWS_AS(static_cast<void>(compute_psm(stack, 0)), data_error);
    CHECK_THROWS_AS(static_cast<void>(compute_psm(stack, 4)), data_error);
}

TEST_CASE("compute_psm is bit-identical across thread counts") {
    const ImageStack stack = make_f32_stack(16, 12, 9, [](int x, int y, int z) {
        return std::cos(0.21f * x) * std::sin(0.4f * y + 0.9f * z) + 0.01f * x * z;
    });
    const Psm one = compute_psm(stack, 4, 1);
    for (const int threads : {2, 3, 8}) {
        const Psm many = compute_psm(stack, 4, threads);
        REQUIRE(many.values.size() == one.values.size());
        CHECK(std::memcmp(one.values.data(), many.values.data(),
                          sizeof(double) * one.values.size()) == 0);
    }
}

TEST_CASE("compute_psm flags zero-variance sections") {
    const ImageStack stack = make_f32_stack(4, 4, 5, [](int x, int y, int z) {
        return z == 2 ? 0.5f : std::sin(0.7f * x + 0.2f * y + z);
    });
    CHECK_THROWS_WITH_AS(static_cast<void>(compute_psm(stack, 2)),
                         "compute_psm: section 2 has zero intensity variance", data_error);

    std::vector<std::string> warnings;
    const Psm psm = compute_psm(stack, 2, 1, true, &warnings);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("section 2") != std::string::npos);
    CHECK(psm.values(1, 2) == 0.0);
    CHECK(psm.values(2, 3) == 0.0);
    CHECK(psm.values(2, 2) == 1.0);  // diagonal stays pinned
    validate_psm(psm);
}

TEST_CASE("validate_psm catches each invariant violation") {
    Psm psm = grid_psm(5, 2);
    CHECK_NOTHROW(validate_psm(psm));

    SUBCASE("broken diagonal") {
        psm.values(2, 2) = 0.9;
        CHECK_THROWS_AS(validate_psm(psm), data_error);
    }
    SUBCASE("asymmetry") {
        psm.values(1, 2) = psm.values(2, 1) + 1e-3;
        CHECK_THROWS_AS(validate_psm(psm), data_error);
    }
    SUBCASE("one-sided value") {
        psm.values(3, 4) = Psm::not_computed;
        CHECK_THROWS_AS(validate_psm(psm), data_error);
    }
    SUBCASE("out of [-1,1]") {
        psm.values(0, 1) = psm.values(1, 0) = 1.5;
        CHECK_THROWS_AS(validate_psm(psm), data_error);
    }
    SUBCASE("computed outside the declared range") {
        psm.values(0, 4) = psm.values(4, 0) = 0.2;
        CHECK_THROWS_AS(validate_psm(psm), data_error);
    }
    SUBCASE("non-square") {
        psm.values.conservativeResize(5, 4);
        CHECK_THROWS_AS(validate_psm(psm), data_error);
    }
}

TEST_CASE("compute_blockwise_psm splits the frame into windows") {
    const ImageStack stack = make_f32_stack(10, 4, 6, [](int x, int y, int z) {
        return x < 5 ? 0.3f * x + 0.1f * y : std::sin(0.5f * x + 1.1f * z) + 0.2f * y;
    });
    const BlockGrid grid = compute_blockwise_psm(stack, 2, 1, 2);
    CHECK(grid.blocks_x == 2);
    CHECK(grid.blocks_y == 1);
    REQUIRE(grid.blocks.size() == 2);
    validate_psm(grid.at(0, 0));
    validate_psm(grid.at(1, 0));
    // the left window never changes with z, so all its similarities are 1
    CHECK(grid.at(0, 0).values(0, 1) == doctest::Approx(1.0));
    const Psm right = grid.at(1, 0);
    CHECK(right.n() == 6);
    CHECK(right.range == 2);
}

TEST_CASE("compute_blockwise_psm reports a flat window as zero variance") {
    // left half constant within every section: those windows cannot correlate
    const ImageStack stack = make_f32_stack(8, 4, 5, [](int x, int y, int z) {
        return x < 4 ? 0.25f : std::sin(0.5f * x + 1.1f * z) + 0.2f * y;
    });
    CHECK_THROWS_WITH_AS(static_cast<void>(compute_blockwise_psm(stack, 2, 1, 2)),
                         doctest::Contains("block (0,0)"), data_error);
    std::vector<std::string> warnings;
    const BlockGrid grid = compute_blockwise_psm(stack, 2, 1, 2, 1, true, &warnings);
    CHECK_FALSE(warnings.empty());
    CHECK(grid.at(0, 0).values(0, 1) == 0.0);
    validate_psm(grid.at(1, 0));
}

TEST_CASE("blockwise psm of a left-right split disagrees between blocks") {
    const ImageStack stack = make_f32_stack(8, 4, 5, [](int x, int y, int z) {
        return x < 4 ? std::sin(0.9f * x + 0.4f * y + 0.3f * z)
                     : std::sin(0.9f * x + 0.4f * y + 1.6f * z);
    });
    const BlockGrid grid = compute_blockwise_psm(stack, 2, 1, 2);
    // faster variation along z on the right means lower adjacent similarity
    CHECK(grid.at(1, 0).values(0, 1) < grid.at(0, 0).values(0, 1));
}
