#include <doctest.h>

#include <vector>

#include "firmcascade/errors.hpp"
#include "firmcascade/stats.hpp"

using namespace firmcascade;

TEST_CASE("paired t-test against textbook values") {
    // d = a - b = [-1.1, -0.9, -1.05, -0.95]; reference values frozen from
    // an independent implementation of the same formula
    const std::vector<double> a{1.0, 2.0, 3.0, 4.0};
    const std::vector<double> b{2.1, 2.9, 4.05, 4.95};
    const auto r = paired_t_test(a, b);
    CHECK(r.dof == 3);
    CHECK(r.mean_diff == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(r.t == doctest::Approx(-21.908902300206645).epsilon(1e-12));
    CHECK(r.p_two_sided == doctest::Approx(0.00020814272678901016).epsilon(1e-9));
}

TEST_CASE("paired t-test, six noisy pairs") {
    const std::vector<double> a{3.1, 2.7, 3.3, 2.9, 3.0, 3.2};
    const std::vector<double> b{2.8, 2.9, 3.0, 2.6, 2.9, 3.1};
    const auto r = paired_t_test(a, b);
    CHECK(r.dof == 5);
    CHECK(r.t == doctest::Approx(1.8605210188381283).epsilon(1e-12));
    CHECK(r.p_two_sided == doctest::Approx(0.12188913791398925).epsilon(1e-9));
}

TEST_CASE("degenerate and invalid inputs") {
    SUBCASE("constant shift has zero variance") {
        const std::vector<double> a{1.0, 2.0, 3.0, 4.0};
        std::vector<double> b;
        for (double v : a) b.push_back(v + 1.0);
        CHECK_THROWS_AS(paired_t_test(a, b), DegenerateInputError);
    }
    SUBCASE("identical series") {
        const std::vector<double> a{5.0, 6.0, 7.0};
        CHECK_THROWS_AS(paired_t_test(a, a), DegenerateInputError);
    }
    SUBCASE("length mismatch") {
        CHECK_THROWS_AS(paired_t_test(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0}), InputError);
    }
    SUBCASE("too short") {
        CHECK_THROWS_AS(paired_t_test(std::vector<double>{1.0}, std::vector<double>{2.0}), InputError);
    }
}
