#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "errors.hpp"
#include "special.hpp"

using namespace grassmix;

TEST_CASE("regularized lower incomplete gamma matches reference values") {
    // Reference values computed with mpmath at 15 digits.
    CHECK(special::gammainc_lower_reg(0.5, 0.3) == doctest::Approx(0.561421973919000).epsilon(1e-12));
    CHECK(special::gammainc_lower_reg(1.0, 1.0) == doctest::Approx(0.632120558828558).epsilon(1e-12));
    CHECK(special::gammainc_lower_reg(2.5, 1.3) == doctest::Approx(0.238634732154986).epsilon(1e-12));
    CHECK(special::gammainc_lower_reg(5.0, 7.0) == doctest::Approx(0.827008392117929).epsilon(1e-12));
    CHECK(special::gammainc_lower_reg(10.0, 3.0) == doctest::Approx(0.001102488130115).epsilon(1e-9));
    CHECK(special::gammainc_lower_reg(26.0, 24.0) == doctest::Approx(0.368093334498843).epsilon(1e-12));
}

TEST_CASE("incomplete gamma edges") {
    CHECK(special::gammainc_lower_reg(2.0, 0.0) == 0.0);
    CHECK(special::gammainc_lower_reg(1.0, 800.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(special::gammainc_lower_reg(-1.0, 1.0), ValidationError);
    CHECK_THROWS_AS(special::gammainc_lower_reg(1.0, -1.0), ValidationError);
}

TEST_CASE("gamma_cdf is exponential for shape 1") {
    for (double x : {0.1, 0.5, 1.0, 3.0})
        CHECK(special::gamma_cdf(x, 1.0, 2.0) == doctest::Approx(1.0 - std::exp(-2.0 * x)));
    CHECK(special::gamma_cdf(-1.0, 1.0, 1.0) == 0.0);
}

TEST_CASE("normal_cdf basic values") {
    CHECK(special::normal_cdf(0.0) == doctest::Approx(0.5));
    CHECK(special::normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-9));
    CHECK(special::normal_cdf(-1.959963984540054) == doctest::Approx(0.025).epsilon(1e-9));
}
