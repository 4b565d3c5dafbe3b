#include <doctest.h>

#include "dtile/rational.hpp"

using namespace dtile;

TEST_CASE("rationals canonicalize on construction") {
    CHECK(rat(2, 6) == rat(1, 3));
    CHECK(rat(1, -2) == rat(-1, 2));
    CHECK(rat_to_string(rat(-4, 8)) == "-1/2");
    CHECK(rat_from_string("6/4") == rat(3, 2));
    CHECK(rat_from_string("-7") == rat(-7));
    CHECK_THROWS_AS(rat_from_string("x"), ValidationError);
}

TEST_CASE("floors of negatives round down") {
    CHECK(rat_floor(rat(-1, 2)) == -1);
    CHECK(rat_floor(rat(1, 2)) == 0);
    CHECK(rat_ceil(rat(-1, 2)) == 0);
    CHECK(rat_floor(rat(-4, 2)) == -2);
}

TEST_CASE("affine maps invert exactly") {
    AffineMap m(rat(2), rat(1), rat(1), rat(1), rat(3, 7), rat(-2, 5));
    Vec2Q x{rat(5, 11), rat(-3, 13)};
    CHECK(m.inverse().apply(m.apply(x)) == x);
    AffineMap sing(rat(1), rat(1), rat(1), rat(1), rat(0), rat(0));
    CHECK(!sing.invertible());
    CHECK_THROWS_AS(sing.inverse(), DomainError);
}

TEST_CASE("denominator lcm covers all six entries") {
    AffineMap m(rat(1, 2), rat(0), rat(0), rat(1, 3), rat(1, 5), rat(2));
    CHECK(map_denominator_lcm(m) == 30);
}

TEST_CASE("bit size guard sees numerator and denominator") {
    CHECK(rat_bits(rat(1, 1)) == 1);
    CHECK(rat_bits(rat(1024)) == 11);
}
