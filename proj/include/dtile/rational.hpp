#pragma once

#include <gmpxx.h>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dtile/error.hpp"

namespace dtile {

using Rat = mpq_class;
using Int = mpz_class;

// mpq_class(n, d) does not canonicalize; always build rationals through here.
Rat rat(long num, long den = 1);
Rat rat_from_string(const std::string& s);  // "p/q" or "p"
std::string rat_to_string(const Rat& r);

// Floor of an exact rational, as an integer.
Int rat_floor(const Rat& r);
Int rat_ceil(const Rat& r);

// Largest numerator/denominator bit size, for the orbit bit cap.
std::size_t rat_bits(const Rat& r);

struct Vec2Q {
    Rat x, y;

    Vec2Q() : x(0), y(0) {}
    Vec2Q(Rat xx, Rat yy) : x(std::move(xx)), y(std::move(yy)) {}

    bool operator==(const Vec2Q& o) const { return x == o.x && y == o.y; }
    bool operator!=(const Vec2Q& o) const { return !(*this == o); }

    Vec2Q operator+(const Vec2Q& o) const { return {x + o.x, y + o.y}; }
    Vec2Q operator-(const Vec2Q& o) const { return {x - o.x, y - o.y}; }
    Vec2Q operator*(const Rat& s) const { return {x * s, y * s}; }
    Vec2Q operator/(const Rat& s) const { return {x / s, y / s}; }
};

// max(|x|, |y|)
Rat linf_norm(const Vec2Q& v);

// y = A*x + b with A = [[a11,a12],[a21,a22]].
struct AffineMap {
    Rat a11, a12, a21, a22;
    Rat b1, b2;

    AffineMap() : a11(1), a12(0), a21(0), a22(1), b1(0), b2(0) {}
    AffineMap(Rat m11, Rat m12, Rat m21, Rat m22, Rat t1, Rat t2)
        : a11(std::move(m11)), a12(std::move(m12)), a21(std::move(m21)), a22(std::move(m22)),
          b1(std::move(t1)), b2(std::move(t2)) {}

    Vec2Q apply(const Vec2Q& v) const {
        return {a11 * v.x + a12 * v.y + b1, a21 * v.x + a22 * v.y + b2};
    }

    // max absolute row sum of the linear part
    Rat linear_inf_norm() const;

    bool invertible() const { return a11 * a22 - a12 * a21 != 0; }
    AffineMap inverse() const;  // throws DomainError if singular

    bool operator==(const AffineMap& o) const {
        return a11 == o.a11 && a12 == o.a12 && a21 == o.a21 && a22 == o.a22 && b1 == o.b1 &&
               b2 == o.b2;
    }
};

// lcm of the denominators appearing in the map (all six entries).
Int map_denominator_lcm(const AffineMap& f);

}  // namespace dtile
