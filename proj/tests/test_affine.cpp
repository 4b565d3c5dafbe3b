#include <doctest.h>

#include <random>

#include "dtile/affine.hpp"

using namespace dtile;
using namespace dtile::affine;

namespace {

PiecewiseAffineSystem unit_square_system(AffineMap m) {
    PiecewiseAffineSystem sys;
    sys.squares.push_back({Int(0), Int(0)});
    sys.maps.push_back(std::move(m));
    return sys;
}

AffineMap translation(long dx_num, long dx_den, long dy_num, long dy_den) {
    return AffineMap(rat(1), rat(0), rat(0), rat(1), rat(dx_num, dx_den), rat(dy_num, dy_den));
}

}  // namespace

TEST_CASE("square disjointness validation") {
    PiecewiseAffineSystem ok;
    ok.squares = {{Int(0), Int(0)}, {Int(2), Int(0)}};
    ok.maps = {AffineMap{}, AffineMap{}};
    CHECK(validate_system(ok).empty());

    PiecewiseAffineSystem touching;
    touching.squares = {{Int(0), Int(0)}, {Int(1), Int(0)}};
    touching.maps = {AffineMap{}, AffineMap{}};
    CHECK(!validate_system(touching).empty());

    PiecewiseAffineSystem diag;
    diag.squares = {{Int(0), Int(0)}, {Int(2), Int(2)}};
    diag.maps = {AffineMap{}, AffineMap{}};
    CHECK(validate_system(diag).empty());
}

TEST_CASE("apply_piecewise picks the unique piece") {
    auto sys = unit_square_system(AffineMap{});
    auto r = apply_piecewise(sys, {rat(1, 3), rat(1, 3)});
    CHECK(r.piece == 1);
    CHECK(r.image == Vec2Q{rat(1, 3), rat(1, 3)});

    auto stretch = unit_square_system(AffineMap(rat(3), rat(0), rat(0), rat(1, 3), rat(0), rat(0)));
    auto s = apply_piecewise(stretch, {rat(1, 2), rat(3, 5)});
    CHECK(s.image == Vec2Q{rat(3, 2), rat(1, 5)});

    CHECK_THROWS_AS(apply_piecewise(sys, {rat(5), rat(5)}), DomainError);
}

TEST_CASE("orbits: fixed point, immediate death, period two") {
    auto identity = unit_square_system(AffineMap{});
    auto fixed = orbit(identity, {rat(1, 2), rat(1, 2)}, 1000);
    CHECK(fixed.immortal);
    CHECK(fixed.step == 1000);

    auto shift = unit_square_system(translation(2, 1, 0, 1));
    auto dead = orbit(shift, {rat(0), rat(0)}, 1000);
    CHECK(!dead.immortal);
    CHECK(dead.step == 1);
    CHECK(dead.trajectory.back() == Vec2Q{rat(2), rat(0)});

    auto swap = unit_square_system(AffineMap(rat(0), rat(1), rat(1), rat(0), rat(0), rat(0)));
    auto per2 = orbit(swap, {rat(1, 4), rat(3, 4)}, 10);
    CHECK(per2.immortal);
    CHECK(per2.trajectory[0] == per2.trajectory[2]);
    CHECK(per2.trajectory[1] == Vec2Q{rat(3, 4), rat(1, 4)});
}

TEST_CASE("orbit recomputed backwards through inverse maps recovers the start") {
    auto m = AffineMap(rat(0), rat(1), rat(1), rat(0), rat(0), rat(0));
    auto sys = unit_square_system(m);
    Vec2Q x0{rat(2, 7), rat(5, 7)};
    auto fwd = orbit(sys, x0, 25);
    REQUIRE(fwd.immortal);
    Vec2Q back = fwd.trajectory.back();
    for (int k = (int)fwd.pieces.size() - 1; k >= 0; --k)
        back = sys.maps[fwd.pieces[k] - 1].inverse().apply(back);
    CHECK(back == x0);
}

TEST_CASE("certify_mortal: shift out in one step") {
    auto sys = unit_square_system(translation(2, 1, 0, 1));
    auto res = certify_mortal(sys, 8, 1000);
    CHECK(res.mortal);
    CHECK(res.bound == 1);
}

TEST_CASE("certify_mortal: identity never empties") {
    auto sys = unit_square_system(AffineMap{});
    auto res = certify_mortal(sys, 12, 1000);
    CHECK(!res.mortal);
    CHECK(res.depth_reached == 12);
}

TEST_CASE("certify_mortal keeps measure-zero slabs") {
    // translation by 1/2: X1 is a half square, X2 the right edge, X3 empty
    auto sys = unit_square_system(translation(1, 2, 0, 1));
    auto res = certify_mortal(sys, 8, 1000);
    CHECK(res.mortal);
    CHECK(res.bound == 3);
    // spot check: points on the boundary survive exactly two steps
    auto edge = orbit(sys, {rat(1), rat(1, 3)}, 10);
    CHECK(!edge.immortal);
    CHECK(edge.step == 1);
    auto half = orbit(sys, {rat(1, 2), rat(1, 3)}, 10);
    CHECK(half.step == 2);
}

TEST_CASE("mortality certificates are sound on sampled orbits") {
    auto sys = unit_square_system(translation(1, 2, 0, 1));
    auto res = certify_mortal(sys, 8, 1000);
    REQUIRE(res.mortal);
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> num(0, 16);
    for (int t = 0; t < 1000; ++t) {
        Vec2Q x{rat(num(rng), 16), rat(num(rng), 16)};
        auto o = orbit(sys, x, res.bound);
        CHECK(!o.immortal);
        CHECK(o.step <= res.bound);
    }
}

namespace {

TuringMachine always_right_writer() {
    TuringMachine tm;
    tm.states = {"s"};
    tm.alphabet = {0, 1, 2};
    for (int a : tm.alphabet) tm.transitions.push_back({0, a, 0, a, true});
    return tm;
}

TuringMachine zigzag() {
    TuringMachine tm;
    tm.states = {"A", "B"};
    tm.alphabet = {0, 1, 2};
    for (int a : tm.alphabet) {
        tm.transitions.push_back({0, a, 1, a, true});
        tm.transitions.push_back({1, a, 0, a, false});
    }
    return tm;
}

TuringMachine halter() {
    TuringMachine tm;
    tm.states = {"h"};
    tm.alphabet = {0, 1, 2};
    return tm;
}

TmConfig random_config(std::mt19937_64& rng, const TuringMachine& tm, int window) {
    TmConfig cfg;
    cfg.lo = 0;
    cfg.tape.resize(window);
    std::uniform_int_distribution<int> sym(0, (int)tm.alphabet.size() - 1);
    for (auto& t : cfg.tape) t = tm.alphabet[sym(rng)];
    cfg.head = window / 2;
    std::uniform_int_distribution<int> st(0, (int)tm.states.size() - 1);
    cfg.state = st(rng);
    return cfg;
}

}  // namespace

TEST_CASE("compiled machines obey square disjointness") {
    for (auto tm : {always_right_writer(), zigzag(), halter()}) {
        auto ct = compile_tm(tm);
        CHECK(validate_system(ct.sys).empty());
    }
}

TEST_CASE("all-zero tape encodes to the square corner") {
    auto tm = always_right_writer();
    auto ct = compile_tm(tm);
    TmConfig cfg;
    cfg.lo = 0;
    cfg.tape.assign(10, 0);
    cfg.head = 5;
    cfg.state = 0;
    auto pt = encode_config(ct, cfg);
    int sq = ct.enc.encode_square(0, 0);
    CHECK(pt.x == Rat(ct.enc.squares[sq].x0));
    CHECK(pt.y == Rat(ct.enc.squares[sq].y0));
}

TEST_CASE("one-step conjugacy holds exactly for the writer machine") {
    auto tm = always_right_writer();
    auto ct = compile_tm(tm);
    std::mt19937_64 rng(17);
    for (int t = 0; t < 60; ++t) {
        auto cfg = random_config(rng, tm, 20);
        CHECK(tm_step_conjugacy(ct, tm, cfg) == ConjugacyResult::Ok);
    }
}

TEST_CASE("one-step conjugacy holds for the zigzag machine") {
    auto tm = zigzag();
    auto ct = compile_tm(tm);
    std::mt19937_64 rng(18);
    for (int t = 0; t < 60; ++t) {
        auto cfg = random_config(rng, tm, 20);
        CHECK(tm_step_conjugacy(ct, tm, cfg) == ConjugacyResult::Ok);
    }
}

TEST_CASE("encode-then-map equals step-then-encode when tags are unique") {
    auto tm = zigzag();
    auto ct = compile_tm(tm);
    std::mt19937_64 rng(19);
    for (int t = 0; t < 40; ++t) {
        auto cfg = random_config(rng, tm, 16);
        auto img = apply_piecewise(ct.sys, encode_config(ct, cfg));
        TmConfig stepped = cfg;
        REQUIRE(tm_step(tm, stepped));
        if (stepped.head <= cfg.lo || stepped.head >= cfg.lo + (std::int64_t)cfg.tape.size() - 1)
            continue;
        CHECK(img.image == encode_config(ct, stepped));
    }
}

TEST_CASE("halting machine dies in one step everywhere") {
    auto tm = halter();
    auto ct = compile_tm(tm);
    std::mt19937_64 rng(21);
    for (int t = 0; t < 40; ++t) {
        auto cfg = random_config(rng, tm, 12);
        CHECK(tm_step_conjugacy(ct, tm, cfg) == ConjugacyResult::Dies);
    }
    auto res = certify_mortal(ct.sys, 4, 4096);
    CHECK(res.mortal);
    CHECK(res.bound == 1);
}

TEST_CASE("system and machine json round trips are byte identical") {
    auto tm = zigzag();
    auto j1 = tm_to_json(tm);
    CHECK(tm_to_json(tm_from_json(j1)) == j1);
    auto ct = compile_tm(tm);
    auto s1 = system_to_json(ct.sys);
    CHECK(system_to_json(system_from_json(s1)) == s1);
}

TEST_CASE("orbit csv lists exact rationals") {
    auto sys = unit_square_system(AffineMap{});
    auto r = orbit(sys, {rat(1, 3), rat(2, 3)}, 2);
    auto csv = orbit_to_csv(r);
    CHECK(csv.find("0,1/3,2/3,1") != std::string::npos);
}
