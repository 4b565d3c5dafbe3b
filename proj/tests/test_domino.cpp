#include <doctest.h>

#include <random>

#include "dtile/domino.hpp"
#include "helpers.hpp"

using namespace dtile;
using namespace dtile::domino;

namespace {

LabeledPatch grid_patch(int w, int h) {
    LabeledPatch p;
    p.num_vertices = (std::int64_t)w * h;
    p.label_names = {"s"};
    auto idx = [w](int r, int c) { return (std::int64_t)r * w + c; };
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            if (c + 1 < w) p.edges.push_back({idx(r, c), idx(r, c + 1), 0});
            if (r + 1 < h) p.edges.push_back({idx(r, c), idx(r + 1, c), 0});
        }
    return p;
}

DominoInstance unequal_instance(int ncolours) {
    DominoInstance inst;
    for (int c = 0; c < ncolours; ++c) inst.colours.push_back(std::to_string(c));
    inst.labels = {"s"};
    for (int a = 0; a < ncolours; ++a)
        for (int b = 0; b < ncolours; ++b)
            if (a != b) inst.allowed.push_back({a, 0, b});
    return inst;
}

}  // namespace

TEST_CASE("full tileset accepts any coloring") {
    auto p = grid_patch(3, 2);
    DominoInstance inst;
    inst.colours = {"x", "y"};
    inst.labels = {"s"};
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) inst.allowed.push_back({a, 0, b});
    Coloring col(p.num_vertices, 1);
    CHECK(check_coloring(p, inst, col).empty());
}

TEST_CASE("empty tileset reports every edge") {
    LabeledPatch p;
    p.num_vertices = 2;
    p.label_names = {"s"};
    p.edges.push_back({0, 1, 0});
    DominoInstance inst;
    inst.colours = {"x"};
    inst.labels = {"s"};
    auto bad = check_coloring(p, inst, {0, 0});
    REQUIRE(bad.size() == 1);
    CHECK(bad[0] == 0);
}

TEST_CASE("checkerboard coloring is valid for the unequal tileset") {
    auto p = grid_patch(3, 3);
    auto inst = unequal_instance(2);
    Coloring col;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) col.push_back((r + c) % 2);
    CHECK(check_coloring(p, inst, col).empty());
}

TEST_CASE("undeclared colours are a validation error") {
    auto p = grid_patch(2, 1);
    auto inst = unequal_instance(2);
    CHECK_THROWS_AS(check_coloring(p, inst, {0, 7}), ValidationError);
}

TEST_CASE("solver: empty tileset with an edge is unsatisfiable") {
    LabeledPatch p;
    p.num_vertices = 2;
    p.label_names = {"s"};
    p.edges.push_back({0, 1, 0});
    DominoInstance inst;
    inst.colours = {"x"};
    inst.labels = {"s"};
    auto out = solve_patch(p, inst, 1000);
    CHECK(out.kind == SolveOutcome::Kind::Unsatisfiable);
    CHECK(out.explored == 0);  // initial propagation already wipes a domain
}

TEST_CASE("solver picks the least colour on a single vertex") {
    LabeledPatch p;
    p.num_vertices = 1;
    p.label_names = {"s"};
    DominoInstance inst = unequal_instance(3);
    auto out = solve_patch(p, inst, 1000);
    REQUIRE(out.kind == SolveOutcome::Kind::Satisfiable);
    CHECK(out.coloring == Coloring{0});
}

TEST_CASE("odd cycle with unequal tileset is unsatisfiable") {
    LabeledPatch p;
    p.num_vertices = 5;
    p.label_names = {"s"};
    for (int v = 0; v < 5; ++v) p.edges.push_back({v, (v + 1) % 5, 0});
    auto inst = unequal_instance(2);
    CHECK(!testutil::brute_force_satisfiable(p, inst));  // oracle first
    auto out = solve_patch(p, inst, 100000);
    CHECK(out.kind == SolveOutcome::Kind::Unsatisfiable);

    // even cycle is fine
    LabeledPatch p6;
    p6.num_vertices = 6;
    p6.label_names = {"s"};
    for (int v = 0; v < 6; ++v) p6.edges.push_back({v, (v + 1) % 6, 0});
    auto out6 = solve_patch(p6, inst, 100000);
    REQUIRE(out6.kind == SolveOutcome::Kind::Satisfiable);
    CHECK(check_coloring(p6, inst, out6.coloring).empty());
}

TEST_CASE("solver agrees with brute force on random instances") {
    std::mt19937_64 rng(42);
    for (int t = 0; t < 60; ++t) {
        auto patch = testutil::random_patch(rng, 8);
        auto inst = testutil::random_instance(rng, 1 + (int)(rng() % 3), 0.55);
        bool brute = testutil::brute_force_satisfiable(patch, inst);
        auto out = solve_patch(patch, inst, 2'000'000);
        REQUIRE(out.kind != SolveOutcome::Kind::Aborted);
        CHECK((out.kind == SolveOutcome::Kind::Satisfiable) == brute);
        if (out.kind == SolveOutcome::Kind::Satisfiable)
            CHECK(check_coloring(patch, inst, out.coloring).empty());
    }
}

TEST_CASE("solver node counts are deterministic") {
    std::mt19937_64 rng(11);
    auto patch = testutil::random_patch(rng, 10);
    auto inst = testutil::random_instance(rng, 3, 0.4);
    auto a = solve_patch(patch, inst, 1'000'000);
    auto b = solve_patch(patch, inst, 1'000'000);
    CHECK(a.kind == b.kind);
    CHECK(a.explored == b.explored);
}

TEST_CASE("tiny budget aborts") {
    auto p = grid_patch(4, 4);
    auto inst = unequal_instance(3);
    auto out = solve_patch(p, inst, 2);
    CHECK(out.kind == SolveOutcome::Kind::Aborted);
}

TEST_CASE("cnf export: exact format for one vertex, two colours") {
    LabeledPatch p;
    p.num_vertices = 1;
    p.label_names = {"s"};
    DominoInstance inst;
    inst.colours = {"1", "2"};
    inst.labels = {"s"};
    CHECK(export_cnf(p, inst) == "p cnf 2 2\n1 2 0\n-1 -2 0\n");
}

TEST_CASE("cnf export: blocking clause makes the empty tileset unsatisfiable") {
    LabeledPatch p;
    p.num_vertices = 2;
    p.label_names = {"s"};
    p.edges.push_back({0, 1, 0});
    DominoInstance inst;
    inst.colours = {"1"};
    inst.labels = {"s"};
    auto text = export_cnf(p, inst);
    CHECK(text.find("1 0\n") != std::string::npos);
    CHECK(text.find("2 0\n") != std::string::npos);
    CHECK(text.find("-1 -2 0\n") != std::string::npos);
    auto f = testutil::parse_cnf(text);
    CHECK(testutil::cnf_count_models(f) == 0);
}

TEST_CASE("cnf export: checkerboard 2x2 has exactly two models") {
    auto p = grid_patch(2, 2);
    auto inst = unequal_instance(2);
    auto f = testutil::parse_cnf(export_cnf(p, inst));
    CHECK(f.nvars == 8);
    CHECK(testutil::cnf_count_models(f) == 2);
}

TEST_CASE("cnf satisfiability tracks the solver on random instances") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 50; ++t) {
        auto patch = testutil::random_patch(rng, 6);
        auto inst = testutil::random_instance(rng, 2, 0.5);
        auto f = testutil::parse_cnf(export_cnf(patch, inst));
        bool cnf_sat = testutil::cnf_satisfiable_via_colorings(f, patch, inst.colours.size());
        auto out = solve_patch(patch, inst, 1'000'000);
        CHECK((out.kind == SolveOutcome::Kind::Satisfiable) == cnf_sat);
    }
}

TEST_CASE("instance json round trip is byte identical") {
    auto inst = unequal_instance(3);
    auto j1 = instance_to_json(inst);
    auto inst2 = instance_from_json(j1);
    CHECK(instance_to_json(inst2) == j1);
}

TEST_CASE("monotone unsatisfiability under patch inclusion") {
    auto inst = unequal_instance(2);
    // 5-cycle inside a larger patch with an extra pendant vertex
    LabeledPatch small;
    small.num_vertices = 5;
    small.label_names = {"s"};
    for (int v = 0; v < 5; ++v) small.edges.push_back({v, (v + 1) % 5, 0});
    LabeledPatch big = small;
    big.num_vertices = 7;
    big.edges.push_back({4, 5, 0});
    big.edges.push_back({5, 6, 0});
    CHECK(solve_patch(small, inst, 100000).kind == SolveOutcome::Kind::Unsatisfiable);
    CHECK(solve_patch(big, inst, 100000).kind == SolveOutcome::Kind::Unsatisfiable);
}
