#include <doctest.h>

#include <random>

#include "dtile/tower.hpp"

using namespace dtile;
using namespace dtile::tower;

TEST_CASE("qary patch grows q-fold per level") {
    auto p = build_patch(TowerSpec::qary(2), 3, 0, 4);
    CHECK(p.level_size(0) == 4);
    CHECK(p.level_size(1) == 8);
    CHECK(p.level_size(2) == 16);
}

TEST_CASE("grid line patch keeps identity contraction") {
    auto p = build_patch(TowerSpec::grid_line(), 5, 0, 10);
    CHECK(p.total_vertices() == 50);
    for (int n = 1; n < 5; ++n)
        for (std::int64_t v = 0; v < p.level_size(n); ++v)
            CHECK(p.coord(n - 1, p.parent[n][v]) == p.coord(n, v));
}

TEST_CASE("ternary parent map uses floor division") {
    auto p = build_patch(TowerSpec::qary(3), 2, 0, 2);
    CHECK(p.levels[1].lo == 0);
    CHECK(p.level_size(1) == 6);
    for (std::int64_t v = 0; v < 6; ++v) {
        std::int64_t m = p.coord(1, v);
        CHECK(p.coord(0, p.parent[1][v]) == m / 3);
        CHECK(p.child_index[1][v] == m % 3);
    }
}

TEST_CASE("negative base ranges stay aligned") {
    auto p = build_patch(TowerSpec::qary(2), 2, -3, 3);
    for (std::int64_t v = 0; v < p.level_size(1); ++v) {
        std::int64_t m = p.coord(1, v);
        std::int64_t want = m >= 0 ? m / 2 : -((-m + 1) / 2);
        CHECK(p.coord(0, p.parent[1][v]) == want);
        CHECK(p.child_index[1][v] == m - 2 * want);
    }
}

TEST_CASE("interior requires the full tower star") {
    auto p = build_patch(TowerSpec::qary(2), 2, 0, 4);
    // level 0: both horizontal neighbors and both children must be present
    CHECK(p.interior[0] == std::vector<char>{0, 1, 1, 0});
    // the top level has no children in the window
    for (auto c : p.interior[1]) CHECK(!c);
}

TEST_CASE("q-regularity holds at interior vertices") {
    for (int q : {1, 2, 3}) {
        auto spec = q == 1 ? TowerSpec::grid_line() : TowerSpec::qary(q);
        auto p = build_patch(spec, 3, 0, 5);
        for (int n = 0; n + 1 < 3; ++n)
            for (std::int64_t v = 0; v < p.level_size(n); ++v)
                if (p.interior[n][v]) CHECK(p.num_children(n, v) == q);
    }
}

TEST_CASE("folner intervals satisfy the k-inequality") {
    auto f = folner_set(TowerSpec::grid_line(), 0, 3);
    CHECK(f.verts.size() == 6);
    CHECK(f.boundary_edges == 2);
    CHECK(3 * f.boundary_edges <= (std::int64_t)f.verts.size());

    auto f2 = folner_set(TowerSpec::qary(2), 0, 10);
    CHECK(f2.verts.size() == 20);
    CHECK(f2.verts.front() == 0);
    CHECK(f2.verts.back() == 19);
}

TEST_CASE("folner width cap raises infeasible") {
    CHECK_THROWS_AS(folner_set(TowerSpec::grid_line(), 0, 8, 10), InfeasibleError);
}

TEST_CASE("pullback multiplies size by q exactly") {
    auto spec = TowerSpec::qary(2);
    auto f = make_vertex_set(spec, 0, {0, 1, 2, 3, 4});
    auto pf = pullback_folner(spec, 1, f);
    CHECK(pf.verts.size() == 10);
    CHECK(pf.verts.front() == 0);
    CHECK(pf.verts.back() == 9);

    auto g = make_vertex_set(TowerSpec::grid_line(), 0, {3, 4, 9});
    auto pg = pullback_folner(TowerSpec::grid_line(), 1, g);
    CHECK(pg.verts == g.verts);
    CHECK(pg.boundary_edges == g.boundary_edges);

    auto spec3 = TowerSpec::qary(3);
    auto h = make_vertex_set(spec3, 0, {2});
    auto ph = pullback_folner(spec3, 1, h);
    CHECK(ph.verts == std::vector<std::int64_t>{6, 7, 8});
    CHECK(ph.boundary_edges == 2);
    CHECK(ph.boundary_edges <= 9 * h.boundary_edges);
}

TEST_CASE("pullback law on random sets") {
    std::mt19937_64 rng(7);
    for (int q : {2, 3}) {
        auto spec = TowerSpec::qary(q);
        std::uniform_int_distribution<int> pos(-30, 30), len(1, 6), parts(1, 3);
        for (int t = 0; t < 25; ++t) {
            std::vector<std::int64_t> vs;
            int np = parts(rng);
            for (int i = 0; i < np; ++i) {
                int a = pos(rng), l = len(rng);
                for (int m = a; m < a + l; ++m) vs.push_back(m);
            }
            auto F = make_vertex_set(spec, 0, vs);
            auto P = pullback_folner(spec, 1, F);
            CHECK(P.verts.size() == (std::size_t)q * F.verts.size());
            CHECK(P.boundary_edges <= (std::int64_t)q * q * F.boundary_edges);
        }
    }
}

TEST_CASE("custom towers validate q-regularity and contraction") {
    auto t = std::make_shared<ExplicitTower>();
    t->q = 2;
    t->levels.resize(2);
    t->levels[0].size = 2;
    t->levels[0].edges = {{0, 1}};
    t->levels[1].size = 4;
    t->levels[1].edges = {{0, 1}, {1, 2}, {2, 3}};
    t->parent.resize(2);
    t->parent[1] = {0, 0, 1, 1};
    CHECK_NOTHROW(TowerSpec::custom(t));

    auto bad = std::make_shared<ExplicitTower>(*t);
    bad->parent[1] = {0, 0, 0, 1};  // vertex 0 has three preimages
    CHECK_THROWS_AS(TowerSpec::custom(bad), ValidationError);

    auto bad2 = std::make_shared<ExplicitTower>(*t);
    bad2->levels[0].edges.clear();  // edge {1,2} upstairs now maps to a non-edge
    CHECK_THROWS_AS(TowerSpec::custom(bad2), ValidationError);
}

TEST_CASE("vertex cap raises a resource error") {
    CHECK_THROWS_AS(build_patch(TowerSpec::qary(3), 14, 0, 100), ResourceError);
}

TEST_CASE("patch json round trip is byte identical") {
    auto p = build_patch(TowerSpec::qary(2), 3, -2, 4);
    auto j1 = patch_to_json(p);
    auto p2 = patch_from_json(j1);
    CHECK(patch_to_json(p2) == j1);
    CHECK(p2.total_vertices() == p.total_vertices());
}

TEST_CASE("dot export lists vertical and horizontal edges") {
    auto p = build_patch(TowerSpec::grid_line(), 2, 0, 3);
    auto dot = patch_to_dot(p);
    CHECK(dot.find("dir=none") != std::string::npos);
    CHECK(dot.find("L1_0 -> L0_0;") != std::string::npos);
}
