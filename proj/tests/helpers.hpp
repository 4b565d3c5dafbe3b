#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dtile/affine.hpp"
#include "dtile/domino.hpp"
#include "dtile/tileset.hpp"
#include "dtile/tower.hpp"

namespace testutil {

using namespace dtile;

// exhaustive oracle: try all |A|^n colorings
inline bool brute_force_satisfiable(const domino::LabeledPatch& patch,
                                    const domino::DominoInstance& inst) {
    std::size_t nc = inst.colours.size();
    std::vector<int> col(patch.num_vertices, 0);
    for (;;) {
        if (domino::check_coloring(patch, inst, col).empty()) return true;
        std::size_t i = 0;
        while (i < col.size()) {
            if (++col[i] < (int)nc) break;
            col[i++] = 0;
        }
        if (i == col.size()) return false;
    }
}

// model count of a DIMACS formula over all assignments of its variables
// restricted to <= 24 vars; clauses parsed from the exported text
struct Cnf {
    int nvars = 0;
    std::vector<std::vector<int>> clauses;
};

inline Cnf parse_cnf(const std::string& text) {
    Cnf f;
    std::istringstream in(text);
    std::string p, kind;
    int nc;
    in >> p >> kind >> f.nvars >> nc;
    std::vector<int> cl;
    int lit;
    while (in >> lit) {
        if (lit == 0) {
            f.clauses.push_back(cl);
            cl.clear();
        } else {
            cl.push_back(lit);
        }
    }
    return f;
}

inline bool cnf_eval(const Cnf& f, std::uint64_t assignment) {
    for (const auto& cl : f.clauses) {
        bool sat = false;
        for (int lit : cl) {
            int v = std::abs(lit) - 1;
            bool val = (assignment >> v) & 1;
            if (lit > 0 ? val : !val) {
                sat = true;
                break;
            }
        }
        if (!sat) return false;
    }
    return true;
}

inline std::uint64_t cnf_count_models(const Cnf& f) {
    std::uint64_t count = 0;
    for (std::uint64_t a = 0; a < (1ull << f.nvars); ++a)
        if (cnf_eval(f, a)) ++count;
    return count;
}

inline bool cnf_satisfiable_via_colorings(const Cnf& f, const domino::LabeledPatch& patch,
                                          std::size_t ncolours) {
    // colorings are exactly the assignments respecting the exactly-one rows
    std::vector<int> col(patch.num_vertices, 0);
    for (;;) {
        std::uint64_t a = 0;
        for (std::size_t v = 0; v < col.size(); ++v) a |= 1ull << (v * ncolours + col[v]);
        if (cnf_eval(f, a)) return true;
        std::size_t i = 0;
        while (i < col.size()) {
            if (++col[i] < (int)ncolours) break;
            col[i++] = 0;
        }
        if (i == col.size()) return false;
    }
}

// random edge-labeled patch for solver fuzzing
inline domino::LabeledPatch random_patch(std::mt19937_64& rng, int max_vertices) {
    domino::LabeledPatch p;
    std::uniform_int_distribution<int> nv(1, max_vertices);
    p.num_vertices = nv(rng);
    p.label_names = {"s", "t"};
    std::uniform_int_distribution<int> ne(0, (int)(2 * p.num_vertices));
    std::uniform_int_distribution<std::int64_t> pick(0, p.num_vertices - 1);
    std::uniform_int_distribution<int> lab(0, 1);
    int edges = ne(rng);
    for (int e = 0; e < edges; ++e) {
        std::int64_t a = pick(rng), b = pick(rng);
        if (a == b) continue;
        p.edges.push_back({a, b, lab(rng)});
    }
    return p;
}

inline domino::DominoInstance random_instance(std::mt19937_64& rng, int ncolours,
                                              double density) {
    domino::DominoInstance inst;
    for (int c = 0; c < ncolours; ++c) inst.colours.push_back(std::to_string(c));
    inst.labels = {"s", "t"};
    std::bernoulli_distribution keep(density);
    for (int a = 0; a < ncolours; ++a)
        for (int l = 0; l < 2; ++l)
            for (int b = 0; b < ncolours; ++b)
                if (keep(rng)) inst.allowed.push_back({a, l, b});
    return inst;
}

// a random system built around a rational periodic orbit of the given period
struct PeriodicSystem {
    affine::PiecewiseAffineSystem sys;
    std::vector<std::pair<Vec2Q, int>> orbit;  // one period, (point, 0-based piece)
};

inline PeriodicSystem make_periodic_system(std::mt19937_64& rng, int period) {
    PeriodicSystem out;
    std::uniform_int_distribution<int> den_pick(1, 3);
    std::uniform_int_distribution<int> mat_pick(0, 3);
    std::vector<Vec2Q> pts;
    for (int k = 0; k < period; ++k) {
        out.sys.squares.push_back({Int(2 * k), Int(0)});
        int d = den_pick(rng);
        std::uniform_int_distribution<int> num(0, d);
        pts.push_back({rat(2 * k) + rat(num(rng), d), rat(num(rng), d)});
    }
    for (int k = 0; k < period; ++k) {
        AffineMap m;
        switch (mat_pick(rng)) {
            case 0: m = AffineMap(rat(1), rat(0), rat(0), rat(1), rat(0), rat(0)); break;
            case 1: m = AffineMap(rat(0), rat(1), rat(1), rat(0), rat(0), rat(0)); break;
            case 2: m = AffineMap(rat(1), rat(1), rat(0), rat(1), rat(0), rat(0)); break;
            case 3: m = AffineMap(rat(1), rat(0), rat(0), rat(-1), rat(0), rat(0)); break;
        }
        const Vec2Q& u = pts[k];
        const Vec2Q& v = pts[(k + 1) % period];
        Vec2Q img = m.apply(u);
        m.b1 = v.x - img.x;
        m.b2 = v.y - img.y;
        out.sys.maps.push_back(m);
        out.orbit.push_back({u, k});
    }
    return out;
}

inline std::vector<std::pair<Vec2Q, int>> extend_orbit(const PeriodicSystem& ps, int len) {
    std::vector<std::pair<Vec2Q, int>> out;
    for (int n = 0; n < len; ++n) out.push_back(ps.orbit[n % ps.orbit.size()]);
    return out;
}

// independent CSP search straight over the tileset records (no domino
// packing); level-major order with forward checking against record lists
inline bool direct_tileset_satisfiable(const tileset::TilesetConstraints& tc,
                                       const tower::TowerPatch& patch,
                                       std::uint64_t node_cap = 50'000'000) {
    const auto& recs = tc.records;
    struct V {
        int level;
        std::int64_t id;
    };
    std::vector<V> order;
    for (int n = 0; n < patch.height; ++n)
        for (std::int64_t i = 0; i < patch.level_size(n); ++i) order.push_back({n, i});

    auto h_compatible = [&](const tileset::VertexRecord& a, const tileset::VertexRecord& b) {
        return a.instr == b.instr && a.child_instr == b.child_instr &&
               a.carries[1][0] == -b.carries[0][0] && a.carries[1][1] == -b.carries[0][1];
    };
    auto v_compatible = [&](const tileset::VertexRecord& parent,
                            const tileset::VertexRecord& child, int slot) {
        return parent.child_data[slot] == child.d && parent.child_instr == child.instr;
    };

    std::vector<std::vector<std::vector<int>>> domain(patch.height);
    std::vector<int> all(recs.size());
    for (std::size_t r = 0; r < recs.size(); ++r) all[r] = (int)r;
    for (int n = 0; n < patch.height; ++n)
        domain[n].assign(patch.level_size(n), all);
    std::uint64_t nodes = 0;

    std::function<bool(std::size_t)> go = [&](std::size_t k) -> bool {
        if (k == order.size()) return true;
        auto [n, id] = order[k];
        std::vector<int> candidates = domain[n][id];
        for (int r : candidates) {
            if (++nodes > node_cap) throw ResourceError("direct CSP node cap exceeded");
            const auto& rec = recs[r];
            // forward-filter the not-yet-assigned neighbors
            bool wiped = false;
            std::vector<std::pair<std::pair<int, std::int64_t>, std::vector<int>>> saved;
            auto filter = [&](int ln, std::int64_t lid, auto&& pred) {
                if (wiped) return;
                auto& dom = domain[ln][lid];
                std::vector<int> kept;
                for (int x : dom)
                    if (pred(recs[x])) kept.push_back(x);
                if (kept.size() != dom.size()) {
                    saved.push_back({{ln, lid}, dom});
                    dom = std::move(kept);
                    if (dom.empty()) wiped = true;
                }
            };
            if (id + 1 < patch.level_size(n))
                filter(n, id + 1,
                       [&](const tileset::VertexRecord& x) { return h_compatible(rec, x); });
            if (!wiped && n + 1 < patch.height)
                for (int c : patch.children[n][id]) {
                    int slot = patch.child_index[n + 1][c];
                    filter(n + 1, c, [&](const tileset::VertexRecord& x) {
                        return v_compatible(rec, x, slot);
                    });
                    if (wiped) break;
                }
            if (!wiped) {
                domain[n][id] = {r};
                if (go(k + 1)) return true;
                domain[n][id] = candidates;
            }
            for (auto& [where, dom] : saved) domain[where.first][where.second] = std::move(dom);
        }
        return false;
    };
    return go(0);
}

}  // namespace testutil
