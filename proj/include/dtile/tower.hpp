#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dtile/error.hpp"

namespace dtile::tower {

enum class TowerKind { GridLine, QAry, Horosphere, Custom };

std::string kind_name(TowerKind k);

// One level graph of an explicitly given tower. Vertices are 0..size-1.
struct LevelGraphData {
    std::int64_t size = 0;
    std::vector<std::pair<int, int>> edges;  // horizontal, stored with u < v
    std::vector<std::string> labels;         // optional display names
    std::vector<int> line_id;                // optional line structure; empty = none
    std::vector<std::int64_t> line_pos;
};

// A fully materialized tower (horosphere towers, custom test towers).
// parent[n][v] is the image of level-n vertex v under pi_n, for n >= 1.
struct ExplicitTower {
    int q = 0;  // 0 = not q-regular (raw horosphere towers)
    std::vector<LevelGraphData> levels;
    std::vector<std::vector<int>> parent;
};

struct TowerSpec {
    TowerKind kind = TowerKind::GridLine;
    int q = 1;
    std::shared_ptr<const ExplicitTower> data;  // Horosphere/Custom only

    static TowerSpec grid_line();
    static TowerSpec qary(int q);
    static TowerSpec horosphere(std::shared_ptr<const ExplicitTower> t);
    // Validates q-regularity and the contraction property; throws ValidationError.
    static TowerSpec custom(std::shared_ptr<const ExplicitTower> t);

    bool is_line_kind() const { return kind == TowerKind::GridLine || kind == TowerKind::QAry; }
};

// A finite window of a tower. Level-n vertices are local ids 0..size-1; for
// line kinds, id i at level n is the integer coordinate lo + i of that line.
struct TowerPatch {
    struct Level {
        std::int64_t lo = 0;  // line kinds only
        std::int64_t size = 0;
        std::vector<std::pair<int, int>> edges;  // explicit kinds only (u < v)
        std::vector<std::vector<int>> adj;       // explicit kinds only
        std::vector<std::string> labels;
        std::vector<int> line_id;
        std::vector<std::int64_t> line_pos;
    };

    TowerKind kind = TowerKind::GridLine;
    int q = 1;
    int height = 0;
    std::vector<Level> levels;
    // vertical structure, n >= 1: parent/child_index per vertex of level n
    std::vector<std::vector<int>> parent;
    std::vector<std::vector<int>> child_index;
    std::vector<std::vector<std::vector<int>>> children;  // children[n][v]: level n+1 ids
    std::vector<std::vector<char>> interior;

    bool is_line_kind() const { return kind == TowerKind::GridLine || kind == TowerKind::QAry; }
    std::int64_t level_size(int n) const { return levels[n].size; }
    std::int64_t total_vertices() const;
    // flattened level-major vertex index, the canonical solver/CNF order
    std::int64_t vertex_index(int level, std::int64_t id) const;
    std::int64_t coord(int level, std::int64_t id) const { return levels[level].lo + id; }

    void for_each_horizontal_edge(int level,
                                  const std::function<void(int, int)>& fn) const;
    std::vector<int> horizontal_neighbors(int level, int id) const;
    int num_children(int level, std::int64_t id) const;
};

inline constexpr std::int64_t kDefaultPatchVertexCap = 10'000'000;

TowerPatch build_patch(const TowerSpec& spec, int height, std::int64_t base_lo,
                       std::int64_t base_hi,
                       std::int64_t vertex_cap = kDefaultPatchVertexCap);

// A finite vertex set within one level graph, with its boundary (edges of the
// level graph having exactly one endpoint inside) and neighbourhood cached.
// For line kinds the ambient graph is the full line Z.
struct VertexSet {
    int level = 0;
    std::vector<std::int64_t> verts;  // sorted, unique; line kinds: coordinates
    std::int64_t boundary_edges = 0;
    std::vector<std::int64_t> neighbourhood;  // sorted, contains verts
};

VertexSet make_vertex_set(const TowerSpec& spec, int level, std::vector<std::int64_t> verts);

// Smallest-by-construction Folner set with k*#boundary <= #size.
// max_width caps the allowed set size; infeasible error if unreachable.
VertexSet folner_set(const TowerSpec& spec, int level, int k,
                     std::int64_t max_width = -1);

// Exact preimage of F (at level-1) under pi_level.
VertexSet pullback_folner(const TowerSpec& spec, int level, const VertexSet& F);

std::string patch_to_json(const TowerPatch& p);
TowerPatch patch_from_json(const std::string& text);
std::string patch_to_dot(const TowerPatch& p);

}  // namespace dtile::tower
