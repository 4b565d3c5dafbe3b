#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dtile/affine.hpp"
#include "dtile/rational.hpp"
#include "dtile/tileset.hpp"
#include "dtile/tower.hpp"

namespace dtile::witness {

// B_xi(m) = floor((m+1)*xi) - floor(m*xi)
Int beatty(const Rat& xi, const Int& m);

// Per-level decorations of a tower patch. Carries are stored once per
// canonical horizontal edge (enumeration order of the patch) as integer
// numerators over M; c(w,v) = -c(v,w) is implicit.
struct Decoration {
    Int M = 1;
    std::vector<int> instr;  // 0-based instruction per level
    std::vector<std::vector<std::array<long, 2>>> data;
    std::vector<std::vector<std::array<long, 2>>> carries;
    bool has_carries = false;
};

// Beatty decoration of an orbit: d(t,m) = B_{u_n}(m) along every line.
Decoration decorate(const std::vector<std::pair<Vec2Q, int>>& orbit,
                    const affine::PiecewiseAffineSystem& sys, const tower::TowerPatch& patch);

// f_{i(v)}(d(v)) - (d(v_1)+...+d(v_q))/q, exact
Vec2Q defect(const Decoration& dec, const affine::PiecewiseAffineSystem& sys,
             const tower::TowerPatch& patch, int level, std::int64_t id);

struct HallFailure {
    int level = 0;
    bool white_side = true;
    std::vector<std::int64_t> witness_columns;  // set A with more whites than
                                                // black neighbours (or dually)
    Int white_count, black_count;
};

struct MatchOutcome {
    bool ok = false;
    std::vector<std::array<long, 2>> carries;  // per canonical edge of the level
    std::optional<HallFailure> failure;
};

// Builds the bipartite matching graph of the level (white multiplicity
// M*D_x(v)+L, black multiplicity L, edges within one hop), computes a maximum
// matching with augmenting searches capped at `margin` hops, and reads the
// carries off the matching. x and y are matched independently.
MatchOutcome match_carries(const Decoration& dec, const affine::PiecewiseAffineSystem& sys,
                           const tower::TowerPatch& patch, const tileset::TilesetParams& params,
                           int level, long margin);

struct VerifyViolation {
    std::string kind;  // instruction | corner | carry-range | equation
    int level = 0;
    std::int64_t where = 0;  // vertex id or edge index
    std::string detail;
};

struct VerifyReport {
    std::vector<VerifyViolation> violations;
    std::int64_t interior_checked = 0;
};

// Independent re-check of corner membership, carry range, and the affine
// constraint at every interior vertex.
VerifyReport verify_decoration(const tower::TowerPatch& patch,
                               const affine::PiecewiseAffineSystem& sys, const Decoration& dec,
                               const tileset::TilesetParams& params);

struct ExtractLevel {
    Vec2Q avg;
    std::int64_t set_size = 0;
    std::int64_t boundary_edges = 0;
    bool identity_exact = false;  // f(avg_n) == avg_{n+1} + boundary carry term
    Rat residual;                 // ||f(avg_n) - avg_{n+1}||_inf
    Rat residual_bound;           // L * boundary / size
};

// Folner averaging along the pullback family of F0; the exact finite identity
// is checked at every level with children.
std::vector<ExtractLevel> extract_orbit(const tower::TowerSpec& spec,
                                        const tower::TowerPatch& patch, const Decoration& dec,
                                        const tileset::TilesetParams& params,
                                        const affine::PiecewiseAffineSystem& sys,
                                        const tower::VertexSet& F0);

std::string decoration_to_json(const Decoration& dec, const tower::TowerPatch& patch);
// Returns the decoration plus the patch it was defined on (line towers).
std::pair<Decoration, tower::TowerPatch> decoration_from_json(const std::string& text);
std::string verify_report_to_json(const VerifyReport& rep);

}  // namespace dtile::witness
