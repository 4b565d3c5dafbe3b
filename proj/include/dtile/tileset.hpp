#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dtile/affine.hpp"
#include "dtile/domino.hpp"
#include "dtile/rational.hpp"
#include "dtile/tower.hpp"

namespace dtile::tileset {

struct TilesetParams {
    int q = 1;
    int ell = 0;   // number of instructions
    Int M;         // lcm(q, coefficient denominators)
    Rat Dmax;      // coordinatewise defect bound over corner tuples
    Rat K;         // max linear norm + 2
    Int L;         // carry box radius, >= M*max(K, Dmax) unless overridden
    std::vector<std::array<std::array<long, 2>, 4>> data_corners;  // per instruction

    Int carry_values_per_coord() const { return 2 * L * M + 1; }
    Int carry_set_size() const { return carry_values_per_coord() * carry_values_per_coord(); }
    long lm() const { return (long)(Int(L * M).get_si()); }
};

// The override must still satisfy L >= ceil(M*Dmax) so carries stay representable.
TilesetParams compute_params(const affine::PiecewiseAffineSystem& sys, int q,
                             std::optional<long> L_override = std::nullopt);

// One admissible vertex colour. Carries are integer numerators over M.
struct VertexRecord {
    int instr = 0;        // 0-based
    int child_instr = 0;  // instruction of the level above
    std::array<long, 2> d{};
    std::vector<std::array<long, 2>> child_data;  // q corners
    std::vector<std::array<long, 2>> carries;     // one per horizontal slot
};

struct TilesetConstraints {
    TilesetParams params;
    affine::PiecewiseAffineSystem sys;
    bool line_mode = true;  // two slots: left=0, right=1
    int degree_cap = 2;
    std::vector<VertexRecord> records;  // the finite admissible set
};

inline constexpr std::size_t kDefaultRecordCap = 2'000'000;

// Enumerates the admissible record space; the affine constraint
// f_i(d) = avg(children) + sum(carries) is baked into every record.
TilesetConstraints compile_tileset(const affine::PiecewiseAffineSystem& sys, int q,
                                   std::optional<long> L_override = std::nullopt,
                                   bool line_mode = true, int degree_cap = 2,
                                   std::size_t record_cap = kDefaultRecordCap);

struct SizeReport {
    Int M;
    Rat K;
    Int L;
    Int carry_set_size;
    std::size_t num_colours = 0;
    std::size_t num_triples = 0;
};

// Packs the constraints into a plain domino instance. Labels: "H" for line
// towers (left end of the canonical direction first), "H<k>_<l>_<da>_<db>"
// for general towers, and "V<j>" on child->parent edges.
domino::DominoInstance explicit_dominoes(const TilesetConstraints& tc, SizeReport* report);

std::string size_report_to_json(const SizeReport& r);

// Edge-labeled view of a tower patch using the tileset label conventions.
domino::LabeledPatch to_labeled_patch(const tower::TowerPatch& p, bool line_mode = true,
                                      int degree_cap = 2);

// Independent re-check of one record against the affine constraint.
bool record_satisfies_constraint(const TilesetParams& params,
                                 const affine::PiecewiseAffineSystem& sys,
                                 const VertexRecord& rec);

}  // namespace dtile::tileset
