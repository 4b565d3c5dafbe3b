#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dtile/error.hpp"

namespace dtile::domino {

// Colours A, edge labels S, allowed triples Theta <= A x S x A.
struct DominoInstance {
    std::vector<std::string> colours;
    std::vector<std::string> labels;
    std::vector<std::array<int, 3>> allowed;  // (colour id, label id, colour id)

    int colour_id(const std::string& name) const;
    int label_id(const std::string& name) const;
    void validate() const;
};

// A finite edge-labeled graph with directed labeled edges. Undirected
// horizontal edges are stored once in their canonical direction.
struct LabeledPatch {
    struct Edge {
        std::int64_t from, to;
        int label;  // index into label_names
    };
    std::int64_t num_vertices = 0;
    std::vector<Edge> edges;
    std::vector<std::string> label_names;
};

using Coloring = std::vector<int>;  // colour id per vertex, total

// Returns the indices of edges whose triple is not allowed.
std::vector<std::int64_t> check_coloring(const LabeledPatch& patch, const DominoInstance& inst,
                                         const Coloring& coloring);

struct SolveOutcome {
    enum class Kind { Satisfiable, Unsatisfiable, Aborted };
    Kind kind = Kind::Aborted;
    Coloring coloring;            // valid iff Satisfiable
    std::uint64_t explored = 0;   // value trials
    std::uint64_t budget = 0;
};

// Backtracking with arc-consistency propagation, fixed branching order
// (lowest vertex id, then colour id). Deterministic node counts.
SolveOutcome solve_patch(const LabeledPatch& patch, const DominoInstance& inst,
                         std::uint64_t budget);

// DIMACS CNF. Variable x_{v,a} has index v*|A| + a + 1 in vertex-major order.
std::string export_cnf(const LabeledPatch& patch, const DominoInstance& inst);

std::string instance_to_json(const DominoInstance& inst);
DominoInstance instance_from_json(const std::string& text);

std::string colored_patch_to_dot(const LabeledPatch& patch, const DominoInstance& inst,
                                 const Coloring& coloring);

}  // namespace dtile::domino
