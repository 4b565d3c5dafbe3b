#pragma once

#include <climits>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dtile/error.hpp"
#include "dtile/tower.hpp"

namespace dtile::hypgeo {

// Letters index generators; letter ^ 1 is the formal inverse. Lowercase
// letters name generators, uppercase their inverses: a=0, A=1, b=2, B=3, ...
using Word = std::vector<std::int8_t>;

struct Presentation {
    int ngen = 0;  // base generators; letters = 2*ngen
    std::vector<std::string> letter_names;
    std::vector<Word> relators;  // freely and cyclically reduced
    bool verified_c16 = false;
    int max_piece = 0;

    int letters() const { return 2 * ngen; }
    static int inverse(int letter) { return letter ^ 1; }

    // "a b c d" on the first line, one relator word per following line
    static Presentation parse(const std::string& text);
    Word parse_word(const std::string& w) const;
    std::string word_string(const Word& w) const;
};

struct SmallCancellationReport {
    int max_piece = 0;
    std::size_t min_relator = 0;
    bool ok = false;
};

// Enumerates pieces over the symmetrized relator set; marks the presentation
// verified when max piece < min |r| / 6 (vacuously for free presentations).
SmallCancellationReport verify_small_cancellation(Presentation& pres);

// Free reduction plus replacement of >half-relator subwords, to a fixpoint.
Word dehn_reduce(const Presentation& pres, Word w);
bool is_trivial(const Presentation& pres, const Word& w);

struct BallOptions {
    int full_until = INT_MAX;     // layers above skip merge detection
    bool sentinel_outer = false;  // outermost layer kept as norms only
    bool slow_mode = false;       // quadratic pairwise identification (oracle)
    std::int64_t element_cap = 20'000'000;
};

struct CayleyBall {
    Presentation pres;
    int radius = 0;
    int nl = 0;
    int full_until = 0;
    bool sentinel_outer = false;

    static constexpr std::uint32_t kOutside = 0xFFFFFFFFu;
    static constexpr std::uint32_t kOuterNorm = 0xFFFFFFFEu;  // exists, norm == radius

    std::vector<std::uint32_t> adj;   // size() * nl, layer-ordered ids
    std::vector<std::uint8_t> norms;
    std::vector<std::uint64_t> words;        // packed canonical words
    std::vector<std::uint32_t> layer_start;  // layer_start[n] = first id of norm n

    std::size_t size() const { return norms.size(); }
    std::uint32_t neighbor(std::uint32_t id, int letter) const {
        return adj[(std::size_t)id * nl + letter];
    }
    int neighbor_norm(std::uint32_t id, int letter) const;  // -1 if unknown
    Word word_of(std::uint32_t id) const;
    std::string name_of(std::uint32_t id) const;
    std::uint32_t walk(const Word& w) const;  // from the identity; kOutside on failure
    std::uint32_t walk_from(std::uint32_t g, const Word& w) const;
    std::vector<std::size_t> sphere_sizes() const;
    std::uint32_t sphere_begin(int n) const { return layer_start[n]; }
    std::uint32_t sphere_end(int n) const {
        return n + 1 < (int)layer_start.size() ? layer_start[n + 1] : (std::uint32_t)size();
    }
};

// Layered BFS with exact identification: candidate words are Dehn-reduced
// (with one level of equal-length relator rewrites) and merged through a
// rewrite-variant hash. Requires a verified or free presentation; fast mode
// is valid for R <= min |r|, beyond that slow_mode is forced.
CayleyBall ball(const Presentation& pres, int R, BallOptions opts = {});

// Max observed thinness over sampled geodesic triangles; a lower bound
// usable as a working delta.
int estimate_delta(const CayleyBall& b, int max_triples = 500, std::uint64_t seed = 1);

struct ConeAtlas {
    int rho = 0;
    int max_typed_norm = 0;
    std::uint32_t small_count = 0;               // elements with norm <= rho
    std::vector<std::vector<std::int8_t>> type_vectors;
    std::vector<int> type_of;                    // per element id; -1 untyped
    std::vector<int> first_seen;                 // per type
    std::vector<std::vector<int>> transitions;   // [type][letter] -> type / -1
    std::vector<std::vector<char>> extends;      // [type][letter]
    std::vector<std::int8_t> cone_flag;          // 1 infinite, 0 finite, 2 unknown
    std::vector<char> observed;                  // class realized at a typed norm
    bool table_closed = false;

    int types() const { return (int)type_vectors.size(); }
};

// N_g = (norm(g h) - norm(g)) over the rho-ball, partitioned by equality;
// throws when two elements share N-data but disagree on child data.
ConeAtlas cone_types(const CayleyBall& b, int rho);

// Least norm-decreasing generator; undefined at the identity.
std::uint32_t successor(const CayleyBall& b, std::uint32_t g);

struct HorosphereGraph {
    int level = 0;
    int two_delta = 0;
    std::vector<std::uint32_t> verts;  // ascending element ids
    std::vector<std::pair<int, int>> edges;
    std::vector<int> succ;  // index into the level-(n-1) vertex list; -1 at level 0
    std::vector<std::string> labels;
    bool automaton_complete = true;  // no reachable unknown transitions

    int degree_max() const;
};

// Vertices: norm-n elements with infinite cones. Edges: pairs whose geodesic
// rays can fellow-travel within two_delta, decided by cycle reachability in
// the pair automaton over (cone type, cone type, relative element).
HorosphereGraph horosphere_graph(const CayleyBall& b, const ConeAtlas& atlas, int n,
                                 int two_delta);

struct TowerReport {
    struct LevelCheck {
        int level = 0;
        std::size_t vertices = 0, edges = 0;
        bool contraction_ok = true;   // successor maps edges to edges or points
        std::size_t edges_to_point = 0, edges_to_edge = 0;
        int fibre_min = 0, fibre_max = 0;
        bool connected = true;
    };
    std::vector<LevelCheck> levels;
    int contraction_power = -1;  // least L' with the halving inequality on samples
    bool halving_ok = false;
    bool growth_ok = false;      // N_k <= (#S)^{2delta} * ((#S)^{L'})^k
    std::string notes;
};

TowerReport tower_report(const CayleyBall& b, const std::vector<HorosphereGraph>& levels,
                         int two_delta, int cone_type_count, std::uint64_t seed = 1);

// Identity when all relators have even length; otherwise the ball of the
// index-2 even subgroup of G x Z/2, with norms from BFS in the cover.
CayleyBall bipartite_double(const CayleyBall& b);

std::shared_ptr<tower::ExplicitTower> to_tower(const std::vector<HorosphereGraph>& levels);

std::string horosphere_to_dot(const HorosphereGraph& g);
std::string atlas_to_dot(const ConeAtlas& atlas, const Presentation& pres);

}  // namespace dtile::hypgeo
