#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dtile/rational.hpp"

namespace dtile::affine {

// Disjoint closed unit squares [x_i,x_i+1] x [y_i,y_i+1] with integral
// corners, one affine map per square.
struct PiecewiseAffineSystem {
    std::vector<std::pair<Int, Int>> squares;  // lower-left corners
    std::vector<AffineMap> maps;

    std::size_t size() const { return squares.size(); }
    bool contains(std::size_t piece, const Vec2Q& v) const;
};

// Empty list means the system is well formed.
std::vector<std::string> validate_system(const PiecewiseAffineSystem& sys);

struct ApplyResult {
    int piece;  // 1-based
    Vec2Q image;
};

// nullopt when x lies outside U; that is how orbits die.
std::optional<ApplyResult> try_apply(const PiecewiseAffineSystem& sys, const Vec2Q& x);
ApplyResult apply_piecewise(const PiecewiseAffineSystem& sys, const Vec2Q& x);  // throws DomainError

struct OrbitResult {
    bool immortal = false;
    std::int64_t step = 0;            // n if immortal, first index outside U otherwise
    std::vector<Vec2Q> trajectory;    // x_0 .. x_step
    std::vector<int> pieces;          // piece of x_k for k < steps taken (1-based)
};

inline constexpr std::size_t kDefaultBitCap = 4096;

OrbitResult orbit(const PiecewiseAffineSystem& sys, const Vec2Q& x0, std::int64_t n,
                  std::size_t bit_cap = kDefaultBitCap);

// Exact convex region, possibly degenerate (segment or point).
struct PolyQ {
    std::vector<Vec2Q> pts;  // canonical: hull order, lexicographic least first
    int square = -1;         // 0-based piece containing the region
};

struct MortalityResult {
    bool mortal = false;
    int bound = 0;          // every orbit dies within this many steps (when mortal)
    int depth_reached = 0;
    std::size_t peak_polygons = 0;
    std::string reason;     // for Unknown outcomes
};

// Iterates X_0 = U, X_{k+1} = f(X_k) ∩ U exactly; measure-zero slabs are kept
// since the squares are closed.
MortalityResult certify_mortal(const PiecewiseAffineSystem& sys, int max_depth,
                               std::size_t polygon_cap);

struct TuringMachine {
    struct Trans {
        int state, read, next, write;
        bool right;
    };
    std::vector<std::string> states;
    std::vector<int> alphabet;  // ternary digits; must contain the blank 0
    std::vector<Trans> transitions;

    const Trans* find(int state, int read) const;
    void validate() const;
};

struct TmConfig {
    std::vector<int> tape;  // window contents
    std::int64_t lo = 0;    // coordinate of tape[0]
    std::int64_t head = 0;
    int state = 0;

    int read() const { return tape[head - lo]; }
};

// One machine step; false when the transition is undefined (halt).
bool tm_step(const TuringMachine& tm, TmConfig& cfg);

struct TmEncoding {
    struct Square {
        int state;
        bool right_tag;  // block stacked for right-entry (reads on y) or left-entry (x)
        int read;
        Int x0, y0;
    };
    std::vector<Square> squares;

    int find_square(int state, bool right_tag, int read) const;  // -1 if absent
    int encode_square(int state, int read) const;                // deterministic tag choice
};

struct CompiledTm {
    PiecewiseAffineSystem sys;
    TmEncoding enc;
};

// Kari-style encoding: tape halves as base-5 expansions with digit weight 2,
// one square per (direction-tagged state, read symbol).
CompiledTm compile_tm(const TuringMachine& tm);

Vec2Q encode_config(const CompiledTm& ct, const TmConfig& cfg);
// Inverts encode_config given the window geometry.
TmConfig decode_config(const CompiledTm& ct, const Vec2Q& pt, std::int64_t lo, std::size_t len,
                       std::int64_t head);

enum class ConjugacyResult { Ok, Dies, Mismatch, Inconclusive };

// decode(f(encode(cfg))) == tm_step(cfg), exactly; Dies reports a halting
// configuration whose encoded point leaves U.
ConjugacyResult tm_step_conjugacy(const CompiledTm& ct, const TuringMachine& tm,
                                  const TmConfig& cfg);

std::string system_to_json(const PiecewiseAffineSystem& sys);
PiecewiseAffineSystem system_from_json(const std::string& text);
std::string tm_to_json(const TuringMachine& tm);
TuringMachine tm_from_json(const std::string& text);
std::string orbit_to_csv(const OrbitResult& r);

}  // namespace dtile::affine
