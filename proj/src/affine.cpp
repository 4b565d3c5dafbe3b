#include "dtile/affine.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

namespace dtile::affine {

using ordered_json = nlohmann::ordered_json;

bool PiecewiseAffineSystem::contains(std::size_t piece, const Vec2Q& v) const {
    const auto& [x0, y0] = squares[piece];
    return v.x >= x0 && v.x <= x0 + 1 && v.y >= y0 && v.y <= y0 + 1;
}

std::vector<std::string> validate_system(const PiecewiseAffineSystem& sys) {
    std::vector<std::string> bad;
    if (sys.squares.empty()) bad.push_back("system has no squares");
    if (sys.squares.size() != sys.maps.size())
        bad.push_back("squares and maps have different lengths");
    for (std::size_t i = 0; i < sys.squares.size(); ++i)
        for (std::size_t j = i + 1; j < sys.squares.size(); ++j) {
            Int dx = abs(sys.squares[i].first - sys.squares[j].first);
            Int dy = abs(sys.squares[i].second - sys.squares[j].second);
            if (dx < 2 && dy < 2)
                bad.push_back("squares " + std::to_string(i + 1) + " and " + std::to_string(j + 1) +
                              " are not disjoint as closed sets");
        }
    return bad;
}

std::optional<ApplyResult> try_apply(const PiecewiseAffineSystem& sys, const Vec2Q& x) {
    for (std::size_t i = 0; i < sys.squares.size(); ++i)
        if (sys.contains(i, x)) return ApplyResult{(int)i + 1, sys.maps[i].apply(x)};
    return std::nullopt;
}

ApplyResult apply_piecewise(const PiecewiseAffineSystem& sys, const Vec2Q& x) {
    auto r = try_apply(sys, x);
    if (!r) throw DomainError("point lies outside the domain U");
    return *r;
}

OrbitResult orbit(const PiecewiseAffineSystem& sys, const Vec2Q& x0, std::int64_t n,
                  std::size_t bit_cap) {
    OrbitResult out;
    out.trajectory.push_back(x0);
    Vec2Q x = x0;
    for (std::int64_t k = 0; k < n; ++k) {
        auto r = try_apply(sys, x);
        if (!r) {
            out.immortal = false;
            out.step = k;  // x_k is the first point outside U
            return out;
        }
        out.pieces.push_back(r->piece);
        x = r->image;
        if (rat_bits(x.x) > bit_cap || rat_bits(x.y) > bit_cap)
            throw ResourceError("orbit denominators exceeded the bit cap at step " +
                                std::to_string(k + 1));
        out.trajectory.push_back(x);
    }
    if (!try_apply(sys, x)) {
        out.immortal = false;
        out.step = n;  // the n-th image already left U
        return out;
    }
    out.immortal = true;
    out.step = n;
    return out;
}

namespace {

// exact orientation: >0 left turn, 0 collinear
int orient(const Vec2Q& a, const Vec2Q& b, const Vec2Q& c) {
    Rat v = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    return v > 0 ? 1 : (v < 0 ? -1 : 0);
}

bool lex_less(const Vec2Q& a, const Vec2Q& b) {
    if (a.x != b.x) return a.x < b.x;
    return a.y < b.y;
}

// canonical convex position list: hull for 2-d, extreme pair for collinear,
// single point for trivial sets
std::vector<Vec2Q> canonical_hull(std::vector<Vec2Q> pts) {
    std::sort(pts.begin(), pts.end(), lex_less);
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() <= 2) return pts;
    bool collinear = true;
    for (std::size_t i = 2; i < pts.size() && collinear; ++i)
        if (orient(pts[0], pts[1], pts[i]) != 0) collinear = false;
    if (collinear) return {pts.front(), pts.back()};  // sorted: extremes are ends
    std::vector<Vec2Q> h;
    // lower
    for (const auto& p : pts) {
        while (h.size() >= 2 && orient(h[h.size() - 2], h.back(), p) <= 0) h.pop_back();
        h.push_back(p);
    }
    // upper
    std::size_t lower = h.size() + 1;
    for (auto it = pts.rbegin() + 1; it != pts.rend(); ++it) {
        while (h.size() >= lower && orient(h[h.size() - 2], h.back(), *it) <= 0) h.pop_back();
        h.push_back(*it);
    }
    h.pop_back();
    return h;
}

// clip a convex position list by a*x + b*y <= c
std::vector<Vec2Q> clip_halfplane(const std::vector<Vec2Q>& pts, const Rat& a, const Rat& b,
                                  const Rat& c) {
    auto val = [&](const Vec2Q& p) -> Rat { return a * p.x + b * p.y - c; };
    if (pts.empty()) return {};
    if (pts.size() == 1) return val(pts[0]) <= 0 ? pts : std::vector<Vec2Q>{};
    std::vector<Vec2Q> out;
    std::size_t n = pts.size();
    bool closed = n >= 3;
    std::size_t limit = closed ? n : n - 1;
    for (std::size_t i = 0; i < limit; ++i) {
        const Vec2Q& p = pts[i];
        const Vec2Q& q = pts[(i + 1) % n];
        Rat vp = val(p), vq = val(q);
        if (vp <= 0) out.push_back(p);
        if ((vp < 0 && vq > 0) || (vp > 0 && vq < 0)) {
            Rat t = vp / (vp - vq);
            out.push_back({p.x + (q.x - p.x) * t, p.y + (q.y - p.y) * t});
        }
    }
    if (!closed && val(pts.back()) <= 0) out.push_back(pts.back());
    return canonical_hull(std::move(out));
}

std::vector<Vec2Q> clip_to_square(std::vector<Vec2Q> pts, const Int& x0, const Int& y0) {
    Rat one(1);
    pts = clip_halfplane(pts, Rat(1), Rat(0), Rat(x0) + one);    //  x <= x0+1
    pts = clip_halfplane(pts, Rat(-1), Rat(0), Rat(-x0));        // -x <= -x0
    pts = clip_halfplane(pts, Rat(0), Rat(1), Rat(y0) + one);    //  y <= y0+1
    pts = clip_halfplane(pts, Rat(0), Rat(-1), Rat(-y0));        // -y <= -y0
    return pts;
}

std::string poly_key(const PolyQ& p) {
    std::string s = std::to_string(p.square) + "|";
    for (const auto& v : p.pts) s += rat_to_string(v.x) + "," + rat_to_string(v.y) + ";";
    return s;
}

}  // namespace

MortalityResult certify_mortal(const PiecewiseAffineSystem& sys, int max_depth,
                               std::size_t polygon_cap) {
    auto bad = validate_system(sys);
    if (!bad.empty()) throw ValidationError("invalid system: " + bad.front());
    MortalityResult res;
    std::vector<PolyQ> region;
    for (std::size_t i = 0; i < sys.squares.size(); ++i) {
        const auto& [x0, y0] = sys.squares[i];
        PolyQ p;
        p.square = (int)i;
        p.pts = canonical_hull({{Rat(x0), Rat(y0)},
                                {Rat(x0) + 1, Rat(y0)},
                                {Rat(x0), Rat(y0) + 1},
                                {Rat(x0) + 1, Rat(y0) + 1}});
        region.push_back(std::move(p));
    }
    res.peak_polygons = region.size();
    for (int depth = 1; depth <= max_depth; ++depth) {
        std::vector<PolyQ> next;
        std::set<std::string> seen;
        for (const PolyQ& p : region) {
            std::vector<Vec2Q> img;
            img.reserve(p.pts.size());
            for (const auto& v : p.pts) img.push_back(sys.maps[p.square].apply(v));
            img = canonical_hull(std::move(img));
            for (std::size_t j = 0; j < sys.squares.size(); ++j) {
                auto piece = clip_to_square(img, sys.squares[j].first, sys.squares[j].second);
                if (piece.empty()) continue;
                PolyQ q;
                q.square = (int)j;
                q.pts = std::move(piece);
                if (seen.insert(poly_key(q)).second) next.push_back(std::move(q));
            }
        }
        res.depth_reached = depth;
        res.peak_polygons = std::max(res.peak_polygons, next.size());
        if (next.empty()) {
            res.mortal = true;
            res.bound = depth;
            return res;
        }
        if (next.size() > polygon_cap) {
            res.reason = "polygon cap exceeded (" + std::to_string(next.size()) + " pieces)";
            return res;
        }
        region = std::move(next);
    }
    res.reason = "depth cap reached with a non-empty region";
    return res;
}

const TuringMachine::Trans* TuringMachine::find(int state, int read) const {
    for (const auto& t : transitions)
        if (t.state == state && t.read == read) return &t;
    return nullptr;
}

void TuringMachine::validate() const {
    if (states.empty()) throw ValidationError("machine has no states");
    if (alphabet.empty() || alphabet.size() > 3)
        throw ValidationError("tape alphabet must have 1..3 symbols");
    std::set<int> seen;
    for (int a : alphabet) {
        if (a < 0 || a > 2) throw ValidationError("alphabet symbols must be ternary digits");
        if (!seen.insert(a).second) throw ValidationError("duplicate alphabet symbol");
    }
    if (!seen.count(0)) throw ValidationError("alphabet must contain the blank symbol 0");
    std::set<std::pair<int, int>> keys;
    for (const auto& t : transitions) {
        if (t.state < 0 || t.state >= (int)states.size() || t.next < 0 ||
            t.next >= (int)states.size())
            throw ValidationError("transition references an unknown state");
        if (!seen.count(t.read) || !seen.count(t.write))
            throw ValidationError("transition references a symbol outside the alphabet");
        if (!keys.insert({t.state, t.read}).second)
            throw ValidationError("duplicate transition for one (state, read) pair");
    }
}

bool tm_step(const TuringMachine& tm, TmConfig& cfg) {
    const auto* t = tm.find(cfg.state, cfg.read());
    if (!t) return false;
    cfg.tape[cfg.head - cfg.lo] = t->write;
    cfg.state = t->next;
    cfg.head += t->right ? 1 : -1;
    return true;
}

int TmEncoding::find_square(int state, bool right_tag, int read) const {
    for (std::size_t i = 0; i < squares.size(); ++i)
        if (squares[i].state == state && squares[i].right_tag == right_tag &&
            squares[i].read == read)
            return (int)i;
    return -1;
}

int TmEncoding::encode_square(int state, int read) const {
    int s = find_square(state, true, read);
    if (s >= 0) return s;
    s = find_square(state, false, read);
    if (s < 0) throw DomainError("no square for this (state, read) pair");
    return s;
}

CompiledTm compile_tm(const TuringMachine& tm) {
    tm.validate();
    // split states by entry direction so the expanding coordinate always
    // carries the next read symbol
    std::vector<std::pair<int, bool>> blocks;  // (state, right_tag)
    for (int s = 0; s < (int)tm.states.size(); ++s) {
        bool in_r = false, in_l = false;
        for (const auto& t : tm.transitions)
            if (t.next == s) (t.right ? in_r : in_l) = true;
        if (!in_r && !in_l) in_r = true;  // never entered: one default block
        if (in_r) blocks.push_back({s, true});
        if (in_l) blocks.push_back({s, false});
    }
    CompiledTm ct;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        auto [s, right_tag] = blocks[b];
        for (int a : tm.alphabet) {
            TmEncoding::Square sq;
            sq.state = s;
            sq.right_tag = right_tag;
            sq.read = a;
            // right-entered blocks stack reads along y, left-entered along x
            sq.x0 = Int(6 * (long)b) + (right_tag ? 0 : 2 * a);
            sq.y0 = right_tag ? Int(2 * a) : Int(0);
            ct.enc.squares.push_back(sq);
            ct.sys.squares.push_back({sq.x0, sq.y0});
        }
    }
    Int max_x = 0;
    for (const auto& sq : ct.enc.squares) max_x = std::max(max_x, sq.x0);
    Rat exit_shift = Rat(max_x) + 4;
    auto block_base = [&](int state, bool right_tag) -> Int {
        for (std::size_t b = 0; b < blocks.size(); ++b)
            if (blocks[b].first == state && blocks[b].second == right_tag)
                return Int(6 * (long)b);
        throw DomainError("missing target block");
    };
    Rat fifth = rat(1, 5), five = rat(5, 1);
    for (const auto& sq : ct.enc.squares) {
        const auto* t = tm.find(sq.state, sq.read);
        if (!t) {
            // halting pair: translate out of U
            ct.sys.maps.push_back(AffineMap(Rat(1), Rat(0), Rat(0), Rat(1), exit_shift, Rat(0)));
            continue;
        }
        Int base = block_base(t->next, t->right);
        Rat w2 = rat(2 * t->write, 5);
        if (t->right) {
            // x' = (x-x0)/5 + 2w/5 + base ; y' = 5(y-y0)
            ct.sys.maps.push_back(AffineMap(fifth, Rat(0), Rat(0), five,
                                            Rat(base) - Rat(sq.x0) / 5 + w2,
                                            -Rat(sq.y0) * 5));
        } else {
            // x' = 5(x-x0) + base ; y' = (y-y0)/5 + 2w/5
            ct.sys.maps.push_back(AffineMap(five, Rat(0), Rat(0), fifth,
                                            Rat(base) - Rat(sq.x0) * 5,
                                            -Rat(sq.y0) / 5 + w2));
        }
    }
    auto bad = validate_system(ct.sys);
    if (!bad.empty()) throw ValidationError("compiled system invalid: " + bad.front());
    return ct;
}

Vec2Q encode_config(const CompiledTm& ct, const TmConfig& cfg) {
    std::int64_t hi = cfg.lo + (std::int64_t)cfg.tape.size();
    if (cfg.head < cfg.lo || cfg.head >= hi) throw DomainError("head outside the tape window");
    int sq = ct.enc.encode_square(cfg.state, cfg.read());
    Rat x(0), y(0), w(1);
    for (std::int64_t k = 1; cfg.head - k >= cfg.lo; ++k) {
        w /= 5;
        x += Rat(2 * cfg.tape[cfg.head - k - cfg.lo]) * w;
    }
    w = 1;
    for (std::int64_t k = 1; cfg.head + k < hi; ++k) {
        w /= 5;
        y += Rat(2 * cfg.tape[cfg.head + k - cfg.lo]) * w;
    }
    return {Rat(ct.enc.squares[sq].x0) + x, Rat(ct.enc.squares[sq].y0) + y};
}

namespace {

std::vector<int> decode_digits(Rat v, std::size_t count) {
    std::vector<int> out;
    for (std::size_t k = 0; k < count; ++k) {
        v *= 5;
        Int d = rat_floor(v / 2);
        out.push_back((int)d.get_si());
        v -= Rat(d) * 2;
    }
    if (v != 0) throw DomainError("point does not decode to a finite tape window");
    return out;
}

}  // namespace

TmConfig decode_config(const CompiledTm& ct, const Vec2Q& pt, std::int64_t lo, std::size_t len,
                       std::int64_t head) {
    int sq = -1;
    for (std::size_t i = 0; i < ct.sys.squares.size(); ++i)
        if (ct.sys.contains(i, pt)) {
            sq = (int)i;
            break;
        }
    if (sq < 0) throw DomainError("point lies outside every square");
    const auto& info = ct.enc.squares[sq];
    TmConfig cfg;
    cfg.lo = lo;
    cfg.head = head;
    cfg.state = info.state;
    cfg.tape.assign(len, 0);
    cfg.tape[head - lo] = info.read;
    auto left = decode_digits(pt.x - Rat(info.x0), (std::size_t)(head - lo));
    for (std::size_t k = 0; k < left.size(); ++k) cfg.tape[head - lo - 1 - k] = left[k];
    auto right = decode_digits(pt.y - Rat(info.y0), len - (std::size_t)(head - lo) - 1);
    for (std::size_t k = 0; k < right.size(); ++k) cfg.tape[head - lo + 1 + k] = right[k];
    return cfg;
}

ConjugacyResult tm_step_conjugacy(const CompiledTm& ct, const TuringMachine& tm,
                                  const TmConfig& cfg) {
    Vec2Q pt = encode_config(ct, cfg);
    TmConfig stepped = cfg;
    bool alive = tm_step(tm, stepped);
    auto img = try_apply(ct.sys, pt);
    if (!alive) return img && try_apply(ct.sys, img->image) ? ConjugacyResult::Mismatch
                                                            : ConjugacyResult::Dies;
    std::int64_t hi = cfg.lo + (std::int64_t)cfg.tape.size();
    if (stepped.head <= cfg.lo || stepped.head >= hi - 1) return ConjugacyResult::Inconclusive;
    if (!img) return ConjugacyResult::Mismatch;
    TmConfig dec = decode_config(ct, img->image, cfg.lo, cfg.tape.size(), stepped.head);
    bool ok = dec.state == stepped.state && dec.tape == stepped.tape && dec.head == stepped.head;
    return ok ? ConjugacyResult::Ok : ConjugacyResult::Mismatch;
}

std::string system_to_json(const PiecewiseAffineSystem& sys) {
    ordered_json j;
    j["squares"] = ordered_json::array();
    for (const auto& [x, y] : sys.squares)
        j["squares"].push_back({x.get_str(), y.get_str()});
    j["maps"] = ordered_json::array();
    for (const auto& m : sys.maps)
        j["maps"].push_back({rat_to_string(m.a11), rat_to_string(m.a12), rat_to_string(m.a21),
                             rat_to_string(m.a22), rat_to_string(m.b1), rat_to_string(m.b2)});
    return j.dump(2);
}

PiecewiseAffineSystem system_from_json(const std::string& text) {
    ordered_json j = ordered_json::parse(text);
    PiecewiseAffineSystem sys;
    for (const auto& s : j.at("squares"))
        sys.squares.push_back({Int(s.at(0).get<std::string>()), Int(s.at(1).get<std::string>())});
    for (const auto& m : j.at("maps")) {
        if (m.size() != 6) throw ValidationError("affine map needs 6 rationals");
        sys.maps.push_back(AffineMap(rat_from_string(m.at(0)), rat_from_string(m.at(1)),
                                     rat_from_string(m.at(2)), rat_from_string(m.at(3)),
                                     rat_from_string(m.at(4)), rat_from_string(m.at(5))));
    }
    return sys;
}

std::string tm_to_json(const TuringMachine& tm) {
    ordered_json j;
    j["states"] = tm.states;
    j["alphabet"] = tm.alphabet;
    j["transitions"] = ordered_json::array();
    for (const auto& t : tm.transitions) {
        ordered_json o;
        o["state"] = tm.states[t.state];
        o["read"] = t.read;
        o["next"] = tm.states[t.next];
        o["write"] = t.write;
        o["move"] = t.right ? "R" : "L";
        j["transitions"].push_back(std::move(o));
    }
    return j.dump(2);
}

TuringMachine tm_from_json(const std::string& text) {
    ordered_json j = ordered_json::parse(text);
    TuringMachine tm;
    tm.states = j.at("states").get<std::vector<std::string>>();
    tm.alphabet = j.at("alphabet").get<std::vector<int>>();
    auto state_id = [&](const std::string& n) {
        for (std::size_t i = 0; i < tm.states.size(); ++i)
            if (tm.states[i] == n) return (int)i;
        throw ValidationError("unknown state '" + n + "'");
    };
    for (const auto& t : j.at("transitions")) {
        std::string mv = t.at("move");
        if (mv != "L" && mv != "R") throw ValidationError("move must be L or R");
        tm.transitions.push_back({state_id(t.at("state")), t.at("read"), state_id(t.at("next")),
                                  t.at("write"), mv == "R"});
    }
    tm.validate();
    return tm;
}

std::string orbit_to_csv(const OrbitResult& r) {
    std::string out = "step,x,y,piece\n";
    for (std::size_t k = 0; k < r.trajectory.size(); ++k) {
        out += std::to_string(k) + "," + rat_to_string(r.trajectory[k].x) + "," +
               rat_to_string(r.trajectory[k].y) + ",";
        out += k < r.pieces.size() ? std::to_string(r.pieces[k]) : std::string("-");
        out += "\n";
    }
    return out;
}

}  // namespace dtile::affine
