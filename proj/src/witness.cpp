#include "dtile/witness.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

namespace dtile::witness {

using ordered_json = nlohmann::ordered_json;
using affine::PiecewiseAffineSystem;
using tileset::TilesetParams;
using tower::TowerPatch;
using tower::TowerSpec;
using tower::VertexSet;

Int beatty(const Rat& xi, const Int& m) {
    return rat_floor(Rat(m + 1) * xi) - rat_floor(Rat(m) * xi);
}

namespace {

std::int64_t line_position(const TowerPatch& patch, int level, std::int64_t id) {
    if (patch.is_line_kind()) return patch.coord(level, id);
    const auto& lp = patch.levels[level].line_pos;
    if (lp.empty())
        throw DomainError("patch level " + std::to_string(level) + " has no line structure");
    return lp[id];
}

}  // namespace

Decoration decorate(const std::vector<std::pair<Vec2Q, int>>& orbit,
                    const PiecewiseAffineSystem& sys, const TowerPatch& patch) {
    if ((int)orbit.size() < patch.height)
        throw DomainError("orbit shorter than the patch height");
    Decoration dec;
    dec.instr.resize(patch.height);
    dec.data.resize(patch.height);
    for (int n = 0; n < patch.height; ++n) {
        auto [u, i] = orbit[n];
        if (i < 0 || i >= (int)sys.size()) throw DomainError("orbit instruction out of range");
        if (!sys.contains(i, u))
            throw DomainError("orbit point at level " + std::to_string(n) +
                              " lies outside its square");
        dec.instr[n] = i;
        dec.data[n].resize(patch.level_size(n));
        for (std::int64_t v = 0; v < patch.level_size(n); ++v) {
            Int m(line_position(patch, n, v));
            dec.data[n][v] = {(long)beatty(u.x, m).get_si(), (long)beatty(u.y, m).get_si()};
        }
    }
    return dec;
}

Vec2Q defect(const Decoration& dec, const PiecewiseAffineSystem& sys, const TowerPatch& patch,
             int level, std::int64_t id) {
    if (level + 1 >= patch.height) throw DomainError("defect needs children one level up");
    const auto& kids = patch.children[level][id];
    if (kids.empty()) throw DomainError("vertex has no children in the patch");
    const auto& d = dec.data[level][id];
    Vec2Q img = sys.maps[dec.instr[level]].apply({rat(d[0]), rat(d[1])});
    Rat sx(0), sy(0);
    for (int c : kids) {
        sx += dec.data[level + 1][c][0];
        sy += dec.data[level + 1][c][1];
    }
    long q = (long)kids.size();
    return {img.x - sx / q, img.y - sy / q};
}

namespace {

// Column-aggregated matching along one line level. White units at column v
// connect to black slots of columns v-1, v, v+1 (complete between groups), so
// the matching state collapses to per-column flows flow[v][t] = units of v
// matched into column v+t-1.
struct LineMatcher {
    std::int64_t W;
    long L;
    long hop_cap;
    std::vector<long> wht;
    std::vector<std::array<long, 3>> flow;
    std::vector<long> used;

    LineMatcher(std::vector<long> whites, long black_cap, long margin)
        : W((std::int64_t)whites.size()), L(black_cap), hop_cap(margin),
          wht(std::move(whites)), flow(W, {0, 0, 0}), used(W, 0) {}

    bool in_range(std::int64_t m) const { return m >= 0 && m < W; }
    long matched_of(std::int64_t v) const { return flow[v][0] + flow[v][1] + flow[v][2]; }
    static int slot(std::int64_t w, std::int64_t b) { return (int)(b - w + 1); }

    // one-unit augmentation from white column v; on failure, the alternating
    // reachable white columns (a Hall-violating set at column granularity)
    bool augment(std::int64_t v, std::vector<std::int64_t>* witness_whites) {
        std::map<std::int64_t, std::int64_t> prev_white_of_black;  // black -> white pushing in
        std::map<std::int64_t, std::int64_t> freed_from;           // white -> black it leaves
        std::set<std::int64_t> seen_white{v};
        std::deque<std::int64_t> queue;
        auto expand = [&](std::int64_t w) {
            for (int t = 0; t < 3; ++t) {
                std::int64_t b = w + t - 1;
                if (!in_range(b) || prev_white_of_black.count(b)) continue;
                if (std::llabs(b - v) > hop_cap) continue;
                prev_white_of_black[b] = w;
                queue.push_back(b);
            }
        };
        expand(v);
        std::int64_t free_black = -1;
        while (!queue.empty()) {
            std::int64_t b = queue.front();
            queue.pop_front();
            if (used[b] < L) {
                free_black = b;
                break;
            }
            for (int t = 0; t < 3; ++t) {
                std::int64_t w = b + 1 - t;  // white column with slot t onto b
                if (!in_range(w) || seen_white.count(w)) continue;
                if (flow[w][slot(w, b)] > 0) {
                    seen_white.insert(w);
                    freed_from[w] = b;
                    expand(w);
                }
            }
        }
        if (free_black < 0) {
            if (witness_whites) witness_whites->assign(seen_white.begin(), seen_white.end());
            return false;
        }
        std::int64_t b = free_black;
        for (;;) {
            std::int64_t w = prev_white_of_black[b];
            flow[w][slot(w, b)]++;
            used[b]++;
            auto it = freed_from.find(w);
            if (it == freed_from.end()) break;  // reached the starting white
            std::int64_t b2 = it->second;
            flow[w][slot(w, b2)]--;
            used[b2]--;
            b = b2;
        }
        return true;
    }

    // Move one unit of black capacity usage into column m by rotating along
    // whites; donors are non-interior blacks. Returns the visited black set
    // on failure.
    bool fill_black(std::int64_t m, const std::vector<char>& interior,
                    std::vector<std::int64_t>* witness_blacks) {
        std::map<std::int64_t, std::pair<std::int64_t, std::int64_t>> prev;  // black -> (white, from_black)
        std::set<std::int64_t> seen{m};
        std::deque<std::int64_t> queue{m};
        std::int64_t donor = -1;
        while (!queue.empty() && donor < 0) {
            std::int64_t b = queue.front();
            queue.pop_front();
            for (int t = 0; t < 3 && donor < 0; ++t) {
                std::int64_t w = b + 1 - t;  // white that could serve b
                if (!in_range(w)) continue;
                if (std::llabs(w - m) > hop_cap) continue;
                for (int t2 = 0; t2 < 3; ++t2) {
                    std::int64_t b2 = w + t2 - 1;
                    if (!in_range(b2) || b2 == b || seen.count(b2)) continue;
                    if (flow[w][t2] == 0) continue;
                    seen.insert(b2);
                    prev[b2] = {w, b};
                    if (!interior[b2]) {
                        donor = b2;
                        break;
                    }
                    queue.push_back(b2);
                }
            }
        }
        if (donor < 0) {
            if (witness_blacks) witness_blacks->assign(seen.begin(), seen.end());
            return false;
        }
        std::int64_t b = donor;
        while (b != m) {
            auto [w, into] = prev[b];
            flow[w][slot(w, b)]--;
            used[b]--;
            flow[w][slot(w, into)]++;
            used[into]++;
            b = into;
        }
        return true;
    }
};

}  // namespace

MatchOutcome match_carries(const Decoration& dec, const PiecewiseAffineSystem& sys,
                           const TowerPatch& patch, const TilesetParams& params, int level,
                           long margin) {
    if (margin < 1) throw ValidationError("margin must be >= 1");
    if (level + 1 >= patch.height) throw DomainError("match_carries needs a level with children");
    if (!patch.is_line_kind())
        throw DomainError("carry matching requires a line-structured level");
    if (Rat(params.L) < Rat(params.M) * params.Dmax)
        throw ValidationError("parameters rejected: L < M*Dmax");
    std::int64_t W = patch.level_size(level);
    long L = (long)params.L.get_si();

    MatchOutcome out;
    out.carries.assign(std::max<std::int64_t>(W - 1, 0), {0, 0});
    for (int coord = 0; coord < 2; ++coord) {
        std::vector<long> whites(W);
        for (std::int64_t v = 0; v < W; ++v) {
            Vec2Q D = defect(dec, sys, patch, level, v);
            Rat scaled = Rat(params.M) * (coord == 0 ? D.x : D.y);
            if (scaled.get_den() != 1)
                throw ValidationError("M does not clear the defect denominator");
            long s = (long)scaled.get_num().get_si();
            if (s + L < 0 || s > L)
                throw ValidationError("defect out of range at column " + std::to_string(v) +
                                      " (decoration is too far from an orbit for these params)");
            whites[v] = s + L;
        }
        LineMatcher mm(whites, L, margin);
        for (std::int64_t v = 0; v < W; ++v) {
            long take = std::min(mm.wht[v], L);
            mm.flow[v][1] = take;
            mm.used[v] = take;
        }
        for (std::int64_t v = 0; v < W; ++v) {
            for (long u = mm.matched_of(v); u < mm.wht[v]; ++u) {
                std::vector<std::int64_t> witness;
                if (mm.augment(v, &witness)) continue;
                if (!patch.interior[level][v]) break;  // margin absorbs boundary surplus
                HallFailure f;
                f.level = level;
                f.white_side = true;
                f.witness_columns = witness;
                f.white_count = 0;
                std::set<std::int64_t> nb;
                for (auto c : witness) {
                    f.white_count += whites[c];
                    for (std::int64_t t = -1; t <= 1; ++t)
                        if (mm.in_range(c + t)) nb.insert(c + t);
                }
                f.black_count = Int((long)nb.size()) * L;
                out.failure = f;
                return out;
            }
        }
        for (std::int64_t m = 0; m < W; ++m) {
            if (!patch.interior[level][m]) continue;
            while (mm.used[m] < L) {
                std::vector<std::int64_t> witness;
                if (mm.fill_black(m, patch.interior[level], &witness)) continue;
                HallFailure f;
                f.level = level;
                f.white_side = false;
                f.witness_columns = witness;
                f.black_count = Int((long)witness.size()) * L;
                f.white_count = 0;
                std::set<std::int64_t> nbw;
                for (auto c : witness)
                    for (std::int64_t t = -1; t <= 1; ++t)
                        if (mm.in_range(c + t)) nbw.insert(c + t);
                for (auto w : nbw) f.white_count += whites[w];
                out.failure = f;
                return out;
            }
        }
        for (std::int64_t v = 0; v < W; ++v) {
            if (patch.interior[level][v] && mm.matched_of(v) != mm.wht[v]) {
                HallFailure f;
                f.level = level;
                f.white_side = true;
                f.witness_columns = {v};
                f.white_count = whites[v];
                f.black_count = 3 * L;
                out.failure = f;
                return out;
            }
        }
        for (std::int64_t v = 0; v + 1 < W; ++v)
            out.carries[v][coord] = mm.flow[v][2] - mm.flow[v + 1][0];
    }
    out.ok = true;
    return out;
}

VerifyReport verify_decoration(const TowerPatch& patch, const PiecewiseAffineSystem& sys,
                               const Decoration& dec, const TilesetParams& params) {
    VerifyReport rep;
    long LM = (long)Int(params.L * params.M).get_si();
    for (int n = 0; n < patch.height; ++n) {
        if (dec.instr[n] < 0 || dec.instr[n] >= (int)sys.size()) {
            rep.violations.push_back({"instruction", n, 0, "instruction out of range"});
            continue;
        }
        const auto& [x0, y0] = sys.squares[dec.instr[n]];
        long xl = (long)x0.get_si(), yl = (long)y0.get_si();
        for (std::int64_t v = 0; v < patch.level_size(n); ++v) {
            auto [dx, dy] = dec.data[n][v];
            if ((dx != xl && dx != xl + 1) || (dy != yl && dy != yl + 1))
                rep.violations.push_back(
                    {"corner", n, v, "data is not a corner of the instruction square"});
        }
        if (dec.has_carries && n < (int)dec.carries.size()) {
            for (std::size_t e = 0; e < dec.carries[n].size(); ++e) {
                auto [cx, cy] = dec.carries[n][e];
                if (std::llabs(cx) > LM || std::llabs(cy) > LM)
                    rep.violations.push_back(
                        {"carry-range", n, (std::int64_t)e, "carry outside [-L, L]"});
            }
        }
    }
    if (!dec.has_carries) return rep;
    for (int n = 0; n + 1 < patch.height; ++n) {
        std::vector<Vec2Q> csum(patch.level_size(n), Vec2Q(Rat(0), Rat(0)));
        std::int64_t e = 0;
        patch.for_each_horizontal_edge(n, [&](int u, int v) {
            Rat cx = Rat(dec.carries[n][e][0]) / Rat(params.M);
            Rat cy = Rat(dec.carries[n][e][1]) / Rat(params.M);
            csum[u].x += cx;
            csum[u].y += cy;
            csum[v].x -= cx;
            csum[v].y -= cy;
            ++e;
        });
        for (std::int64_t v = 0; v < patch.level_size(n); ++v) {
            if (!patch.interior[n][v]) continue;
            rep.interior_checked++;
            Vec2Q D = defect(dec, sys, patch, n, v);
            if (D.x != csum[v].x || D.y != csum[v].y)
                rep.violations.push_back(
                    {"equation", n, v, "affine constraint violated: defect != carry sum"});
        }
    }
    return rep;
}

std::vector<ExtractLevel> extract_orbit(const TowerSpec& spec, const TowerPatch& patch,
                                        const Decoration& dec, const TilesetParams& params,
                                        const PiecewiseAffineSystem& sys, const VertexSet& F0) {
    if (F0.level != 0) throw DomainError("the Folner base set must live at level 0");
    if (!dec.has_carries) throw DomainError("extraction needs carries");
    std::vector<VertexSet> family{F0};
    for (int n = 1; n < patch.height; ++n)
        family.push_back(tower::pullback_folner(spec, n, family.back()));

    std::vector<ExtractLevel> out(patch.height);
    for (int n = 0; n < patch.height; ++n) {
        const auto& F = family[n];
        Rat sx(0), sy(0);
        for (auto m : F.verts) {
            std::int64_t id = patch.is_line_kind() ? m - patch.levels[n].lo : m;
            if (id < 0 || id >= patch.level_size(n))
                throw DomainError("Folner set leaves the patch at level " + std::to_string(n));
            if (n + 1 < patch.height && !patch.interior[n][id])
                throw DomainError("Folner set is not interior-contained at level " +
                                  std::to_string(n));
            sx += dec.data[n][id][0];
            sy += dec.data[n][id][1];
        }
        out[n].set_size = (std::int64_t)F.verts.size();
        out[n].boundary_edges = F.boundary_edges;
        out[n].avg = {sx / (long)F.verts.size(), sy / (long)F.verts.size()};
    }
    for (int n = 0; n + 1 < patch.height; ++n) {
        const auto& F = family[n];
        std::set<std::int64_t> inset(F.verts.begin(), F.verts.end());
        Rat bx(0), by(0);
        std::int64_t e = 0;
        patch.for_each_horizontal_edge(n, [&](int u, int v) {
            std::int64_t cu = patch.is_line_kind() ? patch.coord(n, u) : u;
            std::int64_t cv = patch.is_line_kind() ? patch.coord(n, v) : v;
            bool iu = inset.count(cu) > 0, iv = inset.count(cv) > 0;
            if (iu != iv) {
                Rat cx = Rat(dec.carries[n][e][0]) / Rat(params.M);
                Rat cy = Rat(dec.carries[n][e][1]) / Rat(params.M);
                // stored carry is c(u, v); the sum wants c(inner, outer)
                if (iu) {
                    bx += cx;
                    by += cy;
                } else {
                    bx -= cx;
                    by -= cy;
                }
            }
            ++e;
        });
        Vec2Q lhs = sys.maps[dec.instr[n]].apply(out[n].avg);
        Rat size((long)F.verts.size());
        Vec2Q rhs{out[n + 1].avg.x + bx / size, out[n + 1].avg.y + by / size};
        out[n].identity_exact = (lhs == rhs);
        out[n].residual = linf_norm(lhs - out[n + 1].avg);
        out[n].residual_bound = Rat(params.L) * Rat(Int(F.boundary_edges)) / size;
    }
    if (patch.height >= 1) {
        out[patch.height - 1].identity_exact = true;  // nothing to relate above the top
        out[patch.height - 1].residual = 0;
        out[patch.height - 1].residual_bound = 0;
    }
    return out;
}

std::string decoration_to_json(const Decoration& dec, const TowerPatch& patch) {
    ordered_json j;
    j["tower"] = {{"kind", tower::kind_name(patch.kind)},
                  {"q", patch.q},
                  {"height", patch.height},
                  {"base_lo", patch.levels[0].lo},
                  {"base_hi", patch.levels[0].lo + patch.levels[0].size}};
    j["M"] = dec.M.get_str();
    j["instructions"] = ordered_json::array();
    for (int i : dec.instr) j["instructions"].push_back(i + 1);
    j["data"] = dec.data;
    if (dec.has_carries) {
        j["carries"] = ordered_json::array();
        for (const auto& lvl : dec.carries) {
            ordered_json l = ordered_json::array();
            for (const auto& c : lvl)
                l.push_back({rat_to_string(Rat(c[0]) / Rat(dec.M)),
                             rat_to_string(Rat(c[1]) / Rat(dec.M))});
            j["carries"].push_back(std::move(l));
        }
    }
    return j.dump(2);
}

std::pair<Decoration, TowerPatch> decoration_from_json(const std::string& text) {
    ordered_json j = ordered_json::parse(text);
    const auto& t = j.at("tower");
    std::string kind = t.at("kind");
    if (kind != "grid" && kind != "qary")
        throw ValidationError("decoration JSON supports line towers only");
    TowerSpec spec = kind == "grid" ? TowerSpec::grid_line() : TowerSpec::qary(t.at("q"));
    TowerPatch patch = tower::build_patch(spec, t.at("height"), t.at("base_lo"), t.at("base_hi"));
    Decoration dec;
    dec.M = Int(j.at("M").get<std::string>());
    for (int i : j.at("instructions")) dec.instr.push_back(i - 1);
    dec.data = j.at("data").get<std::vector<std::vector<std::array<long, 2>>>>();
    if (j.contains("carries")) {
        dec.has_carries = true;
        for (const auto& lvl : j.at("carries")) {
            std::vector<std::array<long, 2>> l;
            for (const auto& c : lvl) {
                Rat cx = rat_from_string(c.at(0)) * Rat(dec.M);
                Rat cy = rat_from_string(c.at(1)) * Rat(dec.M);
                if (cx.get_den() != 1 || cy.get_den() != 1)
                    throw ValidationError("carry is not a multiple of 1/M");
                l.push_back({(long)cx.get_num().get_si(), (long)cy.get_num().get_si()});
            }
            dec.carries.push_back(std::move(l));
        }
    }
    return {std::move(dec), std::move(patch)};
}

std::string verify_report_to_json(const VerifyReport& rep) {
    ordered_json j;
    j["interior_checked"] = rep.interior_checked;
    j["violations"] = ordered_json::array();
    for (const auto& v : rep.violations)
        j["violations"].push_back(
            {{"kind", v.kind}, {"level", v.level}, {"where", v.where}, {"detail", v.detail}});
    return j.dump(2);
}

}  // namespace dtile::witness
