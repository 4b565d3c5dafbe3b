#include "dtile/tileset.hpp"

#include <algorithm>
#include <functional>
#include <map>

#include <nlohmann/json.hpp>

namespace dtile::tileset {

using ordered_json = nlohmann::ordered_json;
using affine::PiecewiseAffineSystem;

TilesetParams compute_params(const PiecewiseAffineSystem& sys, int q,
                             std::optional<long> L_override) {
    auto bad = affine::validate_system(sys);
    if (!bad.empty()) throw ValidationError("invalid system: " + bad.front());
    if (q < 1) throw ValidationError("tower arity q must be >= 1");
    TilesetParams p;
    p.q = q;
    p.ell = (int)sys.size();
    p.M = q;
    for (const auto& m : sys.maps) {
        Int d = map_denominator_lcm(m);
        mpz_lcm(p.M.get_mpz_t(), p.M.get_mpz_t(), d.get_mpz_t());
    }
    for (const auto& [x, y] : sys.squares) {
        long xl = x.get_si(), yl = y.get_si();
        p.data_corners.push_back({{{xl, yl}, {xl + 1, yl}, {xl, yl + 1}, {xl + 1, yl + 1}}});
    }
    // Dmax: the child average ranges over [x_j, x_j+1] (times y) in steps of
    // 1/q, so per coordinate the extremes are at the square's two corners.
    p.Dmax = 0;
    for (std::size_t i = 0; i < sys.size(); ++i)
        for (const auto& c : p.data_corners[i]) {
            Vec2Q img = sys.maps[i].apply({rat(c[0]), rat(c[1])});
            for (std::size_t j = 0; j < sys.size(); ++j) {
                const auto& [xj, yj] = sys.squares[j];
                std::array<Rat, 2> txs{Rat(xj), Rat(xj) + 1};
                std::array<Rat, 2> tys{Rat(yj), Rat(yj) + 1};
                for (const Rat& tx : txs)
                    for (const Rat& ty : tys) {
                        Rat dv = linf_norm({img.x - tx, img.y - ty});
                        if (dv > p.Dmax) p.Dmax = dv;
                    }
            }
        }
    p.K = 0;
    for (const auto& m : sys.maps) {
        Rat n = m.linear_inf_norm();
        if (n > p.K) p.K = n;
    }
    p.K += 2;
    Rat lmax = p.Dmax > p.K ? p.Dmax : p.K;
    p.L = rat_ceil(Rat(p.M) * lmax);
    if (L_override) {
        Int lmin = rat_ceil(Rat(p.M) * p.Dmax);
        if (Int(*L_override) < lmin)
            throw ValidationError("L override below the minimum legal value " + lmin.get_str());
        p.L = *L_override;
    }
    return p;
}

namespace {

// integer target t = M*(f_i(d) - sum(child)/q), exact
std::array<long, 2> integer_target(const TilesetParams& p, const PiecewiseAffineSystem& sys,
                                   int instr, const std::array<long, 2>& d,
                                   const std::vector<std::array<long, 2>>& child) {
    Vec2Q img = sys.maps[instr].apply({rat(d[0]), rat(d[1])});
    Rat sx(0), sy(0);
    for (const auto& c : child) {
        sx += c[0];
        sy += c[1];
    }
    Rat tx = Rat(p.M) * (img.x - sx / p.q);
    Rat ty = Rat(p.M) * (img.y - sy / p.q);
    if (tx.get_den() != 1 || ty.get_den() != 1)
        throw ValidationError("M is not a common denominator of the constraint");
    return {(long)tx.get_num().get_si(), (long)ty.get_num().get_si()};
}

// all length-n integer tuples with the given sum, entries in [-lm, lm]
void enumerate_sums(int n, long sum, long lm, std::vector<long>& cur,
                    const std::function<void(const std::vector<long>&)>& emit) {
    if (n == 1) {
        if (sum >= -lm && sum <= lm) {
            cur.push_back(sum);
            emit(cur);
            cur.pop_back();
        }
        return;
    }
    long rest_min = -(long)(n - 1) * lm, rest_max = (long)(n - 1) * lm;
    long lo = std::max(-lm, sum - rest_max), hi = std::min(lm, sum - rest_min);
    for (long v = lo; v <= hi; ++v) {
        cur.push_back(v);
        enumerate_sums(n - 1, sum - v, lm, cur, emit);
        cur.pop_back();
    }
}

std::uint64_t count_sums(int n, long sum, long lm) {
    if (n == 1) return (sum >= -lm && sum <= lm) ? 1 : 0;
    std::uint64_t total = 0;
    long rest_min = -(long)(n - 1) * lm, rest_max = (long)(n - 1) * lm;
    long lo = std::max(-lm, sum - rest_max), hi = std::min(lm, sum - rest_min);
    for (long v = lo; v <= hi; ++v) total += count_sums(n - 1, sum - v, lm);
    return total;
}

}  // namespace

TilesetConstraints compile_tileset(const PiecewiseAffineSystem& sys, int q,
                                   std::optional<long> L_override, bool line_mode, int degree_cap,
                                   std::size_t record_cap) {
    TilesetConstraints tc;
    tc.params = compute_params(sys, q, L_override);
    tc.sys = sys;
    tc.line_mode = line_mode;
    tc.degree_cap = line_mode ? 2 : degree_cap;
    long lm = tc.params.lm();
    int ell = tc.params.ell;

    std::vector<int> degrees;
    if (line_mode)
        degrees = {2};
    else
        for (int d = 1; d <= degree_cap; ++d) degrees.push_back(d);

    // count first so the cap error can report the bound
    std::uint64_t total = 0;
    std::vector<std::vector<std::array<long, 2>>> child_tuples;
    {
        std::vector<std::array<long, 2>> cur;
        std::function<void(int, int)> rec = [&](int j, int instr) {
            if (j == q) {
                child_tuples.push_back(cur);
                return;
            }
            for (const auto& c : tc.params.data_corners[instr]) {
                cur.push_back(c);
                rec(j + 1, instr);
                cur.pop_back();
            }
        };
        // tuples depend only on the child instruction
        for (int i2 = 0; i2 < ell; ++i2) rec(0, i2);
    }
    std::size_t tuples_per_instr = child_tuples.size() / ell;
    for (int i = 0; i < ell; ++i)
        for (const auto& dc : tc.params.data_corners[i])
            for (int i2 = 0; i2 < ell; ++i2)
                for (std::size_t tj = 0; tj < tuples_per_instr; ++tj) {
                    auto t = integer_target(tc.params, sys, i, dc,
                                            child_tuples[i2 * tuples_per_instr + tj]);
                    for (int deg : degrees)
                        total += count_sums(deg, t[0], lm) * count_sums(deg, t[1], lm);
                }
    if (total > record_cap)
        throw ResourceError("admissible record space has " + std::to_string(total) +
                            " colours, cap is " + std::to_string(record_cap));

    for (int i = 0; i < ell; ++i)
        for (const auto& dc : tc.params.data_corners[i])
            for (int i2 = 0; i2 < ell; ++i2)
                for (std::size_t tj = 0; tj < tuples_per_instr; ++tj) {
                    const auto& child = child_tuples[i2 * tuples_per_instr + tj];
                    auto t = integer_target(tc.params, sys, i, dc, child);
                    for (int deg : degrees) {
                        std::vector<long> xs, ys;
                        std::vector<std::vector<long>> xcombos, ycombos;
                        enumerate_sums(deg, t[0], lm, xs,
                                       [&](const std::vector<long>& v) { xcombos.push_back(v); });
                        enumerate_sums(deg, t[1], lm, ys,
                                       [&](const std::vector<long>& v) { ycombos.push_back(v); });
                        for (const auto& cx : xcombos)
                            for (const auto& cy : ycombos) {
                                VertexRecord r;
                                r.instr = i;
                                r.child_instr = i2;
                                r.d = dc;
                                r.child_data = child;
                                r.carries.resize(deg);
                                for (int s = 0; s < deg; ++s) r.carries[s] = {cx[s], cy[s]};
                                tc.records.push_back(std::move(r));
                            }
                    }
                }
    return tc;
}

bool record_satisfies_constraint(const TilesetParams& params, const PiecewiseAffineSystem& sys,
                                 const VertexRecord& rec) {
    Vec2Q img = sys.maps[rec.instr].apply({rat(rec.d[0]), rat(rec.d[1])});
    Rat sx(0), sy(0);
    for (const auto& c : rec.child_data) {
        sx += c[0];
        sy += c[1];
    }
    Rat cx(0), cy(0);
    for (const auto& c : rec.carries) {
        cx += Rat(c[0]) / Rat(params.M);
        cy += Rat(c[1]) / Rat(params.M);
    }
    return img.x == sx / params.q + cx && img.y == sy / params.q + cy;
}

domino::DominoInstance explicit_dominoes(const TilesetConstraints& tc, SizeReport* report) {
    domino::DominoInstance inst;
    const auto& recs = tc.records;
    inst.colours.reserve(recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) inst.colours.push_back("c" + std::to_string(i));

    std::vector<int> label_of_slotpair;  // line mode: single "H"
    int q = tc.params.q;
    if (tc.line_mode) {
        inst.labels.push_back("H");
    } else {
        for (int k = 0; k < tc.degree_cap; ++k)
            for (int l = 0; l < tc.degree_cap; ++l)
                for (int da = k + 1; da <= tc.degree_cap; ++da)
                    for (int db = l + 1; db <= tc.degree_cap; ++db)
                        inst.labels.push_back("H" + std::to_string(k) + "_" + std::to_string(l) +
                                              "_" + std::to_string(da) + "_" + std::to_string(db));
    }
    for (int j = 0; j < q; ++j) inst.labels.push_back("V" + std::to_string(j));

    // horizontal triples
    if (tc.line_mode) {
        // bucket right-colours by (instr, child_instr, left carry)
        std::map<std::tuple<int, int, long, long>, std::vector<int>> by_left;
        for (std::size_t b = 0; b < recs.size(); ++b)
            by_left[{recs[b].instr, recs[b].child_instr, recs[b].carries[0][0],
                     recs[b].carries[0][1]}]
                .push_back((int)b);
        int hl = inst.label_id("H");
        for (std::size_t a = 0; a < recs.size(); ++a) {
            auto it = by_left.find({recs[a].instr, recs[a].child_instr, -recs[a].carries[1][0],
                                    -recs[a].carries[1][1]});
            if (it == by_left.end()) continue;
            for (int b : it->second) inst.allowed.push_back({(int)a, hl, b});
        }
    } else {
        for (int k = 0; k < tc.degree_cap; ++k)
            for (int l = 0; l < tc.degree_cap; ++l) {
                std::map<std::tuple<int, int, int, long, long>, std::vector<int>> by_slot;
                for (std::size_t b = 0; b < recs.size(); ++b) {
                    if ((int)recs[b].carries.size() <= l) continue;
                    by_slot[{recs[b].instr, recs[b].child_instr, (int)recs[b].carries.size(),
                             recs[b].carries[l][0], recs[b].carries[l][1]}]
                        .push_back((int)b);
                }
                for (std::size_t a = 0; a < recs.size(); ++a) {
                    if ((int)recs[a].carries.size() <= k) continue;
                    int da = (int)recs[a].carries.size();
                    for (int db = l + 1; db <= tc.degree_cap; ++db) {
                        auto it = by_slot.find({recs[a].instr, recs[a].child_instr, db,
                                                -recs[a].carries[k][0], -recs[a].carries[k][1]});
                        if (it == by_slot.end()) continue;
                        int lbl = inst.label_id("H" + std::to_string(k) + "_" + std::to_string(l) +
                                                "_" + std::to_string(da) + "_" +
                                                std::to_string(db));
                        for (int b : it->second) inst.allowed.push_back({(int)a, lbl, b});
                    }
                }
            }
    }

    // vertical triples: child colour a, parent colour b with slot agreement
    for (int j = 0; j < q; ++j) {
        std::map<std::tuple<int, long, long>, std::vector<int>> parents;
        for (std::size_t b = 0; b < recs.size(); ++b)
            parents[{recs[b].child_instr, recs[b].child_data[j][0], recs[b].child_data[j][1]}]
                .push_back((int)b);
        int vl = inst.label_id("V" + std::to_string(j));
        for (std::size_t a = 0; a < recs.size(); ++a) {
            auto it = parents.find({recs[a].instr, recs[a].d[0], recs[a].d[1]});
            if (it == parents.end()) continue;
            for (int b : it->second) inst.allowed.push_back({(int)a, vl, b});
        }
    }

    if (report) {
        report->M = tc.params.M;
        report->K = tc.params.K;
        report->L = tc.params.L;
        report->carry_set_size = tc.params.carry_set_size();
        report->num_colours = inst.colours.size();
        report->num_triples = inst.allowed.size();
    }
    return inst;
}

std::string size_report_to_json(const SizeReport& r) {
    ordered_json j;
    j["M"] = r.M.get_str();
    j["K"] = rat_to_string(r.K);
    j["L"] = r.L.get_str();
    j["carry_set_size"] = r.carry_set_size.get_str();
    j["colours"] = r.num_colours;
    j["triples"] = r.num_triples;
    return j.dump(2);
}

domino::LabeledPatch to_labeled_patch(const tower::TowerPatch& p, bool line_mode, int degree_cap) {
    domino::LabeledPatch lp;
    lp.num_vertices = p.total_vertices();
    if (line_mode) {
        lp.label_names.push_back("H");
    } else {
        for (int k = 0; k < degree_cap; ++k)
            for (int l = 0; l < degree_cap; ++l)
                for (int da = k + 1; da <= degree_cap; ++da)
                    for (int db = l + 1; db <= degree_cap; ++db)
                        lp.label_names.push_back("H" + std::to_string(k) + "_" + std::to_string(l) +
                                                 "_" + std::to_string(da) + "_" +
                                                 std::to_string(db));
    }
    int max_children = 0;
    for (int n = 1; n < p.height; ++n)
        for (auto ci : p.child_index[n]) max_children = std::max(max_children, ci + 1);
    max_children = std::max(max_children, p.is_line_kind() ? p.q : 1);
    for (int j = 0; j < max_children; ++j) lp.label_names.push_back("V" + std::to_string(j));
    auto label_id = [&](const std::string& s) {
        for (std::size_t i = 0; i < lp.label_names.size(); ++i)
            if (lp.label_names[i] == s) return (int)i;
        throw ValidationError("patch needs label '" + s + "' beyond the degree cap");
    };

    for (int n = 0; n < p.height; ++n) {
        if (line_mode) {
            int h = label_id("H");
            p.for_each_horizontal_edge(n, [&](int u, int v) {
                lp.edges.push_back({p.vertex_index(n, u), p.vertex_index(n, v), h});
            });
        } else {
            // slot of an edge endpoint = rank among its sorted neighbors
            std::vector<std::vector<int>> sorted_adj(p.level_size(n));
            for (std::int64_t v = 0; v < p.level_size(n); ++v) {
                sorted_adj[v] = p.horizontal_neighbors(n, (int)v);
                std::sort(sorted_adj[v].begin(), sorted_adj[v].end());
            }
            auto slot = [&](int v, int w) {
                auto& a = sorted_adj[v];
                return (int)(std::lower_bound(a.begin(), a.end(), w) - a.begin());
            };
            p.for_each_horizontal_edge(n, [&](int u, int v) {
                int du = (int)sorted_adj[u].size(), dv = (int)sorted_adj[v].size();
                if (du > degree_cap || dv > degree_cap)
                    throw ResourceError("horizontal degree " + std::to_string(std::max(du, dv)) +
                                        " exceeds the configured cap " +
                                        std::to_string(degree_cap));
                std::string name = "H" + std::to_string(slot(u, v)) + "_" +
                                   std::to_string(slot(v, u)) + "_" + std::to_string(du) + "_" +
                                   std::to_string(dv);
                lp.edges.push_back({p.vertex_index(n, u), p.vertex_index(n, v), label_id(name)});
            });
        }
        if (n >= 1)
            for (std::int64_t v = 0; v < p.level_size(n); ++v)
                lp.edges.push_back({p.vertex_index(n, v),
                                    p.vertex_index(n - 1, p.parent[n][v]),
                                    label_id("V" + std::to_string(p.child_index[n][v]))});
    }
    return lp;
}

}  // namespace dtile::tileset
