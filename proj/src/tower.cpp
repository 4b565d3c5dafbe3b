#include "dtile/tower.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

namespace dtile::tower {

using ordered_json = nlohmann::ordered_json;

std::string kind_name(TowerKind k) {
    switch (k) {
        case TowerKind::GridLine: return "grid";
        case TowerKind::QAry: return "qary";
        case TowerKind::Horosphere: return "horosphere";
        case TowerKind::Custom: return "custom";
    }
    return "?";
}

TowerSpec TowerSpec::grid_line() {
    TowerSpec s;
    s.kind = TowerKind::GridLine;
    s.q = 1;
    return s;
}

TowerSpec TowerSpec::qary(int q) {
    if (q < 2) throw ValidationError("qary tower requires q >= 2");
    TowerSpec s;
    s.kind = TowerKind::QAry;
    s.q = q;
    return s;
}

static void validate_explicit(const ExplicitTower& t, bool require_q_regular);

TowerSpec TowerSpec::horosphere(std::shared_ptr<const ExplicitTower> t) {
    if (!t || t->levels.empty()) throw ValidationError("horosphere tower has no levels");
    validate_explicit(*t, /*require_q_regular=*/false);
    TowerSpec s;
    s.kind = TowerKind::Horosphere;
    s.q = t->q;
    s.data = std::move(t);
    return s;
}

static void validate_explicit(const ExplicitTower& t, bool require_q_regular) {
    if (t.levels.empty()) throw ValidationError("explicit tower has no levels");
    if (t.parent.size() != t.levels.size())
        throw ValidationError("explicit tower: parent table size mismatch");
    for (std::size_t n = 0; n < t.levels.size(); ++n) {
        const auto& lg = t.levels[n];
        for (auto [u, v] : lg.edges)
            if (u < 0 || v < 0 || u >= lg.size || v >= lg.size || u == v)
                throw ValidationError("explicit tower: bad edge at level " + std::to_string(n));
        if (n == 0) continue;
        const auto& par = t.parent[n];
        if ((std::int64_t)par.size() != lg.size)
            throw ValidationError("explicit tower: parent vector size mismatch at level " +
                                  std::to_string(n));
        std::int64_t below = t.levels[n - 1].size;
        std::vector<int> fibre(below, 0);
        for (int p : par) {
            if (p < 0 || p >= below)
                throw ValidationError("explicit tower: parent out of range at level " +
                                      std::to_string(n));
            fibre[p]++;
        }
        if (require_q_regular) {
            for (std::int64_t v = 0; v < below; ++v)
                if (fibre[v] != t.q)
                    throw ValidationError("explicit tower is not " + std::to_string(t.q) +
                                          "-regular: level " + std::to_string(n - 1) + " vertex " +
                                          std::to_string(v) + " has " + std::to_string(fibre[v]) +
                                          " preimages");
        }
        // contraction property: edges map to edges or points
        std::set<std::pair<int, int>> lower_edges(t.levels[n - 1].edges.begin(),
                                                  t.levels[n - 1].edges.end());
        for (auto [u, v] : lg.edges) {
            int pu = par[u], pv = par[v];
            if (pu == pv) continue;
            auto e = std::minmax(pu, pv);
            if (!lower_edges.count({e.first, e.second}))
                throw ValidationError("explicit tower: pi_" + std::to_string(n) +
                                      " does not send edge {" + std::to_string(u) + "," +
                                      std::to_string(v) + "} to an edge or a vertex");
        }
    }
}

TowerSpec TowerSpec::custom(std::shared_ptr<const ExplicitTower> t) {
    if (!t) throw ValidationError("custom tower is null");
    if (t->q < 1) throw ValidationError("custom tower requires q >= 1");
    validate_explicit(*t, /*require_q_regular=*/true);
    TowerSpec s;
    s.kind = TowerKind::Custom;
    s.q = t->q;
    s.data = std::move(t);
    return s;
}

std::int64_t TowerPatch::total_vertices() const {
    std::int64_t n = 0;
    for (const auto& l : levels) n += l.size;
    return n;
}

std::int64_t TowerPatch::vertex_index(int level, std::int64_t id) const {
    std::int64_t base = 0;
    for (int n = 0; n < level; ++n) base += levels[n].size;
    return base + id;
}

void TowerPatch::for_each_horizontal_edge(int level,
                                          const std::function<void(int, int)>& fn) const {
    const Level& l = levels[level];
    if (is_line_kind()) {
        for (std::int64_t i = 0; i + 1 < l.size; ++i) fn((int)i, (int)(i + 1));
    } else {
        for (auto [u, v] : l.edges) fn(u, v);
    }
}

std::vector<int> TowerPatch::horizontal_neighbors(int level, int id) const {
    const Level& l = levels[level];
    if (is_line_kind()) {
        std::vector<int> out;
        if (id > 0) out.push_back(id - 1);
        if (id + 1 < l.size) out.push_back(id + 1);
        return out;
    }
    return l.adj[id];
}

int TowerPatch::num_children(int level, std::int64_t id) const {
    if (level + 1 >= height) return 0;
    return (int)children[level][id].size();
}

static std::int64_t ipow(std::int64_t b, int e) {
    std::int64_t r = 1;
    while (e-- > 0) r *= b;
    return r;
}

TowerPatch build_patch(const TowerSpec& spec, int height, std::int64_t base_lo,
                       std::int64_t base_hi, std::int64_t vertex_cap) {
    if (height < 1) throw ValidationError("patch height must be >= 1");
    TowerPatch p;
    p.kind = spec.kind;
    p.q = spec.q;
    p.height = height;
    p.levels.resize(height);
    p.parent.resize(height);
    p.child_index.resize(height);
    p.children.resize(height);
    p.interior.resize(height);

    if (spec.is_line_kind()) {
        if (base_lo >= base_hi) throw ValidationError("patch base range is empty");
        std::int64_t total = 0;
        for (int n = 0; n < height; ++n) {
            std::int64_t lo = base_lo * ipow(spec.q, n), hi = base_hi * ipow(spec.q, n);
            total += hi - lo;
            if (total > vertex_cap)
                throw ResourceError("patch exceeds vertex cap of " + std::to_string(vertex_cap));
            p.levels[n].lo = lo;
            p.levels[n].size = hi - lo;
        }
        for (int n = 1; n < height; ++n) {
            std::int64_t sz = p.levels[n].size;
            p.parent[n].resize(sz);
            p.child_index[n].resize(sz);
            for (std::int64_t i = 0; i < sz; ++i) {
                std::int64_t m = p.levels[n].lo + i;
                // floor division keeps negative coordinates aligned
                std::int64_t pm = m >= 0 ? m / spec.q : -(((-m) + spec.q - 1) / spec.q);
                p.parent[n][i] = (int)(pm - p.levels[n - 1].lo);
                p.child_index[n][i] = (int)(m - pm * spec.q);
            }
        }
    } else {
        const ExplicitTower& t = *spec.data;
        if ((int)t.levels.size() < height)
            throw ValidationError("explicit tower provides only " +
                                  std::to_string(t.levels.size()) + " levels, need " +
                                  std::to_string(height));
        std::int64_t total = 0;
        for (int n = 0; n < height; ++n) {
            const auto& lg = t.levels[n];
            total += lg.size;
            if (total > vertex_cap)
                throw ResourceError("patch exceeds vertex cap of " + std::to_string(vertex_cap));
            auto& L = p.levels[n];
            L.size = lg.size;
            L.edges = lg.edges;
            L.labels = lg.labels;
            L.line_id = lg.line_id;
            L.line_pos = lg.line_pos;
            L.adj.assign(lg.size, {});
            for (auto [u, v] : lg.edges) {
                L.adj[u].push_back(v);
                L.adj[v].push_back(u);
            }
            if (n >= 1) {
                p.parent[n] = t.parent[n];
                p.child_index[n].assign(lg.size, 0);
            }
        }
        // child indices by order of appearance within each fibre
        for (int n = 1; n < height; ++n) {
            std::vector<int> seen(p.levels[n - 1].size, 0);
            for (std::int64_t v = 0; v < p.levels[n].size; ++v)
                p.child_index[n][v] = seen[p.parent[n][v]]++;
        }
    }

    for (int n = 0; n + 1 < height; ++n) {
        p.children[n].assign(p.levels[n].size, {});
        for (std::int64_t v = 0; v < p.levels[n + 1].size; ++v)
            p.children[n][p.parent[n + 1][v]].push_back((int)v);
    }

    // interior: full tower star inside the window; the top level never
    // qualifies since its children live beyond the patch
    for (int n = 0; n < height; ++n) {
        p.interior[n].assign(p.levels[n].size, 0);
        if (n + 1 >= height) continue;
        for (std::int64_t v = 0; v < p.levels[n].size; ++v) {
            bool ok = true;
            if (p.is_line_kind()) ok = v > 0 && v + 1 < p.levels[n].size;
            if (ok && spec.is_line_kind()) ok = (int)p.children[n][v].size() == spec.q;
            p.interior[n][v] = ok ? 1 : 0;
        }
    }
    return p;
}

static VertexSet finish_line_set(int level, std::vector<std::int64_t> verts) {
    std::sort(verts.begin(), verts.end());
    verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
    VertexSet s;
    s.level = level;
    s.verts = std::move(verts);
    std::set<std::int64_t> nb;
    for (std::size_t i = 0; i < s.verts.size(); ++i) {
        std::int64_t m = s.verts[i];
        nb.insert({m - 1, m, m + 1});
        bool left_in = i > 0 && s.verts[i - 1] == m - 1;
        bool right_in = i + 1 < s.verts.size() && s.verts[i + 1] == m + 1;
        if (!left_in) s.boundary_edges++;
        if (!right_in) s.boundary_edges++;
    }
    s.neighbourhood.assign(nb.begin(), nb.end());
    return s;
}

static VertexSet finish_explicit_set(const TowerSpec& spec, int level,
                                     std::vector<std::int64_t> verts) {
    const auto& lg = spec.data->levels[level];
    std::sort(verts.begin(), verts.end());
    verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
    for (auto v : verts)
        if (v < 0 || v >= lg.size) throw DomainError("vertex set outside level graph");
    std::vector<char> in(lg.size, 0);
    for (auto v : verts) in[v] = 1;
    VertexSet s;
    s.level = level;
    s.verts = std::move(verts);
    std::set<std::int64_t> nb(s.verts.begin(), s.verts.end());
    for (auto [u, v] : lg.edges) {
        if (in[u] != in[v]) s.boundary_edges++;
        if (in[u]) nb.insert(v);
        if (in[v]) nb.insert(u);
    }
    s.neighbourhood.assign(nb.begin(), nb.end());
    return s;
}

VertexSet make_vertex_set(const TowerSpec& spec, int level, std::vector<std::int64_t> verts) {
    if (verts.empty()) throw DomainError("vertex set is empty");
    if (spec.is_line_kind()) return finish_line_set(level, std::move(verts));
    if (level < 0 || level >= (int)spec.data->levels.size())
        throw DomainError("level outside tower");
    return finish_explicit_set(spec, level, std::move(verts));
}

VertexSet folner_set(const TowerSpec& spec, int level, int k, std::int64_t max_width) {
    if (k < 1) throw ValidationError("folner parameter k must be >= 1");
    if (spec.is_line_kind()) {
        std::int64_t need = 2 * (std::int64_t)k;
        if (max_width >= 0 && need > max_width)
            throw InfeasibleError("folner interval needs width " + std::to_string(need) +
                                  ", cap is " + std::to_string(max_width));
        std::vector<std::int64_t> v(need);
        for (std::int64_t i = 0; i < need; ++i) v[i] = i;
        return finish_line_set(level, std::move(v));
    }
    if (level < 0 || level >= (int)spec.data->levels.size())
        throw DomainError("level outside tower");
    const auto& lg = spec.data->levels[level];
    if (lg.size == 0) throw InfeasibleError("level graph is empty");
    // grow balls around the least vertex until the Folner inequality holds
    std::vector<int> dist(lg.size, -1);
    std::vector<std::vector<int>> adj(lg.size);
    for (auto [u, v] : lg.edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    std::vector<std::int64_t> ball{0};
    dist[0] = 0;
    std::vector<int> frontier{0};
    for (;;) {
        if (max_width < 0 || (std::int64_t)ball.size() <= max_width) {
            VertexSet s = finish_explicit_set(spec, level, ball);
            if ((std::int64_t)k * s.boundary_edges <= (std::int64_t)s.verts.size()) return s;
        } else {
            throw InfeasibleError("no folner ball within width cap " + std::to_string(max_width) +
                                  " at level " + std::to_string(level));
        }
        std::vector<int> next;
        for (int u : frontier)
            for (int w : adj[u])
                if (dist[w] < 0) {
                    dist[w] = dist[u] + 1;
                    next.push_back(w);
                    ball.push_back(w);
                }
        if (next.empty())
            throw InfeasibleError(
                "level graph exhausted before the Folner inequality held at level " +
                std::to_string(level));
        frontier = std::move(next);
    }
}

VertexSet pullback_folner(const TowerSpec& spec, int level, const VertexSet& F) {
    if (F.level != level - 1)
        throw DomainError("pullback expects F at level " + std::to_string(level - 1));
    if (spec.is_line_kind()) {
        std::vector<std::int64_t> out;
        out.reserve(F.verts.size() * spec.q);
        for (auto m : F.verts)
            for (int j = 0; j < spec.q; ++j) out.push_back(m * spec.q + j);
        return finish_line_set(level, std::move(out));
    }
    if (level < 1 || level >= (int)spec.data->levels.size())
        throw DomainError("level outside tower");
    const auto& par = spec.data->parent[level];
    std::vector<char> in(spec.data->levels[level - 1].size, 0);
    for (auto v : F.verts) in[v] = 1;
    std::vector<std::int64_t> out;
    for (std::int64_t v = 0; v < (std::int64_t)par.size(); ++v)
        if (in[par[v]]) out.push_back(v);
    if (out.empty()) throw DomainError("pullback is empty");
    return finish_explicit_set(spec, level, std::move(out));
}

std::string patch_to_json(const TowerPatch& p) {
    ordered_json j;
    j["kind"] = kind_name(p.kind);
    j["q"] = p.q;
    j["height"] = p.height;
    j["levels"] = ordered_json::array();
    for (int n = 0; n < p.height; ++n) {
        ordered_json l;
        if (p.is_line_kind()) {
            l["lo"] = p.levels[n].lo;
            l["size"] = p.levels[n].size;
        } else {
            l["size"] = p.levels[n].size;
            l["edges"] = p.levels[n].edges;
            if (!p.levels[n].labels.empty()) l["labels"] = p.levels[n].labels;
            if (n >= 1) l["parent"] = p.parent[n];
        }
        l["interior"] = ordered_json::array();
        for (auto c : p.interior[n]) l["interior"].push_back((int)c);
        j["levels"].push_back(std::move(l));
    }
    return j.dump(2);
}

TowerPatch patch_from_json(const std::string& text) {
    ordered_json j = ordered_json::parse(text);
    std::string kind = j.at("kind");
    int q = j.at("q");
    int height = j.at("height");
    if (kind == "grid" || kind == "qary") {
        TowerSpec spec = (kind == "grid") ? TowerSpec::grid_line() : TowerSpec::qary(q);
        const auto& l0 = j.at("levels").at(0);
        std::int64_t lo = l0.at("lo"), size = l0.at("size");
        return build_patch(spec, height, lo, lo + size);
    }
    auto t = std::make_shared<ExplicitTower>();
    t->q = q;
    t->levels.resize(height);
    t->parent.resize(height);
    for (int n = 0; n < height; ++n) {
        const auto& l = j.at("levels").at(n);
        t->levels[n].size = l.at("size");
        for (const auto& e : l.at("edges"))
            t->levels[n].edges.emplace_back((int)e.at(0), (int)e.at(1));
        if (l.contains("labels")) t->levels[n].labels = l.at("labels").get<std::vector<std::string>>();
        if (n >= 1) t->parent[n] = l.at("parent").get<std::vector<int>>();
    }
    TowerSpec spec = (kind == "custom") ? TowerSpec::custom(t) : TowerSpec::horosphere(t);
    return build_patch(spec, height, 0, 1);
}

std::string patch_to_dot(const TowerPatch& p) {
    std::string out = "digraph tower {\n  rankdir=BT;\n";
    for (int n = 0; n < p.height; ++n) {
        for (std::int64_t v = 0; v < p.levels[n].size; ++v) {
            std::string name = "L" + std::to_string(n) + "_" + std::to_string(v);
            std::string label =
                p.is_line_kind() ? std::to_string(p.coord(n, v))
                                 : (v < (std::int64_t)p.levels[n].labels.size()
                                        ? p.levels[n].labels[v]
                                        : std::to_string(v));
            out += "  " + name + " [label=\"" + label + "\"];\n";
        }
        p.for_each_horizontal_edge(n, [&](int u, int v) {
            out += "  L" + std::to_string(n) + "_" + std::to_string(u) + " -> L" +
                   std::to_string(n) + "_" + std::to_string(v) + " [dir=none];\n";
        });
        if (n >= 1)
            for (std::int64_t v = 0; v < p.levels[n].size; ++v)
                out += "  L" + std::to_string(n) + "_" + std::to_string(v) + " -> L" +
                       std::to_string(n - 1) + "_" + std::to_string(p.parent[n][v]) + ";\n";
    }
    out += "}\n";
    return out;
}

}  // namespace dtile::tower
