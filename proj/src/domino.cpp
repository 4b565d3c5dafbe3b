#include "dtile/domino.hpp"

#include <algorithm>
#include <deque>

#include <nlohmann/json.hpp>

namespace dtile::domino {

using ordered_json = nlohmann::ordered_json;

int DominoInstance::colour_id(const std::string& name) const {
    for (std::size_t i = 0; i < colours.size(); ++i)
        if (colours[i] == name) return (int)i;
    throw ValidationError("undeclared colour '" + name + "'");
}

int DominoInstance::label_id(const std::string& name) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == name) return (int)i;
    throw ValidationError("undeclared label '" + name + "'");
}

void DominoInstance::validate() const {
    if (colours.empty()) throw ValidationError("instance has no colours");
    if (labels.empty()) throw ValidationError("instance has no labels");
    for (const auto& t : allowed)
        if (t[0] < 0 || t[0] >= (int)colours.size() || t[1] < 0 || t[1] >= (int)labels.size() ||
            t[2] < 0 || t[2] >= (int)colours.size())
            throw ValidationError("allowed triple references undeclared colour or label");
}

namespace {

struct Bitset {
    std::vector<std::uint64_t> w;
    int nbits = 0;

    void init(int n, bool full) {
        nbits = n;
        w.assign((n + 63) / 64, full ? ~0ull : 0ull);
        if (full && n % 64) w.back() = (1ull << (n % 64)) - 1;
    }
    void set(int i) { w[i >> 6] |= 1ull << (i & 63); }
    bool test(int i) const { return (w[i >> 6] >> (i & 63)) & 1; }
    bool intersects(const Bitset& o) const {
        for (std::size_t i = 0; i < w.size(); ++i)
            if (w[i] & o.w[i]) return true;
        return false;
    }
    bool any() const {
        for (auto x : w)
            if (x) return true;
        return false;
    }
    int count() const {
        int c = 0;
        for (auto x : w) c += __builtin_popcountll(x);
        return c;
    }
};

// Maps the patch's label indices to the instance's, and exposes the allowed
// relation per patch label as forward/backward rows of colour bitsets.
struct ResolvedRelations {
    int nc = 0;
    std::vector<std::vector<Bitset>> fwd, bwd;  // [patch label][colour]
};

ResolvedRelations resolve(const LabeledPatch& patch, const DominoInstance& inst) {
    inst.validate();
    ResolvedRelations r;
    r.nc = (int)inst.colours.size();
    int nl = (int)patch.label_names.size();
    std::vector<int> to_inst(nl);
    for (int l = 0; l < nl; ++l) to_inst[l] = inst.label_id(patch.label_names[l]);
    r.fwd.assign(nl, {});
    r.bwd.assign(nl, {});
    for (int l = 0; l < nl; ++l) {
        r.fwd[l].assign(r.nc, {});
        r.bwd[l].assign(r.nc, {});
        for (int c = 0; c < r.nc; ++c) {
            r.fwd[l][c].init(r.nc, false);
            r.bwd[l][c].init(r.nc, false);
        }
    }
    for (const auto& t : inst.allowed)
        for (int l = 0; l < nl; ++l)
            if (to_inst[l] == t[1]) {
                r.fwd[l][t[0]].set(t[2]);
                r.bwd[l][t[2]].set(t[0]);
            }
    return r;
}

}  // namespace

std::vector<std::int64_t> check_coloring(const LabeledPatch& patch, const DominoInstance& inst,
                                         const Coloring& coloring) {
    if ((std::int64_t)coloring.size() != patch.num_vertices)
        throw ValidationError("coloring is not total on the patch");
    for (int c : coloring)
        if (c < 0 || c >= (int)inst.colours.size())
            throw ValidationError("coloring uses an undeclared colour id");
    ResolvedRelations rel = resolve(patch, inst);
    std::vector<std::int64_t> bad;
    for (std::size_t e = 0; e < patch.edges.size(); ++e) {
        const auto& ed = patch.edges[e];
        if (!rel.fwd[ed.label][coloring[ed.from]].test(coloring[ed.to]))
            bad.push_back((std::int64_t)e);
    }
    return bad;
}

namespace {

struct Arc {
    std::int64_t other;
    int label;
    bool forward;  // true: this vertex is the edge source
};

struct Solver {
    const ResolvedRelations& rel;
    std::int64_t n;
    std::vector<std::vector<Arc>> arcs;
    std::vector<Bitset> dom;
    std::uint64_t nodes = 0, budget = 0;

    Solver(const LabeledPatch& patch, const ResolvedRelations& r, std::uint64_t b)
        : rel(r), n(patch.num_vertices), budget(b) {
        arcs.assign(n, {});
        for (const auto& e : patch.edges) {
            arcs[e.from].push_back({e.to, e.label, true});
            arcs[e.to].push_back({e.from, e.label, false});
        }
        dom.assign(n, {});
        for (auto& d : dom) d.init(rel.nc, true);
    }

    // prune values of v unsupported across (v -> other); true if dom changed
    bool revise(std::int64_t v, const Arc& a) {
        const auto& rows = a.forward ? rel.fwd[a.label] : rel.bwd[a.label];
        bool changed = false;
        Bitset& d = dom[v];
        for (int c = 0; c < rel.nc; ++c) {
            if (!d.test(c)) continue;
            if (!rows[c].intersects(dom[a.other])) {
                d.w[c >> 6] &= ~(1ull << (c & 63));
                changed = true;
            }
        }
        return changed;
    }

    // propagate to a fixpoint starting from the given seed vertices
    bool ac3(const std::vector<std::int64_t>& seeds) {
        std::deque<std::int64_t> queue(seeds.begin(), seeds.end());
        std::vector<char> queued(n, 0);
        for (auto v : seeds) queued[v] = 1;
        while (!queue.empty()) {
            std::int64_t y = queue.front();
            queue.pop_front();
            queued[y] = 0;
            // y's domain changed: revise all neighbors against y
            for (const Arc& a : arcs[y]) {
                std::int64_t x = a.other;
                Arc back{y, a.label, !a.forward};
                if (revise(x, back)) {
                    if (!dom[x].any()) return false;
                    if (!queued[x]) {
                        queued[x] = 1;
                        queue.push_back(x);
                    }
                }
            }
        }
        return true;
    }

    enum class Result { Found, Exhausted, Aborted };

    Result search(std::int64_t v, Coloring& out) {
        while (v < n && dom[v].count() == 1) {
            // already forced; record and move on
            for (int c = 0; c < rel.nc; ++c)
                if (dom[v].test(c)) {
                    out[v] = c;
                    break;
                }
            ++v;
        }
        if (v >= n) return Result::Found;
        std::vector<Bitset> saved = dom;
        for (int c = 0; c < rel.nc; ++c) {
            if (!saved[v].test(c)) continue;
            if (++nodes > budget) return Result::Aborted;
            dom = saved;
            dom[v].init(rel.nc, false);
            dom[v].set(c);
            out[v] = c;
            if (ac3({v})) {
                Result r = search(v + 1, out);
                if (r != Result::Exhausted) return r;
            }
        }
        dom = std::move(saved);
        return Result::Exhausted;
    }
};

}  // namespace

SolveOutcome solve_patch(const LabeledPatch& patch, const DominoInstance& inst,
                         std::uint64_t budget) {
    if (budget == 0) throw ValidationError("solver budget must be positive");
    ResolvedRelations rel = resolve(patch, inst);
    SolveOutcome out;
    out.budget = budget;
    if (patch.num_vertices == 0) {
        out.kind = SolveOutcome::Kind::Satisfiable;
        return out;
    }
    Solver s(patch, rel, budget);
    std::vector<std::int64_t> all(patch.num_vertices);
    for (std::int64_t i = 0; i < patch.num_vertices; ++i) all[i] = i;
    Coloring col(patch.num_vertices, 0);
    if (!s.ac3(all)) {
        out.kind = SolveOutcome::Kind::Unsatisfiable;
        out.explored = 0;
        return out;
    }
    Solver::Result r = s.search(0, col);
    out.explored = s.nodes;
    switch (r) {
        case Solver::Result::Found:
            out.kind = SolveOutcome::Kind::Satisfiable;
            out.coloring = std::move(col);
            break;
        case Solver::Result::Exhausted:
            out.kind = SolveOutcome::Kind::Unsatisfiable;
            break;
        case Solver::Result::Aborted:
            out.kind = SolveOutcome::Kind::Aborted;
            break;
    }
    return out;
}

std::string export_cnf(const LabeledPatch& patch, const DominoInstance& inst) {
    ResolvedRelations rel = resolve(patch, inst);
    int nc = rel.nc;
    auto var = [nc](std::int64_t v, int c) { return v * nc + c + 1; };
    std::string body;
    std::int64_t nclauses = 0;
    for (std::int64_t v = 0; v < patch.num_vertices; ++v) {
        for (int c = 0; c < nc; ++c) body += std::to_string(var(v, c)) + " ";
        body += "0\n";
        ++nclauses;
        for (int a = 0; a < nc; ++a)
            for (int b = a + 1; b < nc; ++b) {
                body += "-" + std::to_string(var(v, a)) + " -" + std::to_string(var(v, b)) + " 0\n";
                ++nclauses;
            }
    }
    for (const auto& e : patch.edges)
        for (int a = 0; a < nc; ++a)
            for (int b = 0; b < nc; ++b)
                if (!rel.fwd[e.label][a].test(b)) {
                    body += "-" + std::to_string(var(e.from, a)) + " -" +
                            std::to_string(var(e.to, b)) + " 0\n";
                    ++nclauses;
                }
    return "p cnf " + std::to_string(patch.num_vertices * nc) + " " + std::to_string(nclauses) +
           "\n" + body;
}

std::string instance_to_json(const DominoInstance& inst) {
    ordered_json j;
    j["colours"] = inst.colours;
    j["labels"] = inst.labels;
    j["allowed"] = ordered_json::array();
    for (const auto& t : inst.allowed)
        j["allowed"].push_back({inst.colours[t[0]], inst.labels[t[1]], inst.colours[t[2]]});
    return j.dump(2);
}

DominoInstance instance_from_json(const std::string& text) {
    ordered_json j = ordered_json::parse(text);
    DominoInstance inst;
    inst.colours = j.at("colours").get<std::vector<std::string>>();
    inst.labels = j.at("labels").get<std::vector<std::string>>();
    for (const auto& t : j.at("allowed"))
        inst.allowed.push_back({inst.colour_id(t.at(0)), inst.label_id(t.at(1)),
                                inst.colour_id(t.at(2))});
    inst.validate();
    return inst;
}

std::string colored_patch_to_dot(const LabeledPatch& patch, const DominoInstance&,
                                 const Coloring& coloring) {
    std::string out = "digraph colored {\n";
    for (std::int64_t v = 0; v < patch.num_vertices; ++v)
        out += "  v" + std::to_string(v) + " [label=\"" +
               (v < (std::int64_t)coloring.size() ? std::to_string(coloring[v]) : "?") + "\"];\n";
    for (const auto& e : patch.edges)
        out += "  v" + std::to_string(e.from) + " -> v" + std::to_string(e.to) + " [label=\"" +
               patch.label_names[e.label] + "\"];\n";
    out += "}\n";
    return out;
}

}  // namespace dtile::domino
