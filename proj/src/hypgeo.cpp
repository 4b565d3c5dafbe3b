#include "dtile/hypgeo.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

namespace dtile::hypgeo {

namespace {

Word free_reduce(const Word& w) {
    Word out;
    out.reserve(w.size());
    for (int8_t l : w) {
        if (!out.empty() && out.back() == (int8_t)(l ^ 1))
            out.pop_back();
        else
            out.push_back(l);
    }
    return out;
}

Word inverse_word(const Word& w) {
    Word out;
    out.reserve(w.size());
    for (auto it = w.rbegin(); it != w.rend(); ++it) out.push_back((int8_t)(*it ^ 1));
    return out;
}

std::uint64_t pack_word(const Word& w) {
    std::uint64_t x = (std::uint64_t)w.size();
    for (std::size_t i = 0; i < w.size(); ++i)
        x |= (std::uint64_t)(w[i] & 0xF) << (4 + 4 * i);
    return x;
}

Word unpack_word(std::uint64_t x) {
    Word w((std::size_t)(x & 0xF));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = (int8_t)((x >> (4 + 4 * i)) & 0xF);
    return w;
}

// symmetrized relator set with the lookup structures Dehn reduction and the
// equal-length rewrites need
struct RelatorIndex {
    std::vector<Word> rstar;                       // all rotations of relators & inverses
    std::vector<std::vector<int>> by_first;        // letter -> rstar indices
    std::unordered_map<std::uint64_t, int> half_prefix;  // packed half word -> rstar index
    std::vector<int> half_lengths;                 // distinct |r|/2 for even relators
    std::size_t min_relator = SIZE_MAX;

    explicit RelatorIndex(const Presentation& pres) {
        std::set<Word> seen;
        for (const Word& r : pres.relators) {
            for (const Word& base : {r, inverse_word(r)}) {
                for (std::size_t k = 0; k < base.size(); ++k) {
                    Word rot(base.begin() + k, base.end());
                    rot.insert(rot.end(), base.begin(), base.begin() + k);
                    seen.insert(std::move(rot));
                }
            }
            min_relator = std::min(min_relator, r.size());
        }
        by_first.assign(pres.letters() ? pres.letters() : 1, {});
        std::set<int> halves;
        for (const Word& w : seen) {
            int idx = (int)rstar.size();
            rstar.push_back(w);
            by_first[w[0]].push_back(idx);
            if (w.size() % 2 == 0) halves.insert((int)w.size() / 2);
        }
        half_lengths.assign(halves.begin(), halves.end());
        for (int h : half_lengths)
            for (std::size_t i = 0; i < rstar.size(); ++i)
                if ((int)rstar[i].size() == 2 * h) {
                    Word pre(rstar[i].begin(), rstar[i].begin() + h);
                    half_prefix.emplace(pack_word(pre), (int)i);
                }
    }

    bool empty() const { return rstar.empty(); }
};

Word dehn_reduce_impl(const RelatorIndex& idx, Word w) {
    w = free_reduce(w);
    if (idx.empty()) return w;
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < w.size() && !changed; ++i) {
            for (int ri : idx.by_first[w[i]]) {
                const Word& r = idx.rstar[ri];
                std::size_t k = 0;
                while (k < r.size() && i + k < w.size() && w[i + k] == r[k]) ++k;
                if (2 * k > r.size()) {
                    Word repl = inverse_word(Word(r.begin() + k, r.end()));
                    Word nw(w.begin(), w.begin() + i);
                    nw.insert(nw.end(), repl.begin(), repl.end());
                    nw.insert(nw.end(), w.begin() + i + k, w.end());
                    w = free_reduce(nw);
                    changed = true;
                    break;
                }
            }
        }
    }
    return w;
}

// equal-length single-relator rewrites of an irreducible word
void collect_variants(const RelatorIndex& idx, const Word& w, std::vector<Word>& out) {
    out.clear();
    for (int h : idx.half_lengths) {
        if ((int)w.size() < h) continue;
        for (std::size_t i = 0; i + h <= w.size(); ++i) {
            Word key(w.begin() + i, w.begin() + i + h);
            auto it = idx.half_prefix.find(pack_word(key));
            if (it == idx.half_prefix.end()) continue;
            const Word& r = idx.rstar[it->second];
            Word repl = inverse_word(Word(r.begin() + h, r.end()));
            if (repl == key) continue;
            Word v(w.begin(), w.begin() + i);
            v.insert(v.end(), repl.begin(), repl.end());
            v.insert(v.end(), w.begin() + i + h, w.end());
            if (free_reduce(v).size() == v.size()) out.push_back(std::move(v));
        }
    }
}

// Dehn reduction strengthened by a bounded search over equal-length relator
// rewrites; hop depth d certifies geodesics against (d+1)-face digon ladders,
// which is exact for words up to min|r| + 2 at depth 2.
Word deep_reduce_impl(const RelatorIndex& idx, Word w, int vdepth = 2) {
    w = dehn_reduce_impl(idx, w);
    if (idx.empty() || vdepth <= 0) return w;
    std::set<std::uint64_t> seen{pack_word(w)};
    std::vector<Word> frontier{w}, next, vars;
    for (int hop = 0; hop < vdepth; ++hop) {
        next.clear();
        for (const Word& u : frontier) {
            collect_variants(idx, u, vars);
            for (Word& v : vars) {
                Word d = dehn_reduce_impl(idx, v);
                if (d.size() < w.size()) return deep_reduce_impl(idx, d, vdepth);
                if (seen.insert(pack_word(v)).second) next.push_back(std::move(v));
            }
        }
        frontier = next;
        if (frontier.empty()) break;
    }
    return w;
}

// longest word length for which deep reduction certifies geodesics
std::size_t geodesic_validity_cap(const RelatorIndex& idx) {
    return idx.empty() ? (std::size_t)INT_MAX : idx.min_relator + 2;
}

}  // namespace

Presentation Presentation::parse(const std::string& text) {
    Presentation p;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty presentation");
    std::istringstream gl(line);
    std::string g;
    std::map<char, int> letter_of;
    while (gl >> g) {
        if (g.size() != 1 || g[0] < 'a' || g[0] > 'z')
            throw ValidationError("generators must be single lowercase letters");
        if (letter_of.count(g[0])) throw ValidationError("duplicate generator '" + g + "'");
        int base = p.ngen++;
        letter_of[g[0]] = 2 * base;
        p.letter_names.push_back(g);
        p.letter_names.push_back(std::string(1, (char)std::toupper(g[0])));
    }
    if (p.ngen == 0) throw ValidationError("no generators");
    if (p.letters() > 16) throw ValidationError("at most 8 generators are supported");
    while (std::getline(in, line)) {
        std::string t;
        for (char c : line)
            if (!std::isspace((unsigned char)c)) t += c;
        if (t.empty()) continue;
        Word r = p.parse_word(t);
        r = free_reduce(r);
        // cyclic reduction
        while (r.size() >= 2 && r.front() == (int8_t)(r.back() ^ 1)) {
            r.erase(r.begin());
            r.pop_back();
        }
        if (r.empty()) throw ValidationError("trivial relator");
        p.relators.push_back(std::move(r));
    }
    return p;
}

Word Presentation::parse_word(const std::string& w) const {
    Word out;
    for (char c : w) {
        char lower = (char)std::tolower((unsigned char)c);
        int base = -1;
        for (int i = 0; i < ngen; ++i)
            if (letter_names[2 * i][0] == lower) base = i;
        if (base < 0) throw ValidationError(std::string("unknown letter '") + c + "'");
        out.push_back((int8_t)(2 * base + (std::isupper((unsigned char)c) ? 1 : 0)));
    }
    return out;
}

std::string Presentation::word_string(const Word& w) const {
    if (w.empty()) return "e";
    std::string s;
    for (int8_t l : w) s += letter_names[l];
    return s;
}

SmallCancellationReport verify_small_cancellation(Presentation& pres) {
    SmallCancellationReport rep;
    if (pres.relators.empty()) {
        rep.ok = true;
        pres.verified_c16 = true;
        pres.max_piece = 0;
        return rep;
    }
    RelatorIndex idx(pres);
    rep.min_relator = idx.min_relator;
    for (std::size_t i = 0; i < idx.rstar.size(); ++i)
        for (std::size_t j = i + 1; j < idx.rstar.size(); ++j) {
            const Word &a = idx.rstar[i], &b = idx.rstar[j];
            int k = 0;
            while (k < (int)std::min(a.size(), b.size()) && a[k] == b[k]) ++k;
            rep.max_piece = std::max(rep.max_piece, k);
        }
    rep.ok = 6 * rep.max_piece < (int)rep.min_relator;
    pres.verified_c16 = rep.ok;
    pres.max_piece = rep.max_piece;
    return rep;
}

Word dehn_reduce(const Presentation& pres, Word w) {
    if (!pres.relators.empty() && !pres.verified_c16)
        throw ValidationError("presentation is not verified C'(1/6)");
    RelatorIndex idx(pres);
    return dehn_reduce_impl(idx, std::move(w));
}

bool is_trivial(const Presentation& pres, const Word& w) {
    return dehn_reduce(pres, w).empty();
}

int CayleyBall::neighbor_norm(std::uint32_t id, int letter) const {
    std::uint32_t t = neighbor(id, letter);
    if (t == kOutside) return -1;
    if (t == kOuterNorm) return radius;
    return norms[t];
}

Word CayleyBall::word_of(std::uint32_t id) const { return unpack_word(words[id]); }

std::string CayleyBall::name_of(std::uint32_t id) const { return pres.word_string(word_of(id)); }

std::uint32_t CayleyBall::walk(const Word& w) const { return walk_from(0, w); }

std::uint32_t CayleyBall::walk_from(std::uint32_t g, const Word& w) const {
    std::uint32_t e = g;
    for (int8_t l : w) {
        if (e == kOuterNorm || e == kOutside) return kOutside;
        e = neighbor(e, l);
    }
    return e;
}

std::vector<std::size_t> CayleyBall::sphere_sizes() const {
    std::vector<std::size_t> out;
    for (int n = 0; n <= radius; ++n) {
        if (n + 1 < (int)layer_start.size())
            out.push_back(layer_start[n + 1] - layer_start[n]);
        else if (n < (int)layer_start.size())
            out.push_back(size() - layer_start[n]);
    }
    return out;
}

CayleyBall ball(const Presentation& pres, int R, BallOptions opts) {
    if (!pres.relators.empty() && !pres.verified_c16)
        throw ValidationError("presentation is not verified C'(1/6); run verify_small_cancellation");
    if (R < 1 || R > 14) throw ValidationError("ball radius must be in [1, 14]");
    RelatorIndex idx(pres);
    if (!idx.empty() && !opts.slow_mode && (std::size_t)R > idx.min_relator)
        opts.slow_mode = true;  // fast identification is only proven to min |r|

    CayleyBall b;
    b.pres = pres;
    b.radius = R;
    b.nl = pres.letters();
    b.full_until = std::min(opts.full_until, R);
    b.sentinel_outer = opts.sentinel_outer;

    auto add_element = [&](const Word& w) {
        if ((std::int64_t)b.size() >= opts.element_cap)
            throw ResourceError("ball exceeds the element cap");
        b.words.push_back(pack_word(w));
        b.norms.push_back((std::uint8_t)w.size());
        b.adj.insert(b.adj.end(), b.nl, CayleyBall::kOutside);
        return (std::uint32_t)(b.size() - 1);
    };
    add_element({});
    b.layer_start = {0, 1};

    std::unordered_map<std::uint64_t, std::uint32_t> words_map;
    words_map.emplace(pack_word({}), 0);

    // abelianization buckets for the slow oracle mode; only valid when every
    // relator has zero exponent sums
    bool zero_exp = true, all_even = true;
    for (const Word& r : pres.relators) {
        if (r.size() % 2) all_even = false;
        for (int g = 0; g < pres.ngen; ++g) {
            int e = 0;
            for (int8_t l : r) {
                if (l == 2 * g) ++e;
                if (l == 2 * g + 1) --e;
            }
            if (e != 0) zero_exp = false;
        }
    }
    auto abelian_key = [&](const Word& w) -> std::uint64_t {
        if (!zero_exp) return 0;
        std::uint64_t key = 0;
        for (int g = 0; g < pres.ngen; ++g) {
            int e = 0;
            for (int8_t l : w) {
                if (l == 2 * g) ++e;
                if (l == 2 * g + 1) --e;
            }
            key |= (std::uint64_t)(std::uint8_t)(int8_t)e << (8 * g);
        }
        return key;
    };
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> slow_buckets;
    if (opts.slow_mode) slow_buckets[abelian_key({})].push_back(0);

    auto link = [&](std::uint32_t u, int s, std::uint32_t e, bool strict) {
        b.adj[(std::size_t)u * b.nl + s] = e;
        std::uint32_t& back = b.adj[(std::size_t)e * b.nl + (s ^ 1)];
        if (back == CayleyBall::kOutside)
            back = u;
        else if (back != u && strict)
            throw std::logic_error("ball integrity: conflicting edge identification");
    };

    std::vector<Word> vars;
    for (int n = 0; n < R; ++n) {
        std::uint32_t lo = b.layer_start[n], hi = (std::uint32_t)b.size();
        bool next_sentinel = opts.sentinel_outer && n + 1 == R;
        bool next_full = n + 1 <= b.full_until;
        for (std::uint32_t u = lo; u < hi; ++u) {
            Word wu = b.word_of(u);
            for (int s = 0; s < b.nl; ++s) {
                if (b.neighbor(u, s) != CayleyBall::kOutside) continue;
                Word w = wu;
                w.push_back((int8_t)s);
                if (opts.slow_mode) {
                    Word wr = dehn_reduce_impl(idx, w);
                    std::uint32_t target = CayleyBall::kOutside;
                    // scan layers for the true element (parity-restricted when
                    // the Cayley graph is bipartite)
                    int m0 = all_even ? (int)(wr.size() % 2) : 0;
                    int mstep = all_even ? 2 : 1;
                    for (int m = m0; m <= (int)wr.size() && m <= n + 1; m += mstep) {
                        std::uint64_t key = abelian_key(wr);
                        auto it = slow_buckets.find(key);
                        if (it == slow_buckets.end()) continue;
                        for (std::uint32_t cand : it->second) {
                            if ((int)b.norms[cand] != m) continue;
                            Word probe = wr;
                            Word cw = inverse_word(b.word_of(cand));
                            probe.insert(probe.end(), cw.begin(), cw.end());
                            if (dehn_reduce_impl(idx, probe).empty()) {
                                target = cand;
                                break;
                            }
                        }
                        if (target != CayleyBall::kOutside) break;
                    }
                    if (target != CayleyBall::kOutside) {
                        link(u, s, target, true);
                    } else {
                        if ((int)wr.size() != n + 1)
                            throw std::logic_error(
                                "slow mode: reduced word shorter than the frontier but "
                                "matches no completed layer");
                        std::uint32_t e = add_element(wr);
                        slow_buckets[abelian_key(wr)].push_back(e);
                        link(u, s, e, true);
                    }
                    continue;
                }
                Word wr = deep_reduce_impl(idx, w);
                if (wr.size() < w.size()) {
                    std::uint32_t e = b.walk(wr);
                    if (e == CayleyBall::kOutside || e == CayleyBall::kOuterNorm)
                        throw std::logic_error("drop word failed to walk in the built ball");
                    link(u, s, e, n + 1 <= b.full_until);
                    continue;
                }
                if (next_sentinel) {
                    b.adj[(std::size_t)u * b.nl + s] = CayleyBall::kOuterNorm;
                    continue;
                }
                if (next_full) {
                    std::uint64_t key = pack_word(w);
                    auto it = words_map.find(key);
                    std::uint32_t e = CayleyBall::kOutside;
                    if (it != words_map.end()) e = it->second;
                    collect_variants(idx, w, vars);
                    if (e == CayleyBall::kOutside)
                        for (const Word& v : vars) {
                            auto vit = words_map.find(pack_word(v));
                            if (vit != words_map.end()) {
                                e = vit->second;
                                break;
                            }
                        }
                    if (e == CayleyBall::kOutside) {
                        e = add_element(w);
                        words_map.emplace(key, e);
                        for (const Word& v : vars) words_map.emplace(pack_word(v), e);
                        link(u, s, e, true);
                    } else {
                        words_map.emplace(key, e);
                        for (const Word& v : vars) words_map.emplace(pack_word(v), e);
                        link(u, s, e, true);
                    }
                } else {
                    std::uint32_t e = add_element(w);
                    link(u, s, e, false);
                }
            }
        }
        b.layer_start.push_back((std::uint32_t)b.size());
    }
    return b;
}

namespace {

void bfs_dist(const CayleyBall& b, const std::vector<std::uint32_t>& sources,
              std::vector<int>& dist) {
    dist.assign(b.size(), -1);
    std::deque<std::uint32_t> q;
    for (auto s : sources) {
        dist[s] = 0;
        q.push_back(s);
    }
    while (!q.empty()) {
        std::uint32_t u = q.front();
        q.pop_front();
        for (int s = 0; s < b.nl; ++s) {
            std::uint32_t v = b.neighbor(u, s);
            if (v >= b.size()) continue;
            if (dist[v] < 0) {
                dist[v] = dist[u] + 1;
                q.push_back(v);
            }
        }
    }
}

}  // namespace

int estimate_delta(const CayleyBall& b, int max_triples, std::uint64_t seed) {
    if (b.radius < 3) throw ValidationError("delta estimation needs radius >= 3");
    std::uint32_t count = (std::uint32_t)std::min<std::size_t>(b.size(), b.sphere_end(b.radius - 1));
    std::mt19937_64 rng(seed);
    std::vector<std::array<std::uint32_t, 3>> triples;
    double total = (double)count * count * count;
    if (total <= (double)max_triples * 8) {
        for (std::uint32_t x = 0; x < count; ++x)
            for (std::uint32_t y = x; y < count; ++y)
                for (std::uint32_t z = y; z < count; ++z) triples.push_back({x, y, z});
    } else {
        std::uniform_int_distribution<std::uint32_t> pick(0, count - 1);
        for (int i = 0; i < max_triples; ++i) triples.push_back({pick(rng), pick(rng), pick(rng)});
    }
    int best = 0;
    std::vector<int> dx, dy, dz, dh;
    for (auto [x, y, z] : triples) {
        bfs_dist(b, {x}, dx);
        bfs_dist(b, {y}, dy);
        bfs_dist(b, {z}, dz);
        // how far [a,c] strays from [a,b] u [b,c], over unions of geodesics
        auto thin = [&](const std::vector<int>& da, const std::vector<int>& db,
                        const std::vector<int>& dc, std::uint32_t bb, std::uint32_t cc) {
            int dab = da[bb], dbc = db[cc], dac = da[cc];
            if (dab < 0 || dbc < 0 || dac < 0) return 0;
            std::vector<std::uint32_t> hull;
            for (std::uint32_t v = 0; v < b.size(); ++v) {
                if (da[v] >= 0 && db[v] >= 0 && da[v] + db[v] == dab) hull.push_back(v);
                else if (db[v] >= 0 && dc[v] >= 0 && db[v] + dc[v] == dbc) hull.push_back(v);
            }
            if (hull.empty()) return 0;
            bfs_dist(b, hull, dh);
            int worst = 0;
            for (std::uint32_t v = 0; v < b.size(); ++v)
                if (da[v] >= 0 && dc[v] >= 0 && da[v] + dc[v] == dac)
                    worst = std::max(worst, dh[v] < 0 ? 0 : dh[v]);
            return worst;
        };
        best = std::max(best, thin(dx, dy, dz, y, z));
        best = std::max(best, thin(dy, dz, dx, z, x));
        best = std::max(best, thin(dz, dx, dy, x, y));
    }
    return best;
}

namespace {

// Word-level cone typing. type_0 = the geodesic-extension profile over the
// rho-ball (which is what N_g determines); type_k adds the per-letter
// type_{k-1} of every geodesic child. Pure functions of any geodesic word of
// the element, so no ball lookups beyond canonical words are needed.
struct TypeEngine {
    const RelatorIndex& idx;
    int nl;
    int lookahead;
    std::size_t cap;                 // geodesic validity cap on product lengths
    std::vector<Word> small_words;   // canonical words of the rho-ball
    std::vector<std::map<std::vector<int>, int>> ids;       // per level
    std::vector<std::unordered_map<std::uint64_t, int>> memo;
    std::map<std::vector<std::int8_t>, int> prof_ids;
    std::vector<std::vector<std::int8_t>> profiles;
    std::vector<int> profile_of_type;  // final-level type -> profile id

    TypeEngine(const RelatorIndex& ri, int letters, int k, std::vector<Word> small)
        : idx(ri), nl(letters), lookahead(k), cap(geodesic_validity_cap(ri)),
          small_words(std::move(small)), ids(k + 1), memo(k + 1) {}

    bool extends_geodesically(const Word& w, const Word& h) {
        if (w.size() + h.size() > cap)
            throw ResourceError("word product exceeds the geodesic validity cap");
        Word p = w;
        p.insert(p.end(), h.begin(), h.end());
        return deep_reduce_impl(idx, p).size() == w.size() + h.size();
    }

    int profile_of(const Word& w) {
        std::vector<std::int8_t> prof(small_words.size());
        for (std::size_t h = 0; h < small_words.size(); ++h)
            prof[h] = extends_geodesically(w, small_words[h]) ? 1 : 0;
        auto [it, fresh] = prof_ids.emplace(std::move(prof), (int)prof_ids.size());
        if (fresh) profiles.push_back(it->first);
        return it->second;
    }

    // classes at lookahead level k for the element with geodesic word w
    int type_of(const Word& w, int k) {
        std::uint64_t key = pack_word(w);
        auto mit = memo[k].find(key);
        if (mit != memo[k].end()) return mit->second;
        int prof = profile_of(w);
        std::vector<int> sig{prof};
        if (k > 0) {
            for (int s = 0; s < nl; ++s) {
                if (!profiles[prof][1 + s]) continue;  // small ids 1..nl are the letters
                Word c = w;
                c.push_back((int8_t)s);
                sig.push_back(s);
                sig.push_back(type_of(c, k - 1));
            }
        }
        auto [it, fresh] = ids[k].emplace(std::move(sig), (int)ids[k].size());
        memo[k].emplace(key, it->second);
        if (k == lookahead && fresh) profile_of_type.push_back(prof);
        return it->second;
    }
};

}  // namespace

ConeAtlas cone_types(const CayleyBall& b, int rho) {
    if (rho < 1) throw ValidationError("cone data radius must be >= 1");
    if (rho > b.radius) throw ValidationError("ball radius below the cone data radius");
    RelatorIndex idx(b.pres);
    const int lookahead = idx.empty() ? 0 : 2;
    std::size_t cap = geodesic_validity_cap(idx);

    ConeAtlas atlas;
    atlas.rho = rho;
    atlas.small_count = b.sphere_end(rho);
    int H = std::min(b.radius, b.full_until);
    // typed elements g need products |g| + lookahead + rho within the cap
    int max_norm = H;
    if ((std::size_t)max_norm + lookahead + rho + 1 > cap)
        max_norm = (int)(cap - lookahead - rho - 1);
    if (max_norm < 2)
        throw ValidationError("relators too short for word-based cone typing");
    atlas.max_typed_norm = std::min(max_norm, H - 1);
    atlas.type_of.assign(b.size(), -1);

    std::vector<Word> small_words(atlas.small_count);
    for (std::uint32_t h = 0; h < atlas.small_count; ++h) small_words[h] = b.word_of(h);
    TypeEngine eng(idx, b.nl, lookahead, small_words);

    std::uint32_t typed_end = b.sphere_end(atlas.max_typed_norm);
    for (std::uint32_t g = 0; g < typed_end; ++g)
        atlas.type_of[g] = eng.type_of(b.word_of(g), lookahead);

    int T = (int)eng.ids[lookahead].size();
    // representative word per type, in id order
    std::vector<Word> rep(T);
    std::vector<char> have(T, 0);
    atlas.first_seen.assign(T, -1);
    for (std::uint32_t g = 0; g < typed_end; ++g) {
        int t = atlas.type_of[g];
        if (!have[t]) {
            have[t] = 1;
            rep[t] = b.word_of(g);
            atlas.first_seen[t] = b.norms[g];
        }
    }
    atlas.type_vectors.resize(T);
    atlas.extends.assign(T, std::vector<char>(b.nl, 0));
    for (int t = 0; t < T; ++t) {
        if (!have[t]) continue;  // classes seen only as lookahead scaffolding
        atlas.type_vectors[t] = eng.profiles[eng.profile_of_type[t]];
        for (int s = 0; s < b.nl; ++s) atlas.extends[t][s] = atlas.type_vectors[t][1 + s];
    }

    // transitions from one representative per type (valid since the class
    // determines child classes); verified exhaustively below
    atlas.transitions.assign(T, std::vector<int>(b.nl, -1));
    bool inventory_closed = true;
    for (int t = 0; t < T; ++t) {
        if (!have[t]) continue;
        for (int s = 0; s < b.nl; ++s) {
            if (!atlas.extends[t][s]) continue;
            Word c = rep[t];
            c.push_back((int8_t)s);
            if (c.size() + lookahead + rho > cap) {
                inventory_closed = false;
                continue;
            }
            int tc = eng.type_of(c, lookahead);
            atlas.transitions[t][s] = tc;
            if (tc >= (int)have.size() || !have[tc]) inventory_closed = false;
        }
    }
    // determinism of the table over all elements whose children are typed
    for (std::uint32_t g = 0; g < b.sphere_end(std::max(atlas.max_typed_norm - 1, 0)); ++g) {
        int tg = atlas.type_of[g];
        for (int s = 0; s < b.nl; ++s) {
            if (!atlas.extends[tg][s]) continue;
            std::uint32_t c = b.neighbor(g, s);
            if (c >= b.size()) throw std::logic_error("missing geodesic child edge");
            if (atlas.transitions[tg][s] != atlas.type_of[c])
                throw ValidationError(
                    "cone type transition is not deterministic; increase rho or lookahead");
        }
    }
    // transition targets first seen beyond the typed horizon are scaffolding:
    // no reliable outgoing data, indeterminate cones
    T = (int)eng.ids[lookahead].size();
    have.resize(T, 0);
    atlas.first_seen.resize(T, atlas.max_typed_norm + 1);
    atlas.type_vectors.resize(T);
    atlas.extends.resize(T, std::vector<char>(b.nl, 0));
    atlas.transitions.resize(T, std::vector<int>(b.nl, -1));
    atlas.table_closed = inventory_closed;

    // infinite-cone flags: a type is infinite iff it reaches a cycle in the
    // transition graph; unknown or scaffold successors are indeterminate
    std::vector<int> state(T, 0);  // 0 unvisited, 1 on stack, 2 done
    std::vector<std::int8_t> result(T, 0);
    std::vector<std::pair<int, int>> stack;
    for (int t0 = 0; t0 < T; ++t0) {
        if (state[t0] || !have[t0]) continue;
        stack.push_back({t0, 0});
        state[t0] = 1;
        while (!stack.empty()) {
            auto& [t, si] = stack.back();
            if (si >= b.nl) {
                state[t] = 2;
                stack.pop_back();
                continue;
            }
            int s = si++;
            if (!atlas.extends[t][s]) continue;
            int nt = atlas.transitions[t][s];
            if (nt == -1 || !have[nt]) {
                if (result[t] != 1) result[t] = 2;  // unknown successor
                continue;
            }
            if (state[nt] == 1) {
                result[t] = 1;  // found a cycle through the stack
            } else if (state[nt] == 0) {
                stack.push_back({nt, 0});
                state[nt] = 1;
            } else {
                if (result[nt] == 1)
                    result[t] = 1;
                else if (result[nt] == 2 && result[t] != 1)
                    result[t] = 2;
            }
        }
    }
    // propagate liveness to convergence (cycle membership spreads backwards)
    for (bool changed = true; changed;) {
        changed = false;
        for (int t = 0; t < T; ++t) {
            if (!have[t]) continue;
            for (int s = 0; s < b.nl; ++s) {
                if (!atlas.extends[t][s]) continue;
                int nt = atlas.transitions[t][s];
                std::int8_t want;
                if (nt == -1 || !have[nt])
                    want = 2;
                else
                    want = result[nt] == 1 ? 1 : (result[nt] == 2 ? 2 : 0);
                if (want == 1 && result[t] != 1) {
                    result[t] = 1;
                    changed = true;
                } else if (want == 2 && result[t] == 0) {
                    result[t] = 2;
                    changed = true;
                }
            }
        }
    }
    for (int t = 0; t < T; ++t)
        if (!have[t]) result[t] = 2;
    atlas.cone_flag = result;
    atlas.observed.assign(have.begin(), have.end());
    return atlas;
}

std::uint32_t successor(const CayleyBall& b, std::uint32_t g) {
    if (g == 0) throw DomainError("the identity has no successor");
    int n = b.norms[g];
    for (int s = 0; s < b.nl; ++s) {
        std::uint32_t t = b.neighbor(g, s);
        if (t < b.size() && (int)b.norms[t] == n - 1) return t;
    }
    throw std::logic_error("element with no norm-decreasing neighbor");
}

namespace {

// cycle reachability in the pair automaton (type, type, relative element)
struct PairAutomaton {
    const CayleyBall& b;
    const ConeAtlas& atlas;
    int two_delta;
    std::uint32_t rel_count;                      // elements with norm <= two_delta
    std::vector<std::uint32_t> letter_elem;
    std::vector<std::vector<std::uint32_t>> left_mult;  // [letter][rel] -> element
    std::unordered_map<std::uint64_t, std::int8_t> memo;  // 1 live, 0 dead, 2 unknown-hit
    bool incomplete = false;

    PairAutomaton(const CayleyBall& bb, const ConeAtlas& at, int td)
        : b(bb), atlas(at), two_delta(td) {
        rel_count = b.sphere_end(two_delta);
        letter_elem.resize(b.nl);
        for (int s = 0; s < b.nl; ++s) letter_elem[s] = b.neighbor(0, s);
        left_mult.assign(b.nl, std::vector<std::uint32_t>(rel_count, CayleyBall::kOutside));
        for (int s = 0; s < b.nl; ++s)
            for (std::uint32_t x = 0; x < rel_count; ++x)
                left_mult[s][x] = b.walk_from(letter_elem[s], b.word_of(x));
    }

    std::uint64_t key(int t1, int t2, std::uint32_t rel) const {
        return ((std::uint64_t)t1 * atlas.types() + t2) * rel_count + rel;
    }

    // relative element after extending by (s, t); kOutside when it leaves the
    // 2-delta ball
    std::uint32_t step_rel(int s, std::uint32_t rel, int t) const {
        std::uint32_t u = left_mult[s ^ 1][rel];
        if (u >= b.size()) return CayleyBall::kOutside;
        std::uint32_t v = b.neighbor(u, t);
        if (v >= b.size()) return CayleyBall::kOutside;
        if ((int)b.norms[v] > two_delta) return CayleyBall::kOutside;
        return v;
    }

    bool live(int t1, int t2, std::uint32_t rel) {
        struct Frame {
            int t1, t2;
            std::uint32_t rel;
            int s, t;
        };
        std::uint64_t k0 = key(t1, t2, rel);
        auto it = memo.find(k0);
        if (it != memo.end()) return it->second == 1;
        // DFS; an edge into the gray stack closes a cycle, which makes every
        // state still on the stack live
        std::vector<Frame> stack{{t1, t2, rel, 0, 0}};
        std::set<std::uint64_t> on_stack{k0};
        memo[k0] = 0;
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.s >= b.nl) {
                on_stack.erase(key(f.t1, f.t2, f.rel));
                stack.pop_back();
                continue;
            }
            int s = f.s, t = f.t;
            if (++f.t >= b.nl) {
                f.t = 0;
                ++f.s;
            }
            if (!atlas.extends[f.t1][s] || !atlas.extends[f.t2][t]) continue;
            int n1 = atlas.transitions[f.t1][s], n2 = atlas.transitions[f.t2][t];
            if (n1 == -1 || n2 == -1 || !atlas.observed[n1] || !atlas.observed[n2]) {
                incomplete = true;
                continue;
            }
            std::uint32_t nrel = step_rel(s, f.rel, t);
            if (nrel == CayleyBall::kOutside) continue;
            std::uint64_t nk = key(n1, n2, nrel);
            auto mit = memo.find(nk);
            if (mit != memo.end()) {
                if (mit->second == 1 || on_stack.count(nk)) {
                    for (auto kk : on_stack) memo[kk] = 1;
                    return true;
                }
                continue;
            }
            memo[nk] = 0;
            on_stack.insert(nk);
            stack.push_back({n1, n2, nrel, 0, 0});
        }
        return false;
    }
};

}  // namespace

int HorosphereGraph::degree_max() const {
    std::vector<int> deg(verts.size(), 0);
    for (auto [u, v] : edges) {
        deg[u]++;
        deg[v]++;
    }
    int m = 0;
    for (int d : deg) m = std::max(m, d);
    return m;
}

HorosphereGraph horosphere_graph(const CayleyBall& b, const ConeAtlas& atlas, int n,
                                 int two_delta) {
    if (n > atlas.max_typed_norm)
        throw ValidationError("level exceeds the typed radius; increase the ball radius");
    if (two_delta + 2 > b.radius)
        throw ValidationError("ball radius too small for the fellow-traveler automaton");
    RelatorIndex relidx(b.pres);
    if ((std::size_t)n + two_delta > geodesic_validity_cap(relidx))
        throw ValidationError("level plus fellow-traveler radius exceeds the word oracle cap");
    HorosphereGraph g;
    g.level = n;
    g.two_delta = two_delta;
    for (std::uint32_t v = b.sphere_begin(n); v < b.sphere_end(n); ++v) {
        if (atlas.cone_flag[atlas.type_of[v]] == 2)
            throw ValidationError("indeterminate cone flag; increase the ball radius");
        if (atlas.cone_flag[atlas.type_of[v]] == 1) g.verts.push_back(v);
    }
    for (auto v : g.verts) g.labels.push_back(b.name_of(v));
    auto index_of = [&](std::uint32_t id) {
        auto it = std::lower_bound(g.verts.begin(), g.verts.end(), id);
        return it != g.verts.end() && *it == id ? (int)(it - g.verts.begin()) : -1;
    };

    PairAutomaton pa(b, atlas, two_delta);
    for (int i = 0; i < (int)g.verts.size(); ++i) {
        std::uint32_t u = g.verts[i];
        Word wu = b.word_of(u);
        for (std::uint32_t rel = 1; rel < pa.rel_count; ++rel) {
            // locate u * rel by word reduction; the ball may be much smaller
            // than norm(u) + norm(rel)
            Word p = wu;
            Word wr = b.word_of(rel);
            p.insert(p.end(), wr.begin(), wr.end());
            p = deep_reduce_impl(relidx, p);
            if ((int)p.size() != n) continue;
            std::uint32_t h = b.walk(p);
            if (h >= b.size() || h <= u) continue;
            int j = index_of(h);
            if (j < 0) continue;
            if (pa.live(atlas.type_of[u], atlas.type_of[h], rel))
                g.edges.push_back({i, j});
        }
    }
    std::sort(g.edges.begin(), g.edges.end());
    g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
    g.automaton_complete = !pa.incomplete;

    if (n >= 1) {
        g.succ.resize(g.verts.size());
        std::vector<std::uint32_t> below;
        for (std::uint32_t v = b.sphere_begin(n - 1); v < b.sphere_end(n - 1); ++v)
            if (atlas.cone_flag[atlas.type_of[v]] == 1) below.push_back(v);
        for (std::size_t i = 0; i < g.verts.size(); ++i) {
            std::uint32_t p = successor(b, g.verts[i]);
            auto it = std::lower_bound(below.begin(), below.end(), p);
            if (it == below.end() || *it != p)
                throw std::logic_error("successor left the horosphere vertex set");
            g.succ[i] = (int)(it - below.begin());
        }
    }
    return g;
}

TowerReport tower_report(const CayleyBall& b, const std::vector<HorosphereGraph>& levels,
                         int two_delta, int cone_type_count, std::uint64_t seed) {
    TowerReport rep;
    rep.levels.resize(levels.size());
    for (std::size_t n = 0; n < levels.size(); ++n) {
        const auto& g = levels[n];
        auto& lc = rep.levels[n];
        lc.level = g.level;
        lc.vertices = g.verts.size();
        lc.edges = g.edges.size();
        // connectivity
        if (!g.verts.empty()) {
            std::vector<std::vector<int>> adj(g.verts.size());
            for (auto [u, v] : g.edges) {
                adj[u].push_back(v);
                adj[v].push_back(u);
            }
            std::vector<char> vis(g.verts.size(), 0);
            std::deque<int> q{0};
            vis[0] = 1;
            std::size_t cnt = 1;
            while (!q.empty()) {
                int u = q.front();
                q.pop_front();
                for (int v : adj[u])
                    if (!vis[v]) {
                        vis[v] = 1;
                        ++cnt;
                        q.push_back(v);
                    }
            }
            lc.connected = cnt == g.verts.size();
        }
        if (n == 0) continue;
        const auto& below = levels[n - 1];
        std::set<std::pair<int, int>> below_edges(below.edges.begin(), below.edges.end());
        for (auto [u, v] : g.edges) {
            int pu = g.succ[u], pv = g.succ[v];
            if (pu == pv) {
                lc.edges_to_point++;
            } else {
                auto e = std::minmax(pu, pv);
                if (below_edges.count({e.first, e.second}))
                    lc.edges_to_edge++;
                else
                    lc.contraction_ok = false;
            }
        }
        std::vector<int> fibre(below.verts.size(), 0);
        for (int p : g.succ) fibre[p]++;
        lc.fibre_min = fibre.empty() ? 0 : *std::min_element(fibre.begin(), fibre.end());
        lc.fibre_max = fibre.empty() ? 0 : *std::max_element(fibre.begin(), fibre.end());
    }

    // halving inequality: least L' valid on sampled pairs across levels
    std::mt19937_64 rng(seed);
    auto graph_dist = [&](const HorosphereGraph& g, int src, int cap) {
        std::vector<int> dist(g.verts.size(), -1);
        std::vector<std::vector<int>> adj(g.verts.size());
        for (auto [u, v] : g.edges) {
            adj[u].push_back(v);
            adj[v].push_back(u);
        }
        std::deque<int> q{src};
        dist[src] = 0;
        while (!q.empty()) {
            int u = q.front();
            q.pop_front();
            if (dist[u] >= cap) continue;
            for (int v : adj[u])
                if (dist[v] < 0) {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
        }
        return dist;
    };
    int bound = std::max(1, cone_type_count * cone_type_count);
    int found = -1;
    for (int L = 1; L <= bound && found < 0; ++L) {
        bool ok = true;
        for (std::size_t n = (std::size_t)L; n < levels.size() && ok; ++n) {
            const auto& g = levels[n];
            if (g.verts.empty()) continue;
            std::uniform_int_distribution<int> pick(0, (int)g.verts.size() - 1);
            for (int trial = 0; trial < 40 && ok; ++trial) {
                int i = pick(rng);
                auto dist = graph_dist(g, i, 16);
                for (int j = 0; j < (int)g.verts.size() && ok; ++j) {
                    if (dist[j] <= 0) continue;
                    int pi = i, pj = j;
                    for (int k = 0; k < L; ++k) {
                        pi = levels[n - k].succ[pi];
                        pj = levels[n - k].succ[pj];
                    }
                    if (pi == pj) continue;
                    auto dl = graph_dist(levels[n - L], pi, 16);
                    int dd = dl[pj];
                    if (dd < 0 || dd > (dist[j] + 1) / 2) ok = false;
                }
            }
        }
        if (ok) found = L;
    }
    rep.contraction_power = found;
    rep.halving_ok = found > 0;

    if (found > 0) {
        rep.growth_ok = true;
        double C = std::pow((double)b.nl, (double)two_delta);
        double D = std::pow((double)b.nl, (double)found);
        for (const auto& g : levels) {
            if (g.verts.empty()) continue;
            for (int k = 0; (1 << k) <= 16; ++k) {
                std::size_t nk = 0;
                std::uniform_int_distribution<int> pick(0, (int)g.verts.size() - 1);
                for (int trial = 0; trial < 10; ++trial) {
                    auto dist = graph_dist(g, pick(rng), 1 << k);
                    std::size_t cnt = 0;
                    for (int d : dist)
                        if (d >= 0 && d <= (1 << k)) ++cnt;
                    nk = std::max(nk, cnt);
                }
                if ((double)nk > C * std::pow(D, (double)k)) rep.growth_ok = false;
            }
        }
    }
    return rep;
}

CayleyBall bipartite_double(const CayleyBall& b) {
    bool all_even = true;
    for (const Word& r : b.pres.relators)
        if (r.size() % 2) all_even = false;
    if (all_even) return b;

    int R = b.radius - 1;
    if (R < 1) throw ValidationError("ball too small to build the double cover");
    CayleyBall c;
    c.pres = b.pres;
    c.radius = R;
    c.nl = b.nl;
    c.full_until = R;
    // BFS over (element, parity)
    std::unordered_map<std::uint64_t, std::uint32_t> idmap;
    auto keyof = [](std::uint32_t id, int par) {
        return ((std::uint64_t)id << 1) | (std::uint32_t)par;
    };
    auto add = [&](std::uint32_t base, int par, const Word& w) {
        c.words.push_back(pack_word(w));
        c.norms.push_back((std::uint8_t)w.size());
        c.adj.insert(c.adj.end(), c.nl, CayleyBall::kOutside);
        idmap.emplace(keyof(base, par), (std::uint32_t)(c.words.size() - 1));
        return (std::uint32_t)(c.words.size() - 1);
    };
    struct Node {
        std::uint32_t base;
        int par;
        std::uint32_t id;
    };
    std::deque<Node> q;
    add(0, 0, {});
    q.push_back({0, 0, 0});
    while (!q.empty()) {
        auto [base, par, id] = q.front();
        q.pop_front();
        int norm = c.norms[id];
        if (norm == R) continue;
        Word w = c.word_of(id);
        for (int s = 0; s < c.nl; ++s) {
            std::uint32_t nb = b.neighbor(base, s);
            if (nb >= b.size()) continue;
            if ((int)b.norms[nb] > R) continue;
            auto it = idmap.find(keyof(nb, 1 - par));
            std::uint32_t tid;
            if (it == idmap.end()) {
                Word nw = w;
                nw.push_back((int8_t)s);
                tid = add(nb, 1 - par, nw);
                q.push_back({nb, 1 - par, tid});
            } else {
                tid = it->second;
            }
            c.adj[(std::size_t)id * c.nl + s] = tid;
            c.adj[(std::size_t)tid * c.nl + (s ^ 1)] = id;
        }
    }
    // rebuild layer offsets from norms (ids are in BFS order)
    c.layer_start.assign(1, 0);
    for (std::uint32_t i = 1; i < c.size(); ++i)
        while ((int)c.layer_start.size() <= c.norms[i]) c.layer_start.push_back(i);
    while ((int)c.layer_start.size() <= R + 1) c.layer_start.push_back((std::uint32_t)c.size());
    return c;
}

std::shared_ptr<tower::ExplicitTower> to_tower(const std::vector<HorosphereGraph>& levels) {
    auto t = std::make_shared<tower::ExplicitTower>();
    t->q = 0;
    t->levels.resize(levels.size());
    t->parent.resize(levels.size());
    for (std::size_t n = 0; n < levels.size(); ++n) {
        t->levels[n].size = (std::int64_t)levels[n].verts.size();
        t->levels[n].edges = levels[n].edges;
        for (auto& e : t->levels[n].edges)
            if (e.first > e.second) std::swap(e.first, e.second);
        std::sort(t->levels[n].edges.begin(), t->levels[n].edges.end());
        t->levels[n].labels = levels[n].labels;
        if (n >= 1) t->parent[n] = levels[n].succ;
    }
    return t;
}

std::string horosphere_to_dot(const HorosphereGraph& g) {
    std::string out = "graph horosphere_" + std::to_string(g.level) + " {\n";
    for (std::size_t i = 0; i < g.verts.size(); ++i)
        out += "  v" + std::to_string(i) + " [label=\"" + g.labels[i] + "\"];\n";
    for (auto [u, v] : g.edges)
        out += "  v" + std::to_string(u) + " -- v" + std::to_string(v) + ";\n";
    out += "}\n";
    return out;
}

std::string atlas_to_dot(const ConeAtlas& atlas, const Presentation& pres) {
    std::string out = "digraph cone_types {\n";
    for (int t = 0; t < atlas.types(); ++t)
        out += "  t" + std::to_string(t) + " [label=\"T" + std::to_string(t) +
               (atlas.cone_flag[t] == 1 ? " inf" : "") + "\"];\n";
    for (int t = 0; t < atlas.types(); ++t)
        for (int s = 0; s < (int)atlas.transitions[t].size(); ++s)
            if (atlas.extends[t][s] && atlas.transitions[t][s] >= 0)
                out += "  t" + std::to_string(t) + " -> t" +
                       std::to_string(atlas.transitions[t][s]) + " [label=\"" +
                       pres.letter_names[s] + "\"];\n";
    out += "}\n";
    return out;
}

}  // namespace dtile::hypgeo
