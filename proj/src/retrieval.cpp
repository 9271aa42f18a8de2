#include "dygenc/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dygenc/errors.hpp"

namespace dygenc {

void PrizedGraph::validate() const {
    if (costs.size() != edges.size()) throw ShapeError("prized graph: one cost per edge required");
    for (real p : prizes)
        if (!std::isfinite(double(p)) || p < 0) throw ConfigError("prized graph: prizes must be finite and non-negative");
    for (std::size_t e = 0; e < edges.size(); ++e) {
        if (edges[e].first >= prizes.size() || edges[e].second >= prizes.size())
            throw ShapeError("prized graph: edge endpoint out of range");
        if (!(costs[e] > 0) || !std::isfinite(double(costs[e]))) throw ConfigError("prized graph: costs must be positive");
    }
}

PrizedGraph assign_prizes(const SceneGraph& g, const std::string& query, const TextEmbedder& emb, const RetrievalOptions& opt) {
    const std::vector<real> q = emb.embed(query);
    PrizedGraph pg;
    const auto& nodes = g.nodes();
    std::vector<real> sim(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) sim[i] = cosine(q, emb.embed(nodes[i].label));
    std::vector<std::size_t> order(nodes.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (sim[a] != sim[b]) return sim[a] > sim[b];
        return nodes[a].id < nodes[b].id;
    });
    pg.prizes.assign(nodes.size(), real(0));
    for (std::size_t r = 0; r < std::min(opt.top_n, order.size()); ++r) pg.prizes[order[r]] = real(opt.top_n - r);
    for (const auto& e : g.edges()) {
        pg.edges.emplace_back(*g.index_of(e.src), *g.index_of(e.dst));
        const real s = cosine(q, emb.embed(e.predicate));
        pg.costs.push_back(std::max(opt.min_cost, opt.edge_cost - std::max(real(0), s)));
    }
    return pg;
}

real pcst_objective(const PrizedGraph& pg, const std::vector<std::size_t>& nodes, const std::vector<std::size_t>& edges) {
    real total = 0;
    for (std::size_t v : nodes) total += pg.prizes.at(v);
    for (std::size_t e : edges) total -= pg.costs.at(e);
    return total;
}

namespace {

struct Dsu {
    std::vector<std::size_t> parent;
    explicit Dsu(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    bool unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[std::max(a, b)] = std::min(a, b);
        return true;
    }
};

std::vector<std::size_t> endpoints(const PrizedGraph& pg, const std::vector<std::size_t>& edges) {
    std::vector<std::size_t> out;
    for (std::size_t e : edges) {
        out.push_back(pg.edges[e].first);
        out.push_back(pg.edges[e].second);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace

bool is_tree(const PrizedGraph& pg, const std::vector<std::size_t>& nodes, const std::vector<std::size_t>& edges) {
    if (edges.empty()) return nodes.size() <= 1;
    std::vector<std::size_t> sorted = nodes;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) return false;
    if (endpoints(pg, edges) != sorted) return false;
    if (edges.size() + 1 != sorted.size()) return false;
    Dsu d(pg.num_nodes());
    for (std::size_t e : edges)
        if (!d.unite(pg.edges[e].first, pg.edges[e].second)) return false;
    return true;
}

PcstSolution pcst_exact(const PrizedGraph& pg) {
    pg.validate();
    const std::size_t m = pg.num_edges();
    if (m > 24) throw ConfigError("pcst_exact: " + std::to_string(m) + " edges is too many for enumeration");
    PcstSolution best;
    for (std::size_t v = 0; v < pg.num_nodes(); ++v)
        if (pg.prizes[v] > best.objective) best = {{v}, {}, pg.prizes[v]};
    std::vector<std::size_t> edges;
    for (std::uint64_t mask = 1; mask < (std::uint64_t(1) << m); ++mask) {
        edges.clear();
        for (std::size_t e = 0; e < m; ++e)
            if (mask >> e & 1) edges.push_back(e);
        Dsu d(pg.num_nodes());
        bool acyclic = true;
        for (std::size_t e : edges)
            if (!d.unite(pg.edges[e].first, pg.edges[e].second)) {
                acyclic = false;
                break;
            }
        if (!acyclic) continue;
        const auto nodes = endpoints(pg, edges);
        if (nodes.size() != edges.size() + 1) continue;  // a forest with several trees
        const real obj = pcst_objective(pg, nodes, edges);
        if (obj > best.objective) best = {nodes, edges, obj};
    }
    return best;
}

namespace {

// Best subtree of a forest given by tree edge indices: f(v) = p(v) + Σ max(0, f(c) − cost).
PcstSolution best_subtree(const PrizedGraph& pg, const std::vector<std::size_t>& forest) {
    const std::size_t n = pg.num_nodes();
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);  // (neighbour, edge)
    for (std::size_t e : forest) {
        adj[pg.edges[e].first].push_back({pg.edges[e].second, e});
        adj[pg.edges[e].second].push_back({pg.edges[e].first, e});
    }
    std::vector<real> f(n, 0);
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> parent_edge(n, std::numeric_limits<std::size_t>::max());
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> children(n);
    for (std::size_t root = 0; root < n; ++root) {
        if (seen[root]) continue;
        // Iterative DFS order, then children before parents.
        std::vector<std::size_t> order{root}, stack{root};
        seen[root] = true;
        while (!stack.empty()) {
            const std::size_t v = stack.back();
            stack.pop_back();
            for (auto [w, e] : adj[v])
                if (!seen[w]) {
                    seen[w] = true;
                    parent_edge[w] = e;
                    children[v].push_back({w, e});
                    order.push_back(w);
                    stack.push_back(w);
                }
        }
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const std::size_t v = *it;
            f[v] = pg.prizes[v];
            for (auto [c, e] : children[v]) f[v] += std::max(real(0), f[c] - pg.costs[e]);
        }
    }
    PcstSolution sol;
    std::size_t top = n;
    for (std::size_t v = 0; v < n; ++v)
        if (f[v] > sol.objective) {
            sol.objective = f[v];
            top = v;
        }
    if (top == n) return {};
    std::vector<std::size_t> stack{top};
    while (!stack.empty()) {
        const std::size_t v = stack.back();
        stack.pop_back();
        sol.nodes.push_back(v);
        for (auto [c, e] : children[v])
            if (f[c] - pg.costs[e] > 0) {
                sol.edges.push_back(e);
                stack.push_back(c);
            }
    }
    std::sort(sol.nodes.begin(), sol.nodes.end());
    std::sort(sol.edges.begin(), sol.edges.end());
    sol.objective = pcst_objective(pg, sol.nodes, sol.edges);
    return sol;
}

} // namespace

PcstSolution pcst_approx(const PrizedGraph& pg) {
    pg.validate();
    const std::size_t n = pg.num_nodes(), m = pg.num_edges();
    Dsu comp(n);
    std::vector<real> budget(pg.prizes.begin(), pg.prizes.end());  // per component root
    std::vector<bool> active(n);
    for (std::size_t v = 0; v < n; ++v) active[v] = pg.prizes[v] > 0;
    std::vector<real> slack(pg.costs.begin(), pg.costs.end());
    std::vector<std::size_t> forest;
    const real eps = real(1e-12);

    for (;;) {
        // Earliest event: an edge going tight or an active component running out of prize.
        real dt = std::numeric_limits<real>::infinity();
        std::size_t tight = m;
        std::size_t dying = n;
        for (std::size_t e = 0; e < m; ++e) {
            const std::size_t a = comp.find(pg.edges[e].first), b = comp.find(pg.edges[e].second);
            if (a == b) continue;
            const int rate = int(active[a]) + int(active[b]);
            if (rate == 0) continue;
            const real t = slack[e] / real(rate);
            if (t < dt) {
                dt = t;
                tight = e;
                dying = n;
            }
        }
        for (std::size_t v = 0; v < n; ++v)
            if (comp.find(v) == v && active[v] && budget[v] < dt) {
                dt = budget[v];
                dying = v;
                tight = m;
            }
        if (!std::isfinite(double(dt))) break;

        for (std::size_t e = 0; e < m; ++e) {
            const std::size_t a = comp.find(pg.edges[e].first), b = comp.find(pg.edges[e].second);
            if (a != b) slack[e] -= dt * real(int(active[a]) + int(active[b]));
        }
        for (std::size_t v = 0; v < n; ++v)
            if (comp.find(v) == v && active[v]) budget[v] -= dt;

        if (dying < n) {
            active[dying] = false;
            budget[dying] = 0;
        } else {
            const std::size_t a = comp.find(pg.edges[tight].first), b = comp.find(pg.edges[tight].second);
            const real merged = std::max(real(0), budget[a]) + std::max(real(0), budget[b]);
            comp.unite(a, b);
            const std::size_t r = comp.find(a);
            budget[r] = merged;
            active[r] = merged > eps;
            forest.push_back(tight);
        }
    }
    return best_subtree(pg, forest);
}

PcstSolution pcst_solve(const PrizedGraph& pg, std::size_t exact_limit) {
    return pg.num_edges() <= exact_limit ? pcst_exact(pg) : pcst_approx(pg);
}

std::vector<real> score_frames(const DynamicGraph& dg, const std::string& query, const TextEmbedder& emb,
                               const RetrievalOptions& opt) {
    std::vector<real> scores;
    for (const auto& f : dg.frames()) {
        if (f.graph.empty()) {
            scores.push_back(0);
            continue;
        }
        scores.push_back(pcst_solve(assign_prizes(f.graph, query, emb, opt), opt.exact_limit).objective);
    }
    return scores;
}

DynamicGraph retrieve_frames(const DynamicGraph& dg, const std::string& query, std::size_t budget, const TextEmbedder& emb,
                             const RetrievalOptions& opt) {
    if (budget == 0) throw ConfigError("retrieval budget must be at least 1");
    if (budget >= dg.size()) return dg;
    const std::vector<real> scores = score_frames(dg, query, emb, opt);
    std::vector<std::size_t> order(dg.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(budget);
    std::sort(order.begin(), order.end());
    std::vector<Frame> kept;
    for (std::size_t i : order) kept.push_back(dg[i]);
    return DynamicGraph(std::move(kept));
}

} // namespace dygenc
