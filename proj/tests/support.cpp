#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace dygenc::oracle {

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed, double scale) {
    Tensor t(std::move(shape));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, scale);
    for (auto& x : t.values()) x = real(n(rng));
    return t;
}

ad::Var probe(const ad::Var& y, std::uint64_t seed) {
    return ad::sum(ad::mul(y, ad::constant(random_tensor(y.value().shape(), seed))));
}

std::vector<ad::Var> leaves_of(ParameterSet& ps) {
    std::vector<ad::Var> v;
    for (auto& p : ps.all()) v.push_back(p.var);
    return v;
}

EmbeddedGraph random_embedded(std::size_t nodes, std::size_t edges, std::size_t node_w, std::size_t edge_w,
                              std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    EmbeddedGraph g;
    g.node_matrix = random_tensor({nodes, node_w}, seed + 1);
    g.edge_matrix = random_tensor({edges, edge_w}, seed + 2);
    for (std::size_t e = 0; e < edges; ++e) {
        std::size_t u = rng() % nodes, v = rng() % nodes;
        if (u == v) v = (v + 1) % nodes;
        g.src.push_back(u);
        g.dst.push_back(v);
    }
    return g;
}

EmbeddedGraph permute_nodes(const EmbeddedGraph& g, const std::vector<std::size_t>& perm) {
    EmbeddedGraph p = g;
    const std::size_t w = g.node_matrix.cols();
    for (std::size_t i = 0; i < g.num_nodes(); ++i)
        for (std::size_t j = 0; j < w; ++j) p.node_matrix.at(perm[i], j) = g.node_matrix.at(i, j);
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        p.src[e] = perm[g.src[e]];
        p.dst[e] = perm[g.dst[e]];
    }
    return p;
}

GradCheck grad_check(const std::function<ad::Var()>& f, const std::vector<ad::Var>& leaves, double h,
                     std::size_t per_tensor, std::uint64_t seed, double floor) {
    for (const auto& v : leaves) v.node()->grad = Tensor(v.value().shape());
    ad::Var out = f();
    ad::backward(out);
    std::vector<Tensor> analytic;
    for (const auto& v : leaves) analytic.push_back(v.grad());

    std::mt19937_64 rng(seed);
    GradCheck r;
    ad::NoGradGuard guard;
    for (std::size_t p = 0; p < leaves.size(); ++p) {
        Tensor& x = leaves[p].node()->value;
        std::vector<std::size_t> idx(x.size());
        std::iota(idx.begin(), idx.end(), 0);
        if (per_tensor && per_tensor < idx.size()) {
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(per_tensor);
        }
        for (std::size_t i : idx) {
            const real saved = x[i];
            x[i] = saved + real(h);
            const double up = f().value().item();
            x[i] = saved - real(h);
            const double down = f().value().item();
            x[i] = saved;
            const double numeric = (up - down) / (2 * h);
            const double a = analytic[p][i];
            const double diff = std::abs(a - numeric);
            r.max_abs = std::max(r.max_abs, diff);
            const double rel = diff / std::max({std::abs(a), std::abs(numeric), floor});
            if (rel > r.max_rel) {
                r.max_rel = rel;
                r.worst_leaf = p;
                r.worst_analytic = a;
                r.worst_numeric = numeric;
            }
            ++r.checked;
        }
    }
    return r;
}

EigenDecomposition jacobi_eigen(std::vector<std::vector<double>> a, double tol) {
    const std::size_t n = a.size();
    std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) v[i][i] = 1;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
        if (off < tol * tol) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
                const double c = 1 / std::sqrt(t * t + 1), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x][x] < a[y][y]; });
    EigenDecomposition e;
    for (std::size_t i : order) {
        e.values.push_back(a[i][i]);
        std::vector<double> col(n);
        for (std::size_t k = 0; k < n; ++k) col[k] = v[k][i];
        e.vectors.push_back(col);
    }
    return e;
}

namespace {

std::size_t find(std::vector<std::size_t>& p, std::size_t x) {
    while (p[x] != x) x = p[x] = p[p[x]];
    return x;
}

} // namespace

real brute_pcst(const PrizedGraph& pg) {
    const std::size_t n = pg.num_nodes();
    std::vector<std::size_t> by_cost(pg.num_edges());
    std::iota(by_cost.begin(), by_cost.end(), 0);
    std::stable_sort(by_cost.begin(), by_cost.end(), [&](std::size_t a, std::size_t b) { return pg.costs[a] < pg.costs[b]; });
    real best = 0;
    for (std::uint64_t mask = 1; mask < (std::uint64_t(1) << n); ++mask) {
        real prize = 0;
        std::size_t members = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask >> i & 1) {
                prize += pg.prizes[i];
                ++members;
            }
        if (prize <= best) continue;
        // Kruskal on the induced subgraph.
        std::vector<std::size_t> parent(n);
        std::iota(parent.begin(), parent.end(), 0);
        real cost = 0;
        std::size_t joined = 1;
        for (std::size_t e : by_cost) {
            const auto [u, v] = pg.edges[e];
            if (!(mask >> u & 1) || !(mask >> v & 1)) continue;
            const std::size_t a = find(parent, u), b = find(parent, v);
            if (a == b) continue;
            parent[a] = b;
            cost += pg.costs[e];
            ++joined;
        }
        if (joined != members) continue;
        best = std::max(best, prize - cost);
    }
    return best;
}

PrizedGraph random_prized_graph(std::size_t nodes, std::size_t edges, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> prize(0.0, 4.0), cost(0.05, 3.0);
    PrizedGraph pg;
    for (std::size_t i = 0; i < nodes; ++i) pg.prizes.push_back(real(prize(rng) * (rng() % 4 == 0 ? 0.0 : 1.0)));
    std::set<std::pair<std::size_t, std::size_t>> used;
    const std::size_t cap = nodes * (nodes - 1) / 2;
    while (pg.edges.size() < std::min(edges, cap)) {
        std::size_t u = rng() % nodes, v = rng() % nodes;
        if (u == v) continue;
        if (u > v) std::swap(u, v);
        if (!used.insert({u, v}).second) continue;
        pg.edges.push_back({u, v});
        pg.costs.push_back(real(cost(rng)));
    }
    return pg;
}

SceneGraph random_scene_graph(std::size_t nodes, std::size_t edges, std::uint64_t seed) {
    static const std::vector<std::string> labels = {"person", "cup", "table", "door", "book", "chair", "shelf", "bag"};
    static const std::vector<std::string> preds = {"on", "near", "holds", "inside", "looks_at"};
    std::mt19937_64 rng(seed);
    std::vector<GraphNode> ns;
    for (std::size_t i = 0; i < nodes; ++i) ns.push_back({int(i * 3 + 1), labels[rng() % labels.size()]});
    std::vector<GraphEdge> es;
    std::set<std::pair<int, int>> used;
    for (std::size_t tries = 0; es.size() < edges && tries < 1000 && nodes > 1; ++tries) {
        const int u = ns[rng() % nodes].id, v = ns[rng() % nodes].id;
        if (u == v || !used.insert({u, v}).second) continue;
        es.push_back({u, v, preds[rng() % preds.size()]});
    }
    return SceneGraph(ns, es);
}

} // namespace dygenc::oracle
