#include "dygenc/graph_encoder.hpp"

#include "dygenc/errors.hpp"

namespace dygenc {

void GraphBatch::append(const EmbeddedGraph& g) {
    const std::size_t base = offsets.back();
    if (g.num_nodes()) {
        if (node_width == 0) node_width = g.node_matrix.cols();
        if (g.node_matrix.cols() != node_width) throw ShapeError("GraphBatch: node width mismatch");
        node_data.insert(node_data.end(), g.node_matrix.values().begin(), g.node_matrix.values().end());
    }
    if (g.num_edges()) {
        if (edge_width == 0) edge_width = g.edge_matrix.cols();
        if (g.edge_matrix.cols() != edge_width) throw ShapeError("GraphBatch: edge width mismatch");
        edge_data.insert(edge_data.end(), g.edge_matrix.values().begin(), g.edge_matrix.values().end());
    }
    for (std::size_t k = 0; k < g.num_edges(); ++k) {
        src.push_back(base + g.src[k]);
        dst.push_back(base + g.dst[k]);
    }
    offsets.push_back(base + g.num_nodes());
}

GraphEncoder::GraphEncoder(ParameterSet& ps, const GraphEncoderConfig& cfg, const std::string& prefix) : cfg_(cfg) {
    if (cfg.num_heads == 0 || cfg.hidden_dim % cfg.num_heads != 0)
        throw ConfigError("graph encoder: heads must divide hidden_dim");
    if (cfg.num_layers == 0) throw ConfigError("graph encoder: need at least one layer");
    const auto g = ParamGroup::encoder;
    std::size_t in = cfg.input_dim;
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        const std::string p = prefix + ".layer" + std::to_string(l);
        layers_.push_back({Linear(ps, p + ".query", g, in, cfg.hidden_dim),
                           Linear(ps, p + ".key", g, in, cfg.hidden_dim),
                           Linear(ps, p + ".value", g, in, cfg.hidden_dim),
                           Linear(ps, p + ".edge", g, cfg.edge_dim, cfg.hidden_dim, false),
                           Linear(ps, p + ".root", g, in, cfg.hidden_dim),
                           LayerNorm(ps, p + ".norm", g, cfg.hidden_dim)});
        in = cfg.hidden_dim;
    }
    bypass_ = Linear(ps, prefix + ".bypass", g, cfg.input_dim, cfg.hidden_dim);
}

namespace {

void check_batch(const GraphBatch& batch, const GraphEncoderConfig& cfg) {
    if (batch.num_graphs() == 0) throw EmptyGraphError("graph batch holds no graphs");
    for (std::size_t s = 0; s < batch.num_graphs(); ++s)
        if (batch.offsets[s + 1] == batch.offsets[s]) throw EmptyGraphError("graph #" + std::to_string(s) + " has no nodes");
    if (batch.node_width != cfg.input_dim)
        throw ShapeError("graph encoder expects node width " + std::to_string(cfg.input_dim) + ", got " +
                         std::to_string(batch.node_width));
    if (!batch.src.empty() && batch.edge_width != cfg.edge_dim)
        throw ShapeError("graph encoder expects edge width " + std::to_string(cfg.edge_dim) + ", got " +
                         std::to_string(batch.edge_width));
}

} // namespace

ad::Var GraphEncoder::encode(const GraphBatch& batch) const {
    check_batch(batch, cfg_);
    const std::size_t n = batch.offsets.back();
    const std::size_t ne = batch.src.size();

    // Key rows: [incoming edges..., self rows...]; node i sees its edges then itself.
    std::vector<std::vector<std::size_t>> incoming(n);
    for (std::size_t e = 0; e < ne; ++e) incoming[batch.dst[e]].push_back(e);
    ad::AttentionPattern pattern;
    std::vector<std::size_t> keys;
    for (std::size_t i = 0; i < n; ++i) {
        keys = incoming[i];
        keys.push_back(ne + i);
        pattern.add_query(keys);
    }

    ad::Var x = ad::constant(batch.nodes());
    ad::Var e = ne ? ad::constant(batch.edges()) : ad::Var();
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& L = layers_[l];
        ad::Var q = L.query(x);
        ad::Var k = L.key(x);
        ad::Var v = L.value(x);
        ad::Var keys_all = k, values_all = v;
        if (ne) {
            ad::Var ee = L.edge(e);
            ad::Var ek = ad::add(ad::gather_rows(k, batch.src), ee);
            ad::Var ev = ad::add(ad::gather_rows(v, batch.src), ee);
            const ad::Var kparts[] = {ek, k};
            const ad::Var vparts[] = {ev, v};
            keys_all = ad::concat_rows(kparts);
            values_all = ad::concat_rows(vparts);
        }
        ad::Var att = ad::attention(q, keys_all, values_all, pattern, cfg_.num_heads);
        ad::Var h = L.norm(ad::add(L.root(x), att));
        x = (l + 1 < layers_.size()) ? ad::gelu(h) : h;
    }
    return ad::segment_mean(x, batch.offsets);
}

ad::Var GraphEncoder::encode_without_message_passing(const GraphBatch& batch) const {
    check_batch(batch, cfg_);
    return ad::segment_mean(bypass_(ad::constant(batch.nodes())), batch.offsets);
}

ad::Var GraphEncoder::encode_graph(const EmbeddedGraph& g) const {
    GraphBatch b;
    b.append(g);
    return encode(b);
}

} // namespace dygenc
