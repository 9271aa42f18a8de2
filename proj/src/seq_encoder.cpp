#include "dygenc/seq_encoder.hpp"

#include <atomic>
#include <cmath>
#include <numeric>
#include <ostream>

#include "dygenc/errors.hpp"
#include "dygenc/log.hpp"

namespace dygenc {

const char* to_string(TemporalKind k) {
    switch (k) {
    case TemporalKind::te: return "TE";
    case TemporalKind::ape: return "APE";
    case TemporalKind::rope: return "RoPE";
    }
    return "?";
}

TemporalKind temporal_kind_from_string(const std::string& s) {
    std::string u;
    for (char c : s) u.push_back(char(std::toupper(static_cast<unsigned char>(c))));
    if (u == "TE") return TemporalKind::te;
    if (u == "APE") return TemporalKind::ape;
    if (u == "ROPE") return TemporalKind::rope;
    throw ConfigError("unknown temporal encoding '" + s + "' (expected TE, APE or RoPE)");
}

Tensor sinusoid_table(std::span<const std::size_t> t, std::size_t dim) {
    Tensor out = Tensor::matrix(t.size(), dim);
    for (std::size_t r = 0; r < t.size(); ++r)
        for (std::size_t c = 0; c < dim; ++c) {
            const double freq = std::pow(kRopeBase, -double(c - c % 2) / double(dim));
            const double a = double(t[r]) * freq;
            out.at(r, c) = real(c % 2 == 0 ? std::sin(a) : std::cos(a));
        }
    return out;
}

ad::Var rope_rotate(const ad::Var& x, std::span<const std::size_t> t, double base) {
    const Tensor& X = x.value();
    const std::size_t n = X.rows(), d = X.cols();
    if (d % 2 != 0) throw ConfigError("RoPE needs an even token width, got " + std::to_string(d));
    if (t.size() != n) throw ShapeError("rope_rotate: " + std::to_string(t.size()) + " positions for " + std::to_string(n) + " rows");
    auto cs = std::make_shared<std::vector<real>>(n * d);  // (cos, sin) per row and pair
    Tensor out(X.shape());
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < d / 2; ++j) {
            const double theta = std::pow(base, -2.0 * double(j) / double(d));
            const double a = double(t[r]) * theta;
            const real c = real(std::cos(a)), s = real(std::sin(a));
            (*cs)[r * d + 2 * j] = c;
            (*cs)[r * d + 2 * j + 1] = s;
            const real x0 = X[r * d + 2 * j], x1 = X[r * d + 2 * j + 1];
            out[r * d + 2 * j] = x0 * c - x1 * s;
            out[r * d + 2 * j + 1] = x0 * s + x1 * c;
        }
    return ad::make_result(std::move(out), {x}, [cs, n, d](ad::Node& self) {
        if (!self.parents[0]->requires_grad) return;
        Tensor& g = self.parents[0]->ensure_grad();
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = 0; j < d / 2; ++j) {
                const real c = (*cs)[r * d + 2 * j], s = (*cs)[r * d + 2 * j + 1];
                const real g0 = self.grad[r * d + 2 * j], g1 = self.grad[r * d + 2 * j + 1];
                g[r * d + 2 * j] += g0 * c + g1 * s;
                g[r * d + 2 * j + 1] += -g0 * s + g1 * c;
            }
    });
}

ad::Var temporal_cosine(std::span<const std::size_t> t, const ad::Var& omega, const ad::Var& phi) {
    const std::size_t d = omega.value().size();
    if (phi.value().size() != d) throw ShapeError("temporal_cosine: omega/phi length mismatch");
    const std::size_t n = t.size();
    auto sines = std::make_shared<std::vector<real>>(n * d);
    auto ts = std::make_shared<std::vector<std::size_t>>(t.begin(), t.end());
    Tensor out = Tensor::matrix(n, d);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) {
            const real a = real(t[r]) * omega.value()[c] + phi.value()[c];
            out[r * d + c] = std::cos(a);
            (*sines)[r * d + c] = std::sin(a);
        }
    return ad::make_result(std::move(out), {omega, phi}, [sines, ts, d](ad::Node& self) {
        const std::size_t n = ts->size();
        ad::Node& om = *self.parents[0];
        ad::Node& ph = *self.parents[1];
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) {
                const real g = -self.grad[r * d + c] * (*sines)[r * d + c];
                if (om.requires_grad) om.ensure_grad()[c] += g * real((*ts)[r]);
                if (ph.requires_grad) ph.ensure_grad()[c] += g;
            }
    });
}

TemporalEncoder::TemporalEncoder(ParameterSet& ps, std::size_t dim, TemporalKind kind, const std::string& prefix)
    : dim_(dim), kind_(kind) {
    if (kind == TemporalKind::rope && dim % 2 != 0)
        throw ConfigError("RoPE needs an even token width, got " + std::to_string(dim));
    if (kind == TemporalKind::te) {
        // Starts out as the APE sinusoid: cos(tω − π/2) = sin(tω) on even columns.
        omega_ = ps.constant(prefix + ".omega", ParamGroup::encoder, {dim}, real(0));
        phi_ = ps.constant(prefix + ".phi", ParamGroup::encoder, {dim}, real(0));
        Tensor& om = omega_.mutable_value();
        Tensor& ph = phi_.mutable_value();
        for (std::size_t c = 0; c < dim; ++c) {
            om[c] = real(std::pow(kRopeBase, -double(c - c % 2) / double(dim)));
            ph[c] = c % 2 == 0 ? real(-M_PI / 2) : real(0);
        }
    }
}

ad::Var TemporalEncoder::apply(const ad::Var& tokens, std::span<const std::size_t> t) const {
    if (tokens.cols() != dim_) throw ShapeError("temporal encoder expects width " + std::to_string(dim_));
    if (t.size() != tokens.rows()) throw ShapeError("temporal encoder: one index per token required");
    switch (kind_) {
    case TemporalKind::rope: return rope_rotate(tokens, t);
    case TemporalKind::ape: return ad::add(tokens, ad::constant(sinusoid_table(t, dim_)));
    case TemporalKind::te: return ad::add(tokens, temporal_cosine(t, omega_, phi_));
    }
    return tokens;
}

QFormer::QFormer(ParameterSet& ps, const QFormerConfig& cfg, const std::string& prefix) : cfg_(cfg) {
    if (cfg.num_queries == 0) throw ConfigError("Q-Former needs at least one query token");
    if (cfg.num_heads == 0 || cfg.dim % cfg.num_heads != 0) throw ConfigError("Q-Former: heads must divide dim");
    const auto g = ParamGroup::encoder;
    const std::size_t d = cfg.dim;
    queries_ = ps.normal(prefix + ".queries", g, {cfg.num_queries, d}, 1.0);
    auto attn = [&](const std::string& p) {
        return Attention{Linear(ps, p + ".q", g, d, d), Linear(ps, p + ".k", g, d, d), Linear(ps, p + ".v", g, d, d),
                         Linear(ps, p + ".o", g, d, d)};
    };
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        const std::string p = prefix + ".layer" + std::to_string(l);
        layers_.push_back({LayerNorm(ps, p + ".norm_self", g, d), attn(p + ".self"), LayerNorm(ps, p + ".norm_cross", g, d),
                           LayerNorm(ps, p + ".norm_memory", g, d), attn(p + ".cross"), LayerNorm(ps, p + ".norm_ffn", g, d),
                           Linear(ps, p + ".fc1", g, d, d * cfg.ffn_mult), Linear(ps, p + ".fc2", g, d * cfg.ffn_mult, d)});
    }
    final_norm_ = LayerNorm(ps, prefix + ".final_norm", g, d);
}

ad::Var QFormer::compress(const ad::Var& tokens, std::span<const std::size_t> offsets, std::vector<AttentionMap>* maps,
                          QFormerTrace* trace) const {
    if (tokens.cols() != cfg_.dim) throw ShapeError("Q-Former expects width " + std::to_string(cfg_.dim));
    if (offsets.size() < 2 || offsets.back() != tokens.rows()) throw ShapeError("Q-Former: offsets do not cover the tokens");
    const std::size_t segs = offsets.size() - 1;
    const std::size_t k = cfg_.num_queries;
    std::vector<std::size_t> q_offsets(segs + 1);
    std::vector<std::size_t> q_ids;
    for (std::size_t s = 0; s < segs; ++s) {
        const std::size_t m = offsets[s + 1] - offsets[s];
        if (m == 0) throw ShapeError("Q-Former: empty sequence #" + std::to_string(s));
        if (k > m) {
            static std::atomic<bool> warned{false};
            if (!warned.exchange(true))
                log::warn("Q-Former: " + std::to_string(k) + " query tokens exceed sequence length " + std::to_string(m) +
                          " (further occurrences not reported)");
        }
        q_offsets[s + 1] = q_offsets[s] + k;
        for (std::size_t i = 0; i < k; ++i) q_ids.push_back(i);
    }
    const auto self_pattern = ad::AttentionPattern::blocks(q_offsets, q_offsets);
    const auto cross_pattern = ad::AttentionPattern::blocks(q_offsets, offsets);

    ad::Var q = ad::gather_rows(queries_, q_ids);
    std::vector<real> weights;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& L = layers_[l];
        {
            ad::Var h = L.norm_self(q);
            ad::Var a = ad::attention(L.self.q(h), L.self.k(h), L.self.v(h), self_pattern, cfg_.num_heads);
            q = ad::add(q, L.self.o(a));
        }
        {
            ad::Var h = L.norm_cross(q);
            ad::Var mem = L.norm_memory(tokens);
            ad::Var values = L.cross.v(mem);
            ad::Var ctx = ad::attention(L.cross.q(h), L.cross.k(mem), values, cross_pattern, cfg_.num_heads,
                                        maps ? &weights : nullptr);
            if (trace) {
                trace->cross_context.push_back(ctx.value());
                trace->cross_values.push_back(values.value());
            }
            if (maps) {
                for (std::size_t s = 0; s < segs; ++s) {
                    const std::size_t m = offsets[s + 1] - offsets[s];
                    for (std::size_t h = 0; h < cfg_.num_heads; ++h) {
                        Tensor w = Tensor::matrix(k, m);
                        for (std::size_t i = 0; i < k; ++i) {
                            const std::size_t row = q_offsets[s] + i;
                            for (std::size_t e = cross_pattern.offsets[row]; e < cross_pattern.offsets[row + 1]; ++e)
                                w.at(i, cross_pattern.keys[e] - offsets[s]) = weights[e * cfg_.num_heads + h];
                        }
                        maps->push_back({s, l, h, std::move(w)});
                    }
                }
            }
            q = ad::add(q, L.cross.o(ctx));
        }
        {
            ad::Var h = L.norm_ffn(q);
            q = ad::add(q, L.fc2(ad::gelu(L.fc1(h))));
        }
    }
    return final_norm_(q);
}

void write_attention_csv(std::ostream& out, const std::vector<AttentionMap>& maps) {
    out << "layer,head,query_index,frame_index,weight\n";
    out.precision(17);
    for (const auto& m : maps)
        for (std::size_t i = 0; i < m.weights.rows(); ++i)
            for (std::size_t j = 0; j < m.weights.cols(); ++j)
                out << m.layer << ',' << m.head << ',' << i << ',' << j << ',' << m.weights.at(i, j) << '\n';
}

} // namespace dygenc
