#include "dygenc/text_embed.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>

#include "dygenc/errors.hpp"
#include "dygenc/json.hpp"
#include "dygenc/rng.hpp"

namespace dygenc {

namespace {

std::vector<std::string> words_of(const std::string& text) {
    std::vector<std::string> words;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(char(std::tolower(c)));
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

void normalize(std::vector<real>& v) {
    double n = 0;
    for (real x : v) n += double(x) * x;
    n = std::sqrt(n);
    if (n > 0)
        for (auto& x : v) x = real(x / n);
}

} // namespace

TextEmbedder::TextEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim == 0) throw ConfigError("embedding dimension must be positive");
}

TextEmbedder TextEmbedder::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw EmbedError("cannot open embedding file " + path.string());
    TextEmbedder emb(1, 0);
    emb.mode_ = Mode::file_backed;
    emb.dim_ = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            auto text = j.at("text").get<std::string>();
            auto vec = j.at("vector").get<std::vector<real>>();
            if (vec.empty()) throw EmbedError("empty vector");
            if (emb.dim_ == 0) emb.dim_ = vec.size();
            if (vec.size() != emb.dim_) throw EmbedError("inconsistent vector length");
            normalize(vec);
            emb.table_[text] = std::move(vec);
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(std::string("bad embedding record: ") + e.what(), line_no);
        } catch (const EmbedError& e) {
            throw SchemaError(e.what(), line_no);
        }
    }
    if (emb.dim_ == 0) throw EmbedError("embedding file " + path.string() + " holds no vectors");
    return emb;
}

std::vector<real> TextEmbedder::embed(const std::string& text) const {
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw EmbedError("cannot embed empty text");
    if (mode_ == Mode::file_backed) {
        auto it = table_.find(text);
        if (it == table_.end()) throw EmbedError("no stored vector for '" + text + "'");
        return it->second;
    }
    std::vector<real> v(dim_, real(0));
    auto add_feature = [&](const std::string& feature) {
        const std::uint64_t h = mix64(fnv1a(feature) ^ seed_);
        const std::size_t bucket = std::size_t(h % dim_);
        v[bucket] += (h >> 63) ? real(-1) : real(1);
    };
    for (const auto& w : words_of(text)) {
        add_feature("w:" + w);
        const std::string padded = "#" + w + "#";
        for (std::size_t i = 0; i + 3 <= padded.size(); ++i) add_feature("c:" + padded.substr(i, 3));
    }
    normalize(v);
    if (std::all_of(v.begin(), v.end(), [](real x) { return x == 0; }))
        throw EmbedError("text '" + text + "' has no embeddable features");
    return v;
}

real cosine(const std::vector<real>& a, const std::vector<real>& b) {
    if (a.size() != b.size()) throw ShapeError("cosine: length mismatch");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += double(a[i]) * b[i];
        na += double(a[i]) * a[i];
        nb += double(b[i]) * b[i];
    }
    if (na == 0 || nb == 0) return 0;
    return real(dot / std::sqrt(na * nb));
}

Tensor normalized_laplacian(const SceneGraph& g) {
    const std::size_t n = g.nodes().size();
    Tensor adj = Tensor::matrix(n, n);
    for (const auto& e : g.edges()) {
        const std::size_t s = *g.index_of(e.src), d = *g.index_of(e.dst);
        adj.at(s, d) = adj.at(d, s) = real(1);
    }
    std::vector<real> deg(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) deg[i] += adj.at(i, j);
    Tensor lap = Tensor::matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        lap.at(i, i) = deg[i] > 0 ? real(1) : real(0);
        for (std::size_t j = 0; j < n; ++j)
            if (adj.at(i, j) != 0) lap.at(i, j) -= real(1) / std::sqrt(deg[i] * deg[j]);
    }
    return lap;
}

SpectralEncoding laplacian_pe_detailed(const SceneGraph& g, std::size_t d_lpe) {
    const std::size_t n = g.nodes().size();
    SpectralEncoding out;
    out.pe = Tensor::matrix(n, d_lpe);
    out.component.assign(n, 0);
    if (n == 0) return out;

    // Connected components of the undirected skeleton.
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& e : g.edges()) {
        auto a = find(*g.index_of(e.src)), b = find(*g.index_of(e.dst));
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
    std::vector<std::vector<std::size_t>> members;
    std::vector<std::size_t> comp_of_root(n, SIZE_MAX);
    for (std::size_t v = 0; v < n; ++v) {
        auto r = find(v);
        if (comp_of_root[r] == SIZE_MAX) {
            comp_of_root[r] = members.size();
            members.emplace_back();
        }
        out.component[v] = comp_of_root[r];
        members[comp_of_root[r]].push_back(v);
    }

    const Tensor lap = normalized_laplacian(g);
    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;
    for (const auto& mem : members) {
        const std::size_t s = mem.size();
        std::vector<real> values;
        if (s > 1) {
            Mat sub(s, s);
            for (std::size_t i = 0; i < s; ++i)
                for (std::size_t j = 0; j < s; ++j) sub(i, j) = double(lap.at(mem[i], mem[j]));
            Eigen::SelfAdjointEigenSolver<Mat> solver(sub);
            const auto& vecs = solver.eigenvectors();
            for (std::size_t c = 0; c < d_lpe && c + 1 < s; ++c) {
                const auto col = vecs.col(Eigen::Index(c + 1));
                double sign = 1;
                for (std::size_t i = 0; i < s; ++i)
                    if (std::abs(col(Eigen::Index(i))) > 1e-12) {
                        sign = col(Eigen::Index(i)) < 0 ? -1 : 1;
                        break;
                    }
                for (std::size_t i = 0; i < s; ++i) out.pe.at(mem[i], c) = real(sign * col(Eigen::Index(i)));
                values.push_back(real(solver.eigenvalues()(Eigen::Index(c + 1))));
            }
        }
        values.resize(d_lpe, real(0));
        out.eigenvalues.push_back(std::move(values));
    }
    return out;
}

Tensor laplacian_pe(const SceneGraph& g, std::size_t d_lpe) {
    return laplacian_pe_detailed(g, d_lpe).pe;
}

namespace {

template <typename Lookup>
EmbeddedGraph embed_with(const SceneGraph& g, std::size_t d, std::size_t d_lpe, Lookup&& lookup) {
    const std::size_t n = g.nodes().size();
    EmbeddedGraph eg;
    eg.node_matrix = Tensor::matrix(n, d + d_lpe);
    const Tensor pe = laplacian_pe(g, d_lpe);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& v = lookup(g.nodes()[i].label);
        std::copy(v.begin(), v.end(), eg.node_matrix.data() + i * (d + d_lpe));
        for (std::size_t c = 0; c < d_lpe; ++c) eg.node_matrix.at(i, d + c) = pe.at(i, c);
    }
    eg.edge_matrix = Tensor::matrix(g.edges().size(), d);
    for (std::size_t k = 0; k < g.edges().size(); ++k) {
        const auto& e = g.edges()[k];
        eg.src.push_back(*g.index_of(e.src));
        eg.dst.push_back(*g.index_of(e.dst));
        const auto& v = lookup(e.predicate);
        std::copy(v.begin(), v.end(), eg.edge_matrix.data() + k * d);
    }
    return eg;
}

} // namespace

EmbeddedGraph embed_graph(const SceneGraph& g, const TextEmbedder& emb, std::size_t d_lpe) {
    return embed_with(g, emb.dim(), d_lpe, [&](const std::string& s) { return emb.embed(s); });
}

const std::vector<real>& EmbeddingCache::get(const std::string& text) {
    auto it = cache_.find(text);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(text, emb_.embed(text)).first->second;
}

EmbeddedGraph embed_graph(const SceneGraph& g, EmbeddingCache& cache, std::size_t d_lpe) {
    return embed_with(g, cache.embedder().dim(), d_lpe,
                      [&](const std::string& s) -> const std::vector<real>& { return cache.get(s); });
}

} // namespace dygenc
