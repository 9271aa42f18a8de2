#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "dygenc/scene_graph.hpp"
#include "dygenc/tensor.hpp"

namespace dygenc {

// Deterministic text → unit vector map standing in for a pretrained encoder.
//
// Hashed mode lowercases the text, splits it into words (any non-alphanumeric
// character separates) and "#word#"-padded character trigrams, and adds ±1 per
// feature into one of d buckets chosen by a seeded 64-bit hash; the sign comes
// from an independent hash bit. File-backed mode serves precomputed vectors.
class TextEmbedder {
public:
    enum class Mode { hashed, file_backed };

    explicit TextEmbedder(std::size_t dim = 64, std::uint64_t seed = 0x5eed);
    // Reads JSONL records {"text": ..., "vector": [...]}; vectors are L2-normalised.
    static TextEmbedder from_file(const std::filesystem::path& path);

    std::size_t dim() const noexcept { return dim_; }
    Mode mode() const noexcept { return mode_; }
    std::uint64_t seed() const noexcept { return seed_; }

    // Throws EmbedError on empty/blank text and, in file-backed mode, unknown keys.
    std::vector<real> embed(const std::string& text) const;

private:
    std::size_t dim_;
    std::uint64_t seed_;
    Mode mode_ = Mode::hashed;
    std::unordered_map<std::string, std::vector<real>> table_;
};

real cosine(const std::vector<real>& a, const std::vector<real>& b);

inline constexpr std::size_t kDefaultLpeDim = 4;

// Laplacian eigenvector positional encoding, |V|×d_lpe.
//
// Computed per connected component of the undirected skeleton on the
// symmetric normalised Laplacian I − D^{-1/2} A D^{-1/2}: the component's
// eigenvectors 2..d_lpe+1 by ascending eigenvalue, zero-padded when the
// component is too small. Each column's first non-zero entry is positive.
// Singleton components get zero rows.
Tensor laplacian_pe(const SceneGraph& g, std::size_t d_lpe = kDefaultLpeDim);

// Same as laplacian_pe, also returning the eigenvalue that belongs to each
// column per component (0 for padded columns).
struct SpectralEncoding {
    Tensor pe;
    // component id per node, and per component the selected eigenvalues.
    std::vector<std::size_t> component;
    std::vector<std::vector<real>> eigenvalues;
};
SpectralEncoding laplacian_pe_detailed(const SceneGraph& g, std::size_t d_lpe = kDefaultLpeDim);

// Symmetric normalised Laplacian of the undirected skeleton (isolated nodes get 0 on the diagonal).
Tensor normalized_laplacian(const SceneGraph& g);

struct EmbeddedGraph {
    Tensor node_matrix;             // |V| × (d + d_lpe)
    std::vector<std::size_t> src;   // edge_index row 0, as node rows
    std::vector<std::size_t> dst;   // edge_index row 1
    Tensor edge_matrix;             // |E| × d

    std::size_t num_nodes() const { return node_matrix.rows(); }
    std::size_t num_edges() const { return src.size(); }
};

EmbeddedGraph embed_graph(const SceneGraph& g, const TextEmbedder& emb, std::size_t d_lpe = kDefaultLpeDim);

// Memoises embed() for repeated labels; not thread-safe.
class EmbeddingCache {
public:
    explicit EmbeddingCache(const TextEmbedder& emb) : emb_(emb) {}
    const std::vector<real>& get(const std::string& text);
    const TextEmbedder& embedder() const { return emb_; }

private:
    const TextEmbedder& emb_;
    std::unordered_map<std::string, std::vector<real>> cache_;
};

EmbeddedGraph embed_graph(const SceneGraph& g, EmbeddingCache& cache, std::size_t d_lpe = kDefaultLpeDim);

} // namespace dygenc
