#pragma once

// Independent oracles shared by the unit tests and the acceptance binary.

#include <cstdint>
#include <functional>
#include <vector>

#include "dygenc/autodiff.hpp"
#include "dygenc/graph_encoder.hpp"
#include "dygenc/nn.hpp"
#include "dygenc/retrieval.hpp"
#include "dygenc/scene_graph.hpp"

namespace dygenc::oracle {

// Entries drawn from N(0, scale²).
Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed, double scale = 1.0);

// Contracts an arbitrary-shaped output with fixed random weights so every
// output entry reaches the scalar with a distinct sensitivity.
ad::Var probe(const ad::Var& y, std::uint64_t seed);

std::vector<ad::Var> leaves_of(ParameterSet& ps);

// Random features and random directed edges without self loops.
EmbeddedGraph random_embedded(std::size_t nodes, std::size_t edges, std::size_t node_w, std::size_t edge_w,
                              std::uint64_t seed);
// Node rows moved to perm[old]; edges follow their endpoints.
EmbeddedGraph permute_nodes(const EmbeddedGraph& g, const std::vector<std::size_t>& perm);

struct GradCheck {
    double max_rel = 0;   // max |analytic − numeric| / max(|analytic|, |numeric|, floor)
    double max_abs = 0;
    std::size_t checked = 0;
    // Entry behind max_rel.
    std::size_t worst_leaf = 0;
    double worst_analytic = 0;
    double worst_numeric = 0;
};

// Central differences of a scalar-valued f against backward() on the given
// leaves. With per_tensor > 0 only that many randomly chosen entries of each
// leaf are probed. Gradients that vanish analytically (key biases under
// softmax) leave only rounding noise of order 1e-10 at h = 1e-5, hence the floor.
GradCheck grad_check(const std::function<ad::Var()>& f, const std::vector<ad::Var>& leaves, double h = 1e-5,
                     std::size_t per_tensor = 0, std::uint64_t seed = 1, double floor = 1e-5);

// Cyclic Jacobi rotations; eigenvalues ascending, eigenvectors as columns of `vectors`.
struct EigenDecomposition {
    std::vector<double> values;
    std::vector<std::vector<double>> vectors;  // vectors[i] is the i-th eigenvector
};
EigenDecomposition jacobi_eigen(std::vector<std::vector<double>> a, double tol = 1e-14);

// Best tree by enumerating every node subset and, per subset, spanning it
// with a minimum spanning tree of the induced subgraph.
real brute_pcst(const PrizedGraph& pg);

// Random connected-or-not prized graph with the given counts.
PrizedGraph random_prized_graph(std::size_t nodes, std::size_t edges, std::uint64_t seed);

// Random scene graph with labels drawn from a small pool.
SceneGraph random_scene_graph(std::size_t nodes, std::size_t edges, std::uint64_t seed);

} // namespace dygenc::oracle
