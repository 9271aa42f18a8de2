#pragma once

// Define-by-run reverse-mode differentiation over dense tensors.
//
// Every op returns a Var whose node remembers its parents and a backward
// closure. backward(loss) walks the recorded graph in reverse topological
// order and accumulates gradients into every node that requires them. A graph
// is owned by the Vars that reference it and is freed when they go out of
// scope; parameters are leaves that outlive individual graphs.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dygenc/errors.hpp"
#include "dygenc/tensor.hpp"

namespace dygenc::ad {

struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    // Allocates a zero gradient of the value's shape on first use.
    Tensor& ensure_grad();
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    const Tensor& value() const { return checked().value; }
    Tensor& mutable_value() { return checked().value; }
    const Tensor& grad() const { return checked().grad; }
    bool has_grad() const { return checked().grad.size() == node_->value.size() && node_->value.size() > 0; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    const std::vector<std::size_t>& shape() const { return value().shape(); }
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    Node* node() const { return node_.get(); }
    const std::shared_ptr<Node>& node_ptr() const { return node_; }
    explicit operator bool() const { return static_cast<bool>(node_); }

    void zero_grad();

private:
    Node& checked() const {
        if (!node_) throw ShapeError("use of an empty Var");
        return *node_;
    }

    std::shared_ptr<Node> node_;
};

// Leaf without gradient.
Var constant(Tensor value);
// Leaf that accumulates gradient.
Var parameter(Tensor value);

// While alive, ops record no graph (inference mode).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// Builds an op result. The backward closure receives the result node; parents
// are reachable through node.parents in the order given here. When no parent
// requires a gradient (or grad mode is off) the result is a plain constant.
Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn);

// Seeds d(root)/d(root) = 1 and runs the reverse sweep. root must hold one element.
void backward(const Var& root);

// ---- core ops ---------------------------------------------------------------

Var matmul(const Var& a, const Var& b);        // [n×k]·[k×m]
Var matmul_nt(const Var& a, const Var& b);     // [n×k]·[m×k]ᵀ
Var add(const Var& a, const Var& b);           // same shape, or b a row broadcast over a's rows
Var sub(const Var& a, const Var& b);           // same shape
Var mul(const Var& a, const Var& b);           // elementwise, same shape
Var scale(const Var& a, real s);
Var sum(const Var& a);                         // scalar
Var mean(const Var& a, int axis);              // axis 0: over rows -> [cols]; axis 1: over cols -> [rows]
Var softmax(const Var& a);                     // row-wise
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, real eps = real(1e-5));
Var gelu(const Var& x);
Var dropout(const Var& x, real p, std::uint64_t seed);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(const Var& a, std::size_t start, std::size_t count);
Var slice_cols(const Var& a, std::size_t start, std::size_t count);
Var embedding_lookup(const Var& table, std::span<const std::size_t> ids);
inline Var gather_rows(const Var& a, std::span<const std::size_t> ids) { return embedding_lookup(a, ids); }
// Mean of row ranges [offsets[s], offsets[s+1]); every range must be non-empty.
Var segment_mean(const Var& x, std::span<const std::size_t> offsets);
// Σ_i weights[i] · (−log softmax(logits_i)[targets[i]]). Empty weights means uniform 1/n.
Var cross_entropy(const Var& logits, std::span<const std::size_t> targets,
                  std::span<const real> weights = {});

// Sparse multi-head attention pattern in CSR form: query row i attends to
// key rows keys[offsets[i]..offsets[i+1]).
struct AttentionPattern {
    std::vector<std::size_t> offsets{0};
    std::vector<std::size_t> keys;

    std::size_t num_queries() const { return offsets.size() - 1; }
    std::size_t num_pairs() const { return keys.size(); }
    void add_query(std::span<const std::size_t> key_rows);

    // Sequences laid out back to back; each position sees itself and earlier positions.
    static AttentionPattern causal(std::span<const std::size_t> lengths);
    // Query segment s sees every key row of key segment s.
    static AttentionPattern blocks(std::span<const std::size_t> query_offsets,
                                   std::span<const std::size_t> key_offsets);
};

// Softmax(q·kᵀ/√d_head)·v per head over the pattern. Attention weights are
// written to weights_out (pair-major, heads minor) when non-null.
Var attention(const Var& q, const Var& k, const Var& v, const AttentionPattern& pattern,
              std::size_t heads, std::vector<real>* weights_out = nullptr);

} // namespace dygenc::ad
