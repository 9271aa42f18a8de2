#include "dygenc/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_set>

#include "dygenc/errors.hpp"

namespace dygenc::ad {

namespace {

using RowMat = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

thread_local bool g_grad_enabled = true;

MatMap as_mat(Tensor& t) { return MatMap(t.data(), t.rows(), t.cols()); }
ConstMatMap as_mat(const Tensor& t) { return ConstMatMap(t.data(), t.rows(), t.cols()); }

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
}

void require_matrix(const char* op, const Tensor& a) {
    if (a.ndim() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(a.shape()));
}

// Parent gradient accessor that skips parents not requiring grad.
Tensor* parent_grad(Node& self, std::size_t i) {
    Node& p = *self.parents[i];
    return p.requires_grad ? &p.ensure_grad() : nullptr;
}

} // namespace

Tensor& Node::ensure_grad() {
    if (grad.shape() != value.shape() || grad.size() != value.size()) grad = Tensor(value.shape());
    return grad;
}

void Var::zero_grad() {
    if (node_ && node_->grad.size()) node_->grad.fill(real(0));
}

Var constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return Var(std::move(n));
}

Var parameter(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    return Var(std::move(n));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
    for (const auto& p : parents)
        if (!p) throw ShapeError("op applied to an empty Var");
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    if (g_grad_enabled) {
        bool any = std::any_of(parents.begin(), parents.end(), [](const Var& p) { return p.requires_grad(); });
        if (any) {
            n->requires_grad = true;
            n->parents.reserve(parents.size());
            for (auto& p : parents) n->parents.push_back(p.node_ptr());
            n->backward_fn = std::move(backward_fn);
        }
    }
    return Var(std::move(n));
}

void backward(const Var& root) {
    if (root.value().size() != 1) throw ShapeError("backward: root must be a scalar, got " + shape_str(root.shape()));
    if (!root.requires_grad()) return;

    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.node(), 0}};
    visited.insert(root.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.node()->ensure_grad()[0] += real(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->grad.size()) n->backward_fn(*n);
    }
}

// ---- pattern helpers ----------------------------------------------------------

void AttentionPattern::add_query(std::span<const std::size_t> key_rows) {
    keys.insert(keys.end(), key_rows.begin(), key_rows.end());
    offsets.push_back(keys.size());
}

AttentionPattern AttentionPattern::causal(std::span<const std::size_t> lengths) {
    AttentionPattern p;
    std::size_t base = 0;
    for (std::size_t len : lengths) {
        for (std::size_t i = 0; i < len; ++i) {
            for (std::size_t j = 0; j <= i; ++j) p.keys.push_back(base + j);
            p.offsets.push_back(p.keys.size());
        }
        base += len;
    }
    return p;
}

AttentionPattern AttentionPattern::blocks(std::span<const std::size_t> query_offsets,
                                          std::span<const std::size_t> key_offsets) {
    if (query_offsets.size() != key_offsets.size())
        throw ShapeError("AttentionPattern::blocks: segment counts differ");
    AttentionPattern p;
    for (std::size_t s = 0; s + 1 < query_offsets.size(); ++s) {
        for (std::size_t i = query_offsets[s]; i < query_offsets[s + 1]; ++i) {
            for (std::size_t j = key_offsets[s]; j < key_offsets[s + 1]; ++j) p.keys.push_back(j);
            p.offsets.push_back(p.keys.size());
        }
    }
    return p;
}

// ---- ops ----------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    require_matrix("matmul", A);
    require_matrix("matmul", B);
    if (A.cols() != B.rows()) shape_fail("matmul", A, B);
    Tensor out = Tensor::matrix(A.rows(), B.cols());
    as_mat(out).noalias() = as_mat(A) * as_mat(B);
    return make_result(std::move(out), {a, b}, [](Node& self) {
        const Tensor& A = self.parents[0]->value;
        const Tensor& B = self.parents[1]->value;
        if (Tensor* gA = parent_grad(self, 0)) as_mat(*gA).noalias() += as_mat(self.grad) * as_mat(B).transpose();
        if (Tensor* gB = parent_grad(self, 1)) as_mat(*gB).noalias() += as_mat(A).transpose() * as_mat(self.grad);
    });
}

Var matmul_nt(const Var& a, const Var& b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    require_matrix("matmul_nt", A);
    require_matrix("matmul_nt", B);
    if (A.cols() != B.cols()) shape_fail("matmul_nt", A, B);
    Tensor out = Tensor::matrix(A.rows(), B.rows());
    as_mat(out).noalias() = as_mat(A) * as_mat(B).transpose();
    return make_result(std::move(out), {a, b}, [](Node& self) {
        const Tensor& A = self.parents[0]->value;
        const Tensor& B = self.parents[1]->value;
        if (Tensor* gA = parent_grad(self, 0)) as_mat(*gA).noalias() += as_mat(self.grad) * as_mat(B);
        if (Tensor* gB = parent_grad(self, 1)) as_mat(*gB).noalias() += as_mat(self.grad).transpose() * as_mat(A);
    });
}

Var add(const Var& a, const Var& b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (A.same_shape(B)) {
        Tensor out = A;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
        return make_result(std::move(out), {a, b}, [](Node& self) {
            for (std::size_t k = 0; k < 2; ++k)
                if (Tensor* g = parent_grad(self, k))
                    for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
        });
    }
    bool row_broadcast = A.ndim() == 2 && B.size() == A.cols() && (B.ndim() == 1 || (B.ndim() == 2 && B.rows() == 1));
    if (!row_broadcast) shape_fail("add", A, B);
    Tensor out = A;
    const std::size_t n = A.rows(), d = A.cols();
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) out[r * d + c] += B[c];
    return make_result(std::move(out), {a, b}, [n, d](Node& self) {
        if (Tensor* gA = parent_grad(self, 0))
            for (std::size_t i = 0; i < gA->size(); ++i) (*gA)[i] += self.grad[i];
        if (Tensor* gB = parent_grad(self, 1))
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < d; ++c) (*gB)[c] += self.grad[r * d + c];
    });
}

Var sub(const Var& a, const Var& b) {
    if (!a.value().same_shape(b.value())) shape_fail("sub", a.value(), b.value());
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    return make_result(std::move(out), {a, b}, [](Node& self) {
        if (Tensor* g = parent_grad(self, 0))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
        if (Tensor* g = parent_grad(self, 1))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    });
}

Var mul(const Var& a, const Var& b) {
    if (!a.value().same_shape(b.value())) shape_fail("mul", a.value(), b.value());
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    return make_result(std::move(out), {a, b}, [](Node& self) {
        const Tensor& A = self.parents[0]->value;
        const Tensor& B = self.parents[1]->value;
        if (Tensor* g = parent_grad(self, 0))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * B[i];
        if (Tensor* g = parent_grad(self, 1))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * A[i];
    });
}

Var scale(const Var& a, real s) {
    Tensor out = a.value();
    for (auto& x : out.values()) x *= s;
    return make_result(std::move(out), {a}, [s](Node& self) {
        if (Tensor* g = parent_grad(self, 0))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += s * self.grad[i];
    });
}

Var sum(const Var& a) {
    real total = 0;
    for (real x : a.value().values()) total += x;
    return make_result(Tensor::scalar(total), {a}, [](Node& self) {
        if (Tensor* g = parent_grad(self, 0))
            for (auto& x : g->values()) x += self.grad[0];
    });
}

Var mean(const Var& a, int axis) {
    const Tensor& A = a.value();
    require_matrix("mean", A);
    const std::size_t n = A.rows(), d = A.cols();
    if ((axis == 0 && n == 0) || (axis == 1 && d == 0)) throw ShapeError("mean over empty axis");
    if (axis == 0) {
        Tensor out({d});
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) out[c] += A[r * d + c];
        for (auto& x : out.values()) x /= real(n);
        return make_result(std::move(out), {a}, [n, d](Node& self) {
            if (Tensor* g = parent_grad(self, 0))
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t c = 0; c < d; ++c) (*g)[r * d + c] += self.grad[c] / real(n);
        });
    }
    if (axis != 1) throw ShapeError("mean: axis must be 0 or 1");
    Tensor out({n});
    for (std::size_t r = 0; r < n; ++r) {
        real s = 0;
        for (std::size_t c = 0; c < d; ++c) s += A[r * d + c];
        out[r] = s / real(d);
    }
    return make_result(std::move(out), {a}, [n, d](Node& self) {
        if (Tensor* g = parent_grad(self, 0))
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < d; ++c) (*g)[r * d + c] += self.grad[r] / real(d);
    });
}

Var softmax(const Var& a) {
    const Tensor& A = a.value();
    const std::size_t n = A.rows(), d = A.cols();
    Tensor out = A;
    for (std::size_t r = 0; r < n; ++r) {
        real* row = out.data() + r * d;
        real mx = *std::max_element(row, row + d);
        real s = 0;
        for (std::size_t c = 0; c < d; ++c) s += (row[c] = std::exp(row[c] - mx));
        for (std::size_t c = 0; c < d; ++c) row[c] /= s;
    }
    return make_result(std::move(out), {a}, [n, d](Node& self) {
        Tensor* g = parent_grad(self, 0);
        if (!g) return;
        const Tensor& y = self.value;
        for (std::size_t r = 0; r < n; ++r) {
            real dot = 0;
            for (std::size_t c = 0; c < d; ++c) dot += self.grad[r * d + c] * y[r * d + c];
            for (std::size_t c = 0; c < d; ++c) (*g)[r * d + c] += y[r * d + c] * (self.grad[r * d + c] - dot);
        }
    });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, real eps) {
    const Tensor& X = x.value();
    const std::size_t n = X.rows(), d = X.cols();
    if (gamma.value().size() != d || beta.value().size() != d) shape_fail("layer_norm", X, gamma.value());
    auto xhat = std::make_shared<std::vector<real>>(n * d);
    auto inv_std = std::make_shared<std::vector<real>>(n);
    Tensor out(X.shape());
    const Tensor& G = gamma.value();
    const Tensor& B = beta.value();
    for (std::size_t r = 0; r < n; ++r) {
        const real* row = X.data() + r * d;
        real mu = 0;
        for (std::size_t c = 0; c < d; ++c) mu += row[c];
        mu /= real(d);
        real var = 0;
        for (std::size_t c = 0; c < d; ++c) var += (row[c] - mu) * (row[c] - mu);
        var /= real(d);
        real is = real(1) / std::sqrt(var + eps);
        (*inv_std)[r] = is;
        for (std::size_t c = 0; c < d; ++c) {
            real h = (row[c] - mu) * is;
            (*xhat)[r * d + c] = h;
            out[r * d + c] = h * G[c] + B[c];
        }
    }
    return make_result(std::move(out), {x, gamma, beta}, [n, d, xhat, inv_std](Node& self) {
        const Tensor& G = self.parents[1]->value;
        const Tensor& dy = self.grad;
        if (Tensor* gG = parent_grad(self, 1))
            for (std::size_t i = 0; i < n * d; ++i) (*gG)[i % d] += dy[i] * (*xhat)[i];
        if (Tensor* gB = parent_grad(self, 2))
            for (std::size_t i = 0; i < n * d; ++i) (*gB)[i % d] += dy[i];
        if (Tensor* gX = parent_grad(self, 0)) {
            std::vector<real> dh(d);
            for (std::size_t r = 0; r < n; ++r) {
                real m1 = 0, m2 = 0;
                for (std::size_t c = 0; c < d; ++c) {
                    dh[c] = dy[r * d + c] * G[c];
                    m1 += dh[c];
                    m2 += dh[c] * (*xhat)[r * d + c];
                }
                m1 /= real(d);
                m2 /= real(d);
                for (std::size_t c = 0; c < d; ++c)
                    (*gX)[r * d + c] += (*inv_std)[r] * (dh[c] - m1 - (*xhat)[r * d + c] * m2);
            }
        }
    });
}

Var gelu(const Var& x) {
    static const real inv_sqrt2 = real(1) / std::sqrt(real(2));
    static const real inv_sqrt2pi = real(1) / std::sqrt(real(2) * real(M_PI));
    Tensor out = x.value();
    for (auto& v : out.values()) v = real(0.5) * v * (real(1) + std::erf(v * inv_sqrt2));
    return make_result(std::move(out), {x}, [](Node& self) {
        Tensor* g = parent_grad(self, 0);
        if (!g) return;
        const Tensor& X = self.parents[0]->value;
        for (std::size_t i = 0; i < g->size(); ++i) {
            real v = X[i];
            real cdf = real(0.5) * (real(1) + std::erf(v * inv_sqrt2));
            real pdf = inv_sqrt2pi * std::exp(real(-0.5) * v * v);
            (*g)[i] += self.grad[i] * (cdf + v * pdf);
        }
    });
}

Var dropout(const Var& x, real p, std::uint64_t seed) {
    if (p < 0 || p >= 1) throw ConfigError("dropout probability must lie in [0, 1)");
    if (p == 0) return x;
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution keep(1.0 - double(p));
    auto mask = std::make_shared<std::vector<real>>(x.value().size());
    const real s = real(1) / (real(1) - p);
    Tensor out = x.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        (*mask)[i] = keep(rng) ? s : real(0);
        out[i] *= (*mask)[i];
    }
    return make_result(std::move(out), {x}, [mask](Node& self) {
        if (Tensor* g = parent_grad(self, 0))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * (*mask)[i];
    });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const std::size_t d = parts[0].cols();
    std::size_t n = 0;
    for (const auto& p : parts) {
        if (p.cols() != d) shape_fail("concat_rows", parts[0].value(), p.value());
        n += p.rows();
    }
    Tensor out = Tensor::matrix(n, d);
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.value().data(), p.value().data() + p.value().size(), out.data() + off);
        off += p.value().size();
    }
    return make_result(std::move(out), std::vector<Var>(parts.begin(), parts.end()), [](Node& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            const std::size_t len = self.parents[k]->value.size();
            if (Tensor* g = parent_grad(self, k))
                for (std::size_t i = 0; i < len; ++i) (*g)[i] += self.grad[off + i];
            off += len;
        }
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::size_t n = parts[0].rows();
    std::size_t d = 0;
    for (const auto& p : parts) {
        if (p.rows() != n) shape_fail("concat_cols", parts[0].value(), p.value());
        d += p.cols();
    }
    Tensor out = Tensor::matrix(n, d);
    std::size_t col = 0;
    for (const auto& p : parts) {
        const std::size_t w = p.cols();
        for (std::size_t r = 0; r < n; ++r)
            std::copy(p.value().data() + r * w, p.value().data() + (r + 1) * w, out.data() + r * d + col);
        col += w;
    }
    return make_result(std::move(out), std::vector<Var>(parts.begin(), parts.end()), [n, d](Node& self) {
        std::size_t col = 0;
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            const std::size_t w = self.parents[k]->value.cols();
            if (Tensor* g = parent_grad(self, k))
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t c = 0; c < w; ++c) (*g)[r * w + c] += self.grad[r * d + col + c];
            col += w;
        }
    });
}

Var slice_rows(const Var& a, std::size_t start, std::size_t count) {
    const Tensor& A = a.value();
    require_matrix("slice_rows", A);
    if (start + count > A.rows()) throw ShapeError("slice_rows: range out of bounds for " + shape_str(A.shape()));
    const std::size_t d = A.cols();
    Tensor out = Tensor::matrix(count, d);
    std::copy(A.data() + start * d, A.data() + (start + count) * d, out.data());
    return make_result(std::move(out), {a}, [start, d](Node& self) {
        if (Tensor* g = parent_grad(self, 0))
            for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[start * d + i] += self.grad[i];
    });
}

Var slice_cols(const Var& a, std::size_t start, std::size_t count) {
    const Tensor& A = a.value();
    const std::size_t n = A.rows(), d = A.cols();
    if (start + count > d) throw ShapeError("slice_cols: range out of bounds for " + shape_str(A.shape()));
    Tensor out = Tensor::matrix(n, count);
    for (std::size_t r = 0; r < n; ++r)
        std::copy(A.data() + r * d + start, A.data() + r * d + start + count, out.data() + r * count);
    return make_result(std::move(out), {a}, [n, d, start, count](Node& self) {
        if (Tensor* g = parent_grad(self, 0))
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < count; ++c) (*g)[r * d + start + c] += self.grad[r * count + c];
    });
}

Var embedding_lookup(const Var& table, std::span<const std::size_t> ids) {
    const Tensor& T = table.value();
    const std::size_t n = T.rows(), d = T.cols();
    Tensor out = Tensor::matrix(ids.size(), d);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= n) throw ShapeError("embedding_lookup: id " + std::to_string(ids[i]) + " out of range " + shape_str(T.shape()));
        std::copy(T.data() + ids[i] * d, T.data() + (ids[i] + 1) * d, out.data() + i * d);
    }
    auto idx = std::make_shared<std::vector<std::size_t>>(ids.begin(), ids.end());
    return make_result(std::move(out), {table}, [idx, d](Node& self) {
        if (Tensor* g = parent_grad(self, 0))
            for (std::size_t i = 0; i < idx->size(); ++i)
                for (std::size_t c = 0; c < d; ++c) (*g)[(*idx)[i] * d + c] += self.grad[i * d + c];
    });
}

Var segment_mean(const Var& x, std::span<const std::size_t> offsets) {
    const Tensor& X = x.value();
    const std::size_t d = X.cols();
    if (offsets.size() < 2 || offsets.back() > X.rows()) throw ShapeError("segment_mean: bad offsets for " + shape_str(X.shape()));
    const std::size_t segs = offsets.size() - 1;
    Tensor out = Tensor::matrix(segs, d);
    for (std::size_t s = 0; s < segs; ++s) {
        const std::size_t lo = offsets[s], hi = offsets[s + 1];
        if (hi <= lo) throw ShapeError("segment_mean: empty segment " + std::to_string(s));
        for (std::size_t r = lo; r < hi; ++r)
            for (std::size_t c = 0; c < d; ++c) out[s * d + c] += X[r * d + c];
        for (std::size_t c = 0; c < d; ++c) out[s * d + c] /= real(hi - lo);
    }
    auto off = std::make_shared<std::vector<std::size_t>>(offsets.begin(), offsets.end());
    return make_result(std::move(out), {x}, [off, d](Node& self) {
        Tensor* g = parent_grad(self, 0);
        if (!g) return;
        for (std::size_t s = 0; s + 1 < off->size(); ++s) {
            const std::size_t lo = (*off)[s], hi = (*off)[s + 1];
            const real w = real(1) / real(hi - lo);
            for (std::size_t r = lo; r < hi; ++r)
                for (std::size_t c = 0; c < d; ++c) (*g)[r * d + c] += w * self.grad[s * d + c];
        }
    });
}

Var cross_entropy(const Var& logits, std::span<const std::size_t> targets, std::span<const real> weights) {
    const Tensor& L = logits.value();
    const std::size_t n = L.rows(), v = L.cols();
    if (targets.size() != n) throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " + shape_str(L.shape()));
    if (!weights.empty() && weights.size() != n) throw ShapeError("cross_entropy: weight count mismatch");
    auto w = std::make_shared<std::vector<real>>(n, n ? real(1) / real(n) : real(0));
    if (!weights.empty()) w->assign(weights.begin(), weights.end());
    auto probs = std::make_shared<std::vector<real>>(n * v);
    auto tgt = std::make_shared<std::vector<std::size_t>>(targets.begin(), targets.end());
    real loss = 0;
    for (std::size_t r = 0; r < n; ++r) {
        if (targets[r] >= v) throw ShapeError("cross_entropy: target out of range");
        const real* row = L.data() + r * v;
        real mx = *std::max_element(row, row + v);
        real s = 0;
        for (std::size_t c = 0; c < v; ++c) s += ((*probs)[r * v + c] = std::exp(row[c] - mx));
        for (std::size_t c = 0; c < v; ++c) (*probs)[r * v + c] /= s;
        loss += (*w)[r] * -(row[targets[r]] - mx - std::log(s));
    }
    return make_result(Tensor::scalar(loss), {logits}, [probs, tgt, w, v](Node& self) {
        Tensor* g = parent_grad(self, 0);
        if (!g) return;
        const real up = self.grad[0];
        for (std::size_t r = 0; r < tgt->size(); ++r) {
            const real wr = (*w)[r] * up;
            for (std::size_t c = 0; c < v; ++c) (*g)[r * v + c] += wr * (*probs)[r * v + c];
            (*g)[r * v + (*tgt)[r]] -= wr;
        }
    });
}

Var attention(const Var& q, const Var& k, const Var& v, const AttentionPattern& pattern, std::size_t heads,
              std::vector<real>* weights_out) {
    const Tensor& Q = q.value();
    const Tensor& K = k.value();
    const Tensor& V = v.value();
    const std::size_t d = Q.cols();
    if (K.cols() != d || V.cols() != d) shape_fail("attention", Q, K);
    if (K.rows() != V.rows()) shape_fail("attention", K, V);
    if (heads == 0 || d % heads != 0) throw ShapeError("attention: " + std::to_string(heads) + " heads do not divide width " + std::to_string(d));
    if (pattern.num_queries() != Q.rows())
        throw ShapeError("attention: pattern covers " + std::to_string(pattern.num_queries()) + " queries, got " + std::to_string(Q.rows()));
    const std::size_t dh = d / heads;
    const real sc = real(1) / std::sqrt(real(dh));
    auto pat = std::make_shared<AttentionPattern>(pattern);
    auto w = std::make_shared<std::vector<real>>(pattern.num_pairs() * heads);
    Tensor out = Tensor::matrix(Q.rows(), d);
    for (std::size_t i = 0; i < Q.rows(); ++i) {
        const std::size_t lo = pattern.offsets[i], hi = pattern.offsets[i + 1];
        if (hi == lo) throw ShapeError("attention: query row " + std::to_string(i) + " has no keys");
        for (std::size_t h = 0; h < heads; ++h) {
            const real* qi = Q.data() + i * d + h * dh;
            real mx = -std::numeric_limits<real>::infinity();
            for (std::size_t e = lo; e < hi; ++e) {
                const std::size_t j = pattern.keys[e];
                if (j >= K.rows()) throw ShapeError("attention: key row out of range");
                const real* kj = K.data() + j * d + h * dh;
                real s = 0;
                for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
                s *= sc;
                (*w)[e * heads + h] = s;
                mx = std::max(mx, s);
            }
            real z = 0;
            for (std::size_t e = lo; e < hi; ++e) z += ((*w)[e * heads + h] = std::exp((*w)[e * heads + h] - mx));
            real* oi = out.data() + i * d + h * dh;
            for (std::size_t e = lo; e < hi; ++e) {
                real a = ((*w)[e * heads + h] /= z);
                const real* vj = V.data() + pattern.keys[e] * d + h * dh;
                for (std::size_t c = 0; c < dh; ++c) oi[c] += a * vj[c];
            }
        }
    }
    if (weights_out) *weights_out = *w;
    return make_result(std::move(out), {q, k, v}, [pat, w, heads, d, dh, sc](Node& self) {
        const Tensor& Q = self.parents[0]->value;
        const Tensor& K = self.parents[1]->value;
        const Tensor& V = self.parents[2]->value;
        Tensor* gQ = parent_grad(self, 0);
        Tensor* gK = parent_grad(self, 1);
        Tensor* gV = parent_grad(self, 2);
        std::vector<real> ds;
        for (std::size_t i = 0; i < pat->num_queries(); ++i) {
            const std::size_t lo = pat->offsets[i], hi = pat->offsets[i + 1];
            ds.assign(hi - lo, real(0));
            for (std::size_t h = 0; h < heads; ++h) {
                const real* go = self.grad.data() + i * d + h * dh;
                real dot = 0;
                for (std::size_t e = lo; e < hi; ++e) {
                    const std::size_t j = pat->keys[e];
                    const real a = (*w)[e * heads + h];
                    const real* vj = V.data() + j * d + h * dh;
                    real dw = 0;
                    for (std::size_t c = 0; c < dh; ++c) dw += go[c] * vj[c];
                    ds[e - lo] = dw;
                    dot += a * dw;
                    if (gV) {
                        real* gv = gV->data() + j * d + h * dh;
                        for (std::size_t c = 0; c < dh; ++c) gv[c] += a * go[c];
                    }
                }
                const real* qi = Q.data() + i * d + h * dh;
                for (std::size_t e = lo; e < hi; ++e) {
                    const std::size_t j = pat->keys[e];
                    const real g = (*w)[e * heads + h] * (ds[e - lo] - dot) * sc;
                    if (gQ) {
                        real* gq = gQ->data() + i * d + h * dh;
                        const real* kj = K.data() + j * d + h * dh;
                        for (std::size_t c = 0; c < dh; ++c) gq[c] += g * kj[c];
                    }
                    if (gK) {
                        real* gk = gK->data() + j * d + h * dh;
                        for (std::size_t c = 0; c < dh; ++c) gk[c] += g * qi[c];
                    }
                }
            }
        }
    });
}

} // namespace dygenc::ad
