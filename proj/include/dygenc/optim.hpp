#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dygenc/nn.hpp"
#include "dygenc/tensor.hpp"

namespace dygenc {

struct AdamWState {
    double lr = 2e-5;
    double weight_decay = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
};

// One decoupled-weight-decay Adam update of every params[i] with grads[i].
// decay[i] selects whether weight decay applies (all when empty). Throws
// NumericsError, leaving params untouched, if any gradient is not finite.
void adamw_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamWState& state,
                std::span<const bool> decay = {});

// Linear warmup to base_lr, then half-cycle cosine decay to zero at total_steps.
double cosine_schedule(std::uint64_t step, std::uint64_t warmup_steps, std::uint64_t total_steps, double base_lr);

// Global L2 norm of the gradients of the trainable parameters.
double grad_norm(const ParameterSet& params);

// AdamW over the trainable members of a ParameterSet. Moments are kept per
// parameter index so freezing a group mid-run leaves its state intact.
class AdamW {
public:
    explicit AdamW(ParameterSet& params, double weight_decay = 0.05);

    // Applies one update at learning rate lr; clips the global grad norm to
    // clip_norm first when clip_norm > 0.
    void step(double lr, double clip_norm = 0.0);
    const AdamWState& state() const { return state_; }
    AdamWState& state() { return state_; }

private:
    ParameterSet& params_;
    AdamWState state_;
};

} // namespace dygenc
