#include "dygenc/optim.hpp"

#include <cmath>
#include <numbers>

#include "dygenc/errors.hpp"

namespace dygenc {

void adamw_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamWState& state,
                std::span<const bool> decay) {
    if (params.size() != grads.size()) throw ShapeError("adamw_step: params/grads count mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!params[i]->same_shape(*grads[i]))
            throw ShapeError("adamw_step: gradient " + shape_str(grads[i]->shape()) + " for parameter " +
                             shape_str(params[i]->shape()));
        for (real g : grads[i]->values())
            if (!std::isfinite(double(g)))
                throw NumericsError("adamw_step: non-finite gradient in parameter #" + std::to_string(i));
    }
    if (state.first_moment.size() != params.size()) {
        state.first_moment.clear();
        state.second_moment.clear();
        for (auto* p : params) {
            state.first_moment.emplace_back(p->shape());
            state.second_moment.emplace_back(p->shape());
        }
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        Tensor& m = state.first_moment[i];
        Tensor& v = state.second_moment[i];
        const double wd = (decay.empty() || decay[i]) ? state.weight_decay : 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = real(state.beta1 * m[j] + (1.0 - state.beta1) * g[j]);
            v[j] = real(state.beta2 * v[j] + (1.0 - state.beta2) * double(g[j]) * g[j]);
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            double x = double(p[j]) * (1.0 - state.lr * wd);
            x -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
            p[j] = real(x);
        }
    }
}

double cosine_schedule(std::uint64_t step, std::uint64_t warmup_steps, std::uint64_t total_steps, double base_lr) {
    if (warmup_steps > total_steps)
        throw ConfigError("warmup_steps (" + std::to_string(warmup_steps) + ") exceeds total_steps (" +
                          std::to_string(total_steps) + ")");
    if (step > total_steps) step = total_steps;
    if (step < warmup_steps) return base_lr * double(step) / double(warmup_steps);
    if (total_steps == warmup_steps) return base_lr;
    const double progress = double(step - warmup_steps) / double(total_steps - warmup_steps);
    return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

double grad_norm(const ParameterSet& params) {
    double s = 0;
    for (const auto& p : params.all()) {
        if (!p.trainable || !p.var.has_grad()) continue;
        for (real g : p.var.grad().values()) s += double(g) * g;
    }
    return std::sqrt(s);
}

AdamW::AdamW(ParameterSet& params, double weight_decay) : params_(params) {
    state_.weight_decay = weight_decay;
    for (const auto& p : params_.all()) {
        state_.first_moment.emplace_back(p.var.value().shape());
        state_.second_moment.emplace_back(p.var.value().shape());
    }
}

void AdamW::step(double lr, double clip_norm) {
    auto& all = params_.all();
    for (const auto& p : all) {
        if (!p.trainable || !p.var.has_grad()) continue;
        for (real g : p.var.grad().values())
            if (!std::isfinite(double(g))) throw NumericsError("non-finite gradient in parameter '" + p.name + "'");
    }
    double factor = 1.0;
    if (clip_norm > 0) {
        const double n = grad_norm(params_);
        if (!std::isfinite(n)) throw NumericsError("non-finite gradient norm");
        if (n > clip_norm) factor = clip_norm / n;
    }
    // Per-parameter moments live in state_; run the shared kernel on each
    // trainable tensor with its own slice of the state.
    const std::uint64_t step = state_.step;
    for (std::size_t i = 0; i < all.size(); ++i) {
        auto& p = all[i];
        if (!p.trainable) continue;
        Tensor& value = p.var.mutable_value();
        Tensor grad = p.var.has_grad() ? p.var.grad() : Tensor(value.shape());
        if (factor != 1.0)
            for (auto& g : grad.values()) g *= real(factor);
        AdamWState slice;
        slice.lr = lr;
        slice.weight_decay = state_.weight_decay;
        slice.beta1 = state_.beta1;
        slice.beta2 = state_.beta2;
        slice.eps = state_.eps;
        slice.step = step;
        slice.first_moment.push_back(std::move(state_.first_moment[i]));
        slice.second_moment.push_back(std::move(state_.second_moment[i]));
        Tensor* pv[] = {&value};
        const Tensor* gv[] = {&grad};
        const bool dv[] = {value.ndim() >= 2};
        try {
            adamw_step(pv, gv, slice, dv);
        } catch (...) {
            state_.first_moment[i] = std::move(slice.first_moment[0]);
            state_.second_moment[i] = std::move(slice.second_moment[0]);
            throw NumericsError("non-finite gradient in parameter '" + p.name + "'");
        }
        state_.first_moment[i] = std::move(slice.first_moment[0]);
        state_.second_moment[i] = std::move(slice.second_moment[0]);
    }
    ++state_.step;
    state_.lr = lr;
}

} // namespace dygenc
