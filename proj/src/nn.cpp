#include "dygenc/nn.hpp"

#include <cmath>
#include <random>

#include "dygenc/errors.hpp"
#include "dygenc/rng.hpp"

namespace dygenc {

const char* to_string(ParamGroup g) {
    switch (g) {
    case ParamGroup::encoder: return "encoder";
    case ParamGroup::projector: return "projector";
    case ParamGroup::base: return "base";
    case ParamGroup::adapter: return "adapter";
    }
    return "?";
}

ParamGroup param_group_from_string(const std::string& s) {
    if (s == "encoder") return ParamGroup::encoder;
    if (s == "projector") return ParamGroup::projector;
    if (s == "base") return ParamGroup::base;
    if (s == "adapter") return ParamGroup::adapter;
    throw ConfigError("unknown parameter group '" + s + "'");
}

ad::Var ParameterSet::add(const std::string& name, ParamGroup group, Tensor value) {
    if (find(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    auto v = ad::parameter(std::move(value));
    params_.push_back({name, group, v, true});
    return v;
}

ad::Var ParameterSet::normal(const std::string& name, ParamGroup group, std::vector<std::size_t> shape,
                             double stddev) {
    Tensor t(std::move(shape));
    std::mt19937_64 rng(derive_seed(seed_, name));
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& x : t.values()) x = real(dist(rng));
    return add(name, group, std::move(t));
}

ad::Var ParameterSet::constant(const std::string& name, ParamGroup group, std::vector<std::size_t> shape,
                               real value) {
    return add(name, group, Tensor(std::move(shape), value));
}

Parameter* ParameterSet::find(const std::string& name) {
    for (auto& p : params_)
        if (p.name == name) return &p;
    return nullptr;
}

const Parameter* ParameterSet::find(const std::string& name) const {
    for (const auto& p : params_)
        if (p.name == name) return &p;
    return nullptr;
}

void ParameterSet::zero_grad() {
    for (auto& p : params_) p.var.zero_grad();
}

void ParameterSet::set_trainable(ParamGroup group, bool trainable) {
    for (auto& p : params_)
        if (p.group == group) p.trainable = trainable;
}

std::size_t ParameterSet::count(ParamGroup group) const {
    std::size_t n = 0;
    for (const auto& p : params_)
        if (p.group == group) n += p.var.value().size();
    return n;
}

std::size_t ParameterSet::count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.var.value().size();
    return n;
}

Linear::Linear(ParameterSet& ps, const std::string& name, ParamGroup group, std::size_t in, std::size_t out,
               bool with_bias) {
    weight = ps.normal(name + ".weight", group, {in, out}, 1.0 / std::sqrt(double(in)));
    if (with_bias) bias = ps.constant(name + ".bias", group, {out}, real(0));
}

ad::Var Linear::operator()(const ad::Var& x) const {
    auto y = ad::matmul(x, weight);
    return bias ? ad::add(y, bias) : y;
}

LayerNorm::LayerNorm(ParameterSet& ps, const std::string& name, ParamGroup group, std::size_t dim) {
    gamma = ps.constant(name + ".gamma", group, {dim}, real(1));
    beta = ps.constant(name + ".beta", group, {dim}, real(0));
}

} // namespace dygenc
