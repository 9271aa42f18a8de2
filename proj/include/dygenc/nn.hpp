#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dygenc/autodiff.hpp"

namespace dygenc {

// Which part of the model a tensor belongs to. Checkpoints record it so that
// adapters can be swapped independently of the base language model.
enum class ParamGroup { encoder, projector, base, adapter };

const char* to_string(ParamGroup g);
ParamGroup param_group_from_string(const std::string& s);

struct Parameter {
    std::string name;
    ParamGroup group;
    ad::Var var;
    bool trainable = true;
};

// Owns every learnable tensor of a model in registration order.
class ParameterSet {
public:
    explicit ParameterSet(std::uint64_t seed = 0) : seed_(seed) {}

    // Gaussian init with the given std; the stream is derived from the name so
    // initial values do not depend on registration order.
    ad::Var normal(const std::string& name, ParamGroup group, std::vector<std::size_t> shape, double stddev);
    ad::Var constant(const std::string& name, ParamGroup group, std::vector<std::size_t> shape, real value);

    std::vector<Parameter>& all() { return params_; }
    const std::vector<Parameter>& all() const { return params_; }
    Parameter* find(const std::string& name);
    const Parameter* find(const std::string& name) const;

    void zero_grad();
    void set_trainable(ParamGroup group, bool trainable);
    std::size_t count(ParamGroup group) const;
    std::size_t count() const;

private:
    ad::Var add(const std::string& name, ParamGroup group, Tensor value);

    std::uint64_t seed_;
    std::vector<Parameter> params_;
};

// y = x·W + b with W stored in×out.
struct Linear {
    ad::Var weight;
    ad::Var bias;

    Linear() = default;
    Linear(ParameterSet& ps, const std::string& name, ParamGroup group, std::size_t in, std::size_t out,
           bool with_bias = true);
    ad::Var operator()(const ad::Var& x) const;
    std::size_t in_features() const { return weight.value().rows(); }
    std::size_t out_features() const { return weight.value().cols(); }
};

struct LayerNorm {
    ad::Var gamma;
    ad::Var beta;

    LayerNorm() = default;
    LayerNorm(ParameterSet& ps, const std::string& name, ParamGroup group, std::size_t dim);
    ad::Var operator()(const ad::Var& x) const { return ad::layer_norm(x, gamma, beta); }
};

} // namespace dygenc
