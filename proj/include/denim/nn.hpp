#pragma once

#include <string>
#include <vector>

#include "denim/rng.hpp"
#include "denim/tensor.hpp"

namespace denim {

// Trainable tensor with its gradient accumulator. backward() passes always
// accumulate (+=) into grad; the optimizer owns zeroing.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param() = default;
    Param(std::string n, std::vector<std::int64_t> shape) : name(std::move(n)), value(shape), grad(shape) {}

    void init_normal(Rng& rng, float stddev) {
        for (std::int64_t i = 0; i < value.size(); ++i) value[i] = static_cast<float>(rng.normal()) * stddev;
    }
    void zero_grad() { grad.zero(); }
};

using ParamRefs = std::vector<Param*>;

// y = x W + b over rows; x is (M, in), y is (M, out).
struct Linear {
    Param w;  // (in, out)
    Param b;  // (out)

    Linear() = default;
    Linear(const std::string& name, std::int64_t in, std::int64_t out)
        : w(name + ".w", {in, out}), b(name + ".b", {out}) {}

    void init(Rng& rng, float stddev = 0.02f) { w.init_normal(rng, stddev); }

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    ParamRefs params() { return {&w, &b}; }

    Tensor in_cache;
};

// Normalization over the last dimension with learned scale/shift.
struct LayerNorm {
    static constexpr float kEps = 1e-5f;
    Param gamma;
    Param beta;

    LayerNorm() = default;
    explicit LayerNorm(const std::string& name, std::int64_t dim)
        : gamma(name + ".gamma", {dim}), beta(name + ".beta", {dim}) {
        gamma.value.fill(1.0f);
    }

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    ParamRefs params() { return {&gamma, &beta}; }

    Tensor xhat_cache;    // (M, dim)
    Tensor invstd_cache;  // (M)
};

// tanh-approximated GELU.
struct Gelu {
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);

    Tensor in_cache;
};

// Standard multi-head self-attention over a (batch, tokens, dim) sequence
// passed as a flattened (batch*tokens, dim) matrix.
struct MultiHeadAttention {
    int dim = 0;
    int heads = 0;
    Linear qkv;
    Linear proj;

    MultiHeadAttention() = default;
    MultiHeadAttention(const std::string& name, int dim_, int heads_)
        : dim(dim_), heads(heads_), qkv(name + ".qkv", dim_, 3 * dim_), proj(name + ".proj", dim_, dim_) {
        if (dim_ % heads_ != 0) throw ConfigError("arch.embed_dim must be divisible by arch.num_heads");
    }

    void init(Rng& rng, float stddev = 0.02f) {
        qkv.init(rng, stddev);
        proj.init(rng, stddev);
    }

    Tensor forward(const Tensor& x, std::int64_t batch, std::int64_t tokens);
    Tensor backward(const Tensor& dy);
    ParamRefs params();

    std::int64_t batch_cache = 0;
    std::int64_t tokens_cache = 0;
    Tensor qkv_cache;    // (M, 3*dim)
    Tensor probs_cache;  // (batch*heads, tokens, tokens)
};

// Two-layer MLP with GELU.
struct Mlp {
    Linear fc1;
    Gelu act;
    Linear fc2;

    Mlp() = default;
    Mlp(const std::string& name, std::int64_t dim, std::int64_t hidden)
        : fc1(name + ".fc1", dim, hidden), fc2(name + ".fc2", hidden, dim) {}

    void init(Rng& rng, float stddev = 0.02f) {
        fc1.init(rng, stddev);
        fc2.init(rng, stddev);
    }

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    ParamRefs params();
};

// Pre-norm transformer block: x + attn(norm1(x)), then h + mlp(norm2(h)).
struct Block {
    LayerNorm norm1;
    MultiHeadAttention attn;
    LayerNorm norm2;
    Mlp mlp;

    Block() = default;
    Block(const std::string& name, int dim, int heads, float mlp_ratio)
        : norm1(name + ".norm1", dim),
          attn(name + ".attn", dim, heads),
          norm2(name + ".norm2", dim),
          mlp(name + ".mlp", dim, static_cast<std::int64_t>(dim * mlp_ratio)) {}

    void init(Rng& rng, float stddev = 0.02f) {
        attn.init(rng, stddev);
        mlp.init(rng, stddev);
    }

    Tensor forward(const Tensor& x, std::int64_t batch, std::int64_t tokens);
    Tensor backward(const Tensor& dy);
    ParamRefs params();
};

}  // namespace denim
