#include "denim/nn.hpp"

#include <cmath>

namespace denim {

Tensor Linear::forward(const Tensor& x) {
    const std::int64_t in = w.value.dim(0), out = w.value.dim(1);
    const std::int64_t m = x.size() / in;
    in_cache = x;
    Tensor y({m, out});
    y.mat(m, out).noalias() = x.mat(m, in) * w.value.mat(in, out);
    y.mat(m, out).rowwise() += b.value.vec().transpose();
    return y;
}

Tensor Linear::backward(const Tensor& dy) {
    const std::int64_t in = w.value.dim(0), out = w.value.dim(1);
    const std::int64_t m = dy.size() / out;
    w.grad.mat(in, out).noalias() += in_cache.mat(m, in).transpose() * dy.mat(m, out);
    b.grad.vec() += dy.mat(m, out).colwise().sum().transpose();
    Tensor dx({m, in});
    dx.mat(m, in).noalias() = dy.mat(m, out) * w.value.mat(in, out).transpose();
    return dx;
}

Tensor LayerNorm::forward(const Tensor& x) {
    const std::int64_t d = gamma.value.size();
    const std::int64_t m = x.size() / d;
    xhat_cache = Tensor({m, d});
    invstd_cache = Tensor({m});
    Tensor y({m, d});
    auto xm = x.mat(m, d);
    auto xh = xhat_cache.mat(m, d);
    auto ym = y.mat(m, d);
    for (std::int64_t r = 0; r < m; ++r) {
        const float mu = xm.row(r).mean();
        const float var = (xm.row(r).array() - mu).square().mean();
        const float inv = 1.0f / std::sqrt(var + kEps);
        invstd_cache[r] = inv;
        xh.row(r) = (xm.row(r).array() - mu) * inv;
        ym.row(r) = xh.row(r).array() * gamma.value.vec().transpose().array() + beta.value.vec().transpose().array();
    }
    return y;
}

Tensor LayerNorm::backward(const Tensor& dy) {
    const std::int64_t d = gamma.value.size();
    const std::int64_t m = dy.size() / d;
    Tensor dx({m, d});
    auto dym = dy.mat(m, d);
    auto xh = xhat_cache.mat(m, d);
    auto dxm = dx.mat(m, d);
    gamma.grad.vec() += (dym.array() * xh.array()).colwise().sum().matrix().transpose();
    beta.grad.vec() += dym.colwise().sum().transpose();
    for (std::int64_t r = 0; r < m; ++r) {
        Eigen::ArrayXf dxhat = dym.row(r).array().transpose() * gamma.value.vec().array();
        const float mean_dxhat = dxhat.mean();
        const float mean_dxhat_xhat = (dxhat * xh.row(r).array().transpose()).mean();
        dxm.row(r) =
            ((dxhat - mean_dxhat - xh.row(r).array().transpose() * mean_dxhat_xhat) * invstd_cache[r]).transpose();
    }
    return dx;
}

namespace {
constexpr float kGeluC = 0.7978845608028654f;  // sqrt(2/pi)
constexpr float kGeluA = 0.044715f;
}  // namespace

Tensor Gelu::forward(const Tensor& x) {
    in_cache = x;
    Tensor y = x;
    float* p = y.data();
    for (std::int64_t i = 0; i < y.size(); ++i) {
        const float v = p[i];
        p[i] = 0.5f * v * (1.0f + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
    }
    return y;
}

Tensor Gelu::backward(const Tensor& dy) {
    Tensor dx = dy;
    const float* x = in_cache.data();
    float* p = dx.data();
    for (std::int64_t i = 0; i < dx.size(); ++i) {
        const float v = x[i];
        const float u = kGeluC * (v + kGeluA * v * v * v);
        const float t = std::tanh(u);
        const float du = kGeluC * (1.0f + 3.0f * kGeluA * v * v);
        p[i] *= 0.5f * (1.0f + t) + 0.5f * v * (1.0f - t * t) * du;
    }
    return dx;
}

Tensor MultiHeadAttention::forward(const Tensor& x, std::int64_t batch, std::int64_t tokens) {
    const std::int64_t d = dim, hd = d / heads;
    const std::int64_t m = batch * tokens;
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
    batch_cache = batch;
    tokens_cache = tokens;
    qkv_cache = qkv.forward(x);  // (M, 3D)
    probs_cache = Tensor({batch * heads, tokens, tokens});
    Tensor attn_out({m, d});
    for (std::int64_t b = 0; b < batch; ++b) {
        for (std::int64_t h = 0; h < heads; ++h) {
            const float* base = qkv_cache.data() + b * tokens * 3 * d;
            ConstStridedMap q(base + h * hd, tokens, hd, Eigen::OuterStride<>(3 * d));
            ConstStridedMap k(base + d + h * hd, tokens, hd, Eigen::OuterStride<>(3 * d));
            ConstStridedMap v(base + 2 * d + h * hd, tokens, hd, Eigen::OuterStride<>(3 * d));
            MatMap p(probs_cache.data() + (b * heads + h) * tokens * tokens, tokens, tokens);
            p.noalias() = q * k.transpose() * scale;
            for (std::int64_t r = 0; r < tokens; ++r) {
                const float mx = p.row(r).maxCoeff();
                p.row(r) = (p.row(r).array() - mx).exp();
                p.row(r) /= p.row(r).sum();
            }
            StridedMap out(attn_out.data() + b * tokens * d + h * hd, tokens, hd, Eigen::OuterStride<>(d));
            out.noalias() = p * v;
        }
    }
    return proj.forward(attn_out);
}

Tensor MultiHeadAttention::backward(const Tensor& dy) {
    const std::int64_t d = dim, hd = d / heads;
    const std::int64_t batch = batch_cache, tokens = tokens_cache;
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
    Tensor d_attn_out = proj.backward(dy);  // (M, D)
    Tensor d_qkv({batch * tokens, 3 * d});
    for (std::int64_t b = 0; b < batch; ++b) {
        for (std::int64_t h = 0; h < heads; ++h) {
            const float* base = qkv_cache.data() + b * tokens * 3 * d;
            ConstStridedMap q(base + h * hd, tokens, hd, Eigen::OuterStride<>(3 * d));
            ConstStridedMap k(base + d + h * hd, tokens, hd, Eigen::OuterStride<>(3 * d));
            ConstStridedMap v(base + 2 * d + h * hd, tokens, hd, Eigen::OuterStride<>(3 * d));
            ConstMatMap p(probs_cache.data() + (b * heads + h) * tokens * tokens, tokens, tokens);
            ConstStridedMap dout(d_attn_out.data() + b * tokens * d + h * hd, tokens, hd, Eigen::OuterStride<>(d));

            Eigen::MatrixXf dp = dout * v.transpose();  // (N, N)
            Eigen::MatrixXf ds(tokens, tokens);
            for (std::int64_t r = 0; r < tokens; ++r) {
                const float dot = dp.row(r).cwiseProduct(p.row(r)).sum();
                ds.row(r).array() = p.row(r).array() * (dp.row(r).array() - dot);
            }
            float* dbase = d_qkv.data() + b * tokens * 3 * d;
            StridedMap dq(dbase + h * hd, tokens, hd, Eigen::OuterStride<>(3 * d));
            StridedMap dk(dbase + d + h * hd, tokens, hd, Eigen::OuterStride<>(3 * d));
            StridedMap dv(dbase + 2 * d + h * hd, tokens, hd, Eigen::OuterStride<>(3 * d));
            dq.noalias() = ds * k * scale;
            dk.noalias() = ds.transpose() * q * scale;
            dv.noalias() = p.transpose() * dout;
        }
    }
    return qkv.backward(d_qkv);
}

ParamRefs MultiHeadAttention::params() {
    ParamRefs out = qkv.params();
    for (auto* p : proj.params()) out.push_back(p);
    return out;
}

Tensor Mlp::forward(const Tensor& x) { return fc2.forward(act.forward(fc1.forward(x))); }

Tensor Mlp::backward(const Tensor& dy) { return fc1.backward(act.backward(fc2.backward(dy))); }

ParamRefs Mlp::params() {
    ParamRefs out = fc1.params();
    for (auto* p : fc2.params()) out.push_back(p);
    return out;
}

Tensor Block::forward(const Tensor& x, std::int64_t batch, std::int64_t tokens) {
    Tensor h = x;
    h.vec() += attn.forward(norm1.forward(x), batch, tokens).vec();
    Tensor y = h;
    y.vec() += mlp.forward(norm2.forward(h)).vec();
    return y;
}

Tensor Block::backward(const Tensor& dy) {
    Tensor dh = dy;
    dh.vec() += norm2.backward(mlp.backward(dy)).vec();
    Tensor dx = dh;
    dx.vec() += norm1.backward(attn.backward(dh)).vec();
    return dx;
}

ParamRefs Block::params() {
    ParamRefs out = norm1.params();
    for (auto* p : attn.params()) out.push_back(p);
    for (auto* p : norm2.params()) out.push_back(p);
    for (auto* p : mlp.params()) out.push_back(p);
    return out;
}

}  // namespace denim
