#include "denim/vit.hpp"

#include <cmath>

namespace denim {

Tensor im2patch(const Tensor& pixels, const ArchConfig& arch) {
    const std::int64_t b = pixels.dim(0), h = pixels.dim(1), w = pixels.dim(2), c = pixels.dim(3);
    if (h != arch.image_size || w != arch.image_size || c != arch.channels)
        throw ArgError("im2patch: image shape does not match arch");
    const std::int64_t g = arch.grid(), p = arch.patch_size, pd = arch.patch_dim();
    Tensor out({b * g * g, pd});
    for (std::int64_t ib = 0; ib < b; ++ib) {
        const float* img = pixels.data() + ib * h * w * c;
        for (std::int64_t pr = 0; pr < g; ++pr)
            for (std::int64_t pc = 0; pc < g; ++pc) {
                float* row = out.data() + (ib * g * g + pr * g + pc) * pd;
                for (std::int64_t i = 0; i < p; ++i) {
                    const float* src = img + ((pr * p + i) * w + pc * p) * c;
                    std::copy(src, src + p * c, row + i * p * c);
                }
            }
    }
    return out;
}

Tensor patch2im(const Tensor& patches, std::int64_t batch, const ArchConfig& arch) {
    const std::int64_t g = arch.grid(), p = arch.patch_size, c = arch.channels, pd = arch.patch_dim();
    const std::int64_t hw = arch.image_size;
    Tensor out({batch, hw, hw, c});
    for (std::int64_t ib = 0; ib < batch; ++ib) {
        float* img = out.data() + ib * hw * hw * c;
        for (std::int64_t pr = 0; pr < g; ++pr)
            for (std::int64_t pc = 0; pc < g; ++pc) {
                const float* row = patches.data() + (ib * g * g + pr * g + pc) * pd;
                for (std::int64_t i = 0; i < p; ++i) {
                    float* dst = img + ((pr * p + i) * hw + pc * p) * c;
                    std::copy(row + i * p * c, row + (i + 1) * p * c, dst);
                }
            }
    }
    return out;
}

EncoderNet::EncoderNet(const ArchConfig& a, const std::string& prefix)
    : arch(a),
      patch_embed(prefix + ".patch_embed", a.patch_dim(), a.embed_dim),
      pos(prefix + ".pos", {a.num_patches(), a.embed_dim}),
      mask_token(prefix + ".mask_token", {1, a.embed_dim}),
      norm(prefix + ".norm", a.embed_dim) {
    arch.validate();
    blocks.reserve(static_cast<std::size_t>(a.depth_encoder));
    for (int i = 0; i < a.depth_encoder; ++i)
        blocks.emplace_back(prefix + ".blocks." + std::to_string(i), a.embed_dim, a.num_heads, a.mlp_ratio);
}

void EncoderNet::init(Rng& rng) {
    patch_embed.init(rng);
    pos.init_normal(rng, 0.02f);
    mask_token.init_normal(rng, 0.02f);
    for (auto& blk : blocks) blk.init(rng);
}

Tensor EncoderNet::forward(const ImageBatch& x, const std::vector<PatchMask>* masks) {
    const std::int64_t b = x.count(), n = arch.num_patches(), d = arch.embed_dim;
    if (x.height() != arch.image_size || x.width() != arch.image_size || x.channels() != arch.channels)
        throw ArgError("encode: image shape does not match arch");
    batch_cache = b;
    Tensor tokens = patch_embed.forward(im2patch(x.pixels, arch));  // (B*N, D)

    masked_rows_cache.assign(static_cast<std::size_t>(b * n), 0);
    if (masks != nullptr && !masks->empty()) {
        if (masks->size() != 1 && static_cast<std::int64_t>(masks->size()) != b)
            throw ArgError("encode: mask count does not match batch size");
        auto tm = tokens.mat(b * n, d);
        for (std::int64_t ib = 0; ib < b; ++ib) {
            const PatchMask& m = (*masks)[masks->size() == 1 ? 0 : static_cast<std::size_t>(ib)];
            if (m.num_patches() != n) throw ArgError("encode: mask grid does not match arch patch grid");
            for (std::int64_t t = 0; t < n; ++t) {
                if (!m.masked(static_cast<int>(t))) continue;
                masked_rows_cache[static_cast<std::size_t>(ib * n + t)] = 1;
                tm.row(ib * n + t) = mask_token.value.vec().transpose();
            }
        }
    }

    auto tm = tokens.mat(b * n, d);
    auto pm = pos.value.mat(n, d);
    for (std::int64_t ib = 0; ib < b; ++ib) tm.middleRows(ib * n, n) += pm;

    for (auto& blk : blocks) tokens = blk.forward(tokens, b, n);
    tokens = norm.forward(tokens);
    return tokens.reshaped({b, n, d});
}

Tensor EncoderNet::backward(const Tensor& d_tokens) {
    const std::int64_t b = batch_cache, n = arch.num_patches(), d = arch.embed_dim;
    Tensor grad = norm.backward(d_tokens.reshaped({b * n, d}));
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) grad = it->backward(grad);

    auto gm = grad.mat(b * n, d);
    auto pg = pos.grad.mat(n, d);
    for (std::int64_t ib = 0; ib < b; ++ib) pg += gm.middleRows(ib * n, n);

    for (std::int64_t r = 0; r < b * n; ++r) {
        if (!masked_rows_cache[static_cast<std::size_t>(r)]) continue;
        mask_token.grad.vec() += gm.row(r).transpose();
        gm.row(r).setZero();  // the pixel path of a masked patch is cut
    }

    Tensor d_patches = patch_embed.backward(grad);
    return patch2im(d_patches, b, arch);
}

ParamRefs EncoderNet::params() {
    ParamRefs out = patch_embed.params();
    out.push_back(&pos);
    out.push_back(&mask_token);
    for (auto& blk : blocks)
        for (auto* p : blk.params()) out.push_back(p);
    for (auto* p : norm.params()) out.push_back(p);
    return out;
}

DecoderNet::DecoderNet(const ArchConfig& a, const std::string& prefix)
    : arch(a),
      pos(prefix + ".pos", {a.num_patches(), a.embed_dim}),
      norm(prefix + ".norm", a.embed_dim),
      to_pixels(prefix + ".to_pixels", a.embed_dim, a.patch_dim()) {
    arch.validate();
    blocks.reserve(static_cast<std::size_t>(a.depth_decoder));
    for (int i = 0; i < a.depth_decoder; ++i)
        blocks.emplace_back(prefix + ".blocks." + std::to_string(i), a.embed_dim, a.num_heads, a.mlp_ratio);
}

void DecoderNet::init(Rng& rng) {
    pos.init_normal(rng, 0.02f);
    for (auto& blk : blocks) blk.init(rng);
    to_pixels.init(rng);
}

Tensor DecoderNet::forward(const Tensor& tokens) {
    const std::int64_t n = arch.num_patches(), d = arch.embed_dim;
    if (tokens.rank() != 3 || tokens.dim(1) != n || tokens.dim(2) != d)
        throw ArgError("decode: token shape does not match arch");
    const std::int64_t b = tokens.dim(0);
    batch_cache = b;
    Tensor t = tokens.reshaped({b * n, d});
    auto tm = t.mat(b * n, d);
    auto pm = pos.value.mat(n, d);
    for (std::int64_t ib = 0; ib < b; ++ib) tm.middleRows(ib * n, n) += pm;
    for (auto& blk : blocks) t = blk.forward(t, b, n);
    t = norm.forward(t);
    Tensor patches = to_pixels.forward(t);  // (B*N, P*P*C)
    return patch2im(patches, b, arch);
}

Tensor DecoderNet::backward(const Tensor& d_pixels) {
    const std::int64_t b = batch_cache, n = arch.num_patches(), d = arch.embed_dim;
    Tensor d_patches = im2patch(d_pixels, arch);
    Tensor grad = to_pixels.backward(d_patches);
    grad = norm.backward(grad);
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) grad = it->backward(grad);
    auto gm = grad.mat(b * n, d);
    auto pg = pos.grad.mat(n, d);
    for (std::int64_t ib = 0; ib < b; ++ib) pg += gm.middleRows(ib * n, n);
    return grad.reshaped({b, n, d});
}

ParamRefs DecoderNet::params() {
    ParamRefs out{&pos};
    for (auto& blk : blocks)
        for (auto* p : blk.params()) out.push_back(p);
    for (auto* p : norm.params()) out.push_back(p);
    for (auto* p : to_pixels.params()) out.push_back(p);
    return out;
}

ClassifierNet::ClassifierNet(const ArchConfig& a, const std::string& prefix)
    : encoder(a, prefix + ".encoder"), head(prefix + ".head", a.embed_dim, a.num_classes) {}

void ClassifierNet::init(Rng& rng) {
    encoder.init(rng);
    head.init(rng, 0.01f);
}

Tensor ClassifierNet::forward(const ImageBatch& x) {
    const std::int64_t b = x.count(), n = encoder.arch.num_patches(), d = encoder.arch.embed_dim;
    Tensor tokens = encoder.forward(x);  // (B, N, D)
    pooled_cache = Tensor({b, d});
    auto tm = tokens.mat(b * n, d);
    auto pm = pooled_cache.mat(b, d);
    for (std::int64_t ib = 0; ib < b; ++ib) pm.row(ib) = tm.middleRows(ib * n, n).colwise().mean();
    return head.forward(pooled_cache);
}

Tensor ClassifierNet::backward(const Tensor& d_logits) {
    const std::int64_t b = d_logits.dim(0), n = encoder.arch.num_patches(), d = encoder.arch.embed_dim;
    Tensor d_pooled = head.backward(d_logits);  // (B, D)
    Tensor d_tokens({b, n, d});
    auto dtm = d_tokens.mat(b * n, d);
    auto dpm = d_pooled.mat(b, d);
    const float inv = 1.0f / static_cast<float>(n);
    for (std::int64_t ib = 0; ib < b; ++ib) dtm.middleRows(ib * n, n).rowwise() = dpm.row(ib) * inv;
    return encoder.backward(d_tokens);
}

ParamRefs ClassifierNet::params() {
    ParamRefs out = encoder.params();
    for (auto* p : head.params()) out.push_back(p);
    return out;
}

Tensor softmax(const Tensor& logits) {
    Tensor out = logits;
    auto m = out.rows_by_last();
    for (std::int64_t r = 0; r < m.rows(); ++r) {
        const float mx = m.row(r).maxCoeff();
        m.row(r) = (m.row(r).array() - mx).exp();
        m.row(r) /= m.row(r).sum();
    }
    return out;
}

std::vector<int> predict_classes(const Tensor& logits) {
    auto m = logits.rows_by_last();
    std::vector<int> out(static_cast<std::size_t>(m.rows()));
    for (std::int64_t r = 0; r < m.rows(); ++r) {
        Eigen::Index best = 0;
        m.row(r).maxCoeff(&best);
        out[static_cast<std::size_t>(r)] = static_cast<int>(best);
    }
    return out;
}

}  // namespace denim
