#pragma once

#include <optional>
#include <string>
#include <vector>

#include "denim/degradation.hpp"
#include "denim/image.hpp"
#include "denim/nn.hpp"

namespace denim {

// Patch-ViT family dimensions. Parameter shapes of every net are a pure
// function of this struct.
struct ArchConfig {
    int image_size = 32;
    int patch_size = 4;
    int channels = 3;
    int embed_dim = 192;
    int depth_encoder = 6;
    int depth_decoder = 2;
    int num_heads = 3;
    float mlp_ratio = 4.0f;
    int num_classes = 10;

    int grid() const { return image_size / patch_size; }
    int num_patches() const { return grid() * grid(); }
    int patch_dim() const { return patch_size * patch_size * channels; }

    void validate() const {
        if (image_size <= 0 || patch_size <= 0) throw ConfigError("arch.image_size/patch_size must be positive");
        if (image_size % patch_size != 0) throw ConfigError("arch.image_size must be divisible by arch.patch_size");
        if (embed_dim <= 0 || num_heads <= 0) throw ConfigError("arch.embed_dim/num_heads must be positive");
        if (embed_dim % num_heads != 0) throw ConfigError("arch.embed_dim must be divisible by arch.num_heads");
        if (depth_encoder < 1 || depth_decoder < 1) throw ConfigError("arch depths must be >= 1");
        if (channels <= 0) throw ConfigError("arch.channels must be positive");
        if (num_classes < 1) throw ConfigError("arch.num_classes must be >= 1");
        if (mlp_ratio <= 0.0f) throw ConfigError("arch.mlp_ratio must be positive");
    }

    bool operator==(const ArchConfig&) const = default;
};

// (B, H, W, C) image -> (B*N, P*P*C) patch rows.
Tensor im2patch(const Tensor& pixels, const ArchConfig& arch);
// Inverse of im2patch.
Tensor patch2im(const Tensor& patches, std::int64_t batch, const ArchConfig& arch);

// Encoder f_theta: patch embedding + mask-token substitution + positional
// embedding + pre-norm transformer stack. The full token sequence is always
// processed; masked patches enter as the learned mask token.
struct EncoderNet {
    ArchConfig arch;
    Linear patch_embed;
    Param pos;         // (N, D)
    Param mask_token;  // (1, D)
    std::vector<Block> blocks;
    LayerNorm norm;

    EncoderNet() = default;
    EncoderNet(const ArchConfig& a, const std::string& prefix);

    void init(Rng& rng);

    // masks: nullptr for no masking, else one PatchMask per image (or a
    // single mask applied to every image). Returns tokens (B, N, D).
    Tensor forward(const ImageBatch& x, const std::vector<PatchMask>* masks = nullptr);
    // dTokens (B, N, D) -> dPixels (B, H, W, C).
    Tensor backward(const Tensor& d_tokens);

    ParamRefs params();

    std::int64_t batch_cache = 0;
    std::vector<std::uint8_t> masked_rows_cache;  // B*N flags
};

// Decoder g_phi: positional embedding + transformer stack + per-patch linear
// projection back to pixels. Output lives in the same (unclipped) pixel
// domain as the inputs.
struct DecoderNet {
    ArchConfig arch;
    Param pos;  // (N, D)
    std::vector<Block> blocks;
    LayerNorm norm;
    Linear to_pixels;

    DecoderNet() = default;
    DecoderNet(const ArchConfig& a, const std::string& prefix);

    void init(Rng& rng);

    // tokens (B, N, D) -> reconstructed pixels (B, H, W, C).
    Tensor forward(const Tensor& tokens);
    // dPixels -> dTokens.
    Tensor backward(const Tensor& d_pixels);

    ParamRefs params();

    std::int64_t batch_cache = 0;
};

// Classifier c_psi: its own encoder copy plus a mean-pooled linear head,
// trained end to end during fine-tuning.
struct ClassifierNet {
    EncoderNet encoder;
    Linear head;

    ClassifierNet() = default;
    ClassifierNet(const ArchConfig& a, const std::string& prefix);

    void init(Rng& rng);

    // (B, H, W, C) -> logits (B, num_classes).
    Tensor forward(const ImageBatch& x);
    // dLogits -> dPixels.
    Tensor backward(const Tensor& d_logits);

    ParamRefs params();

    Tensor pooled_cache;  // (B, D)
};

// Row-wise softmax (numerically stable); used for prediction and tests.
Tensor softmax(const Tensor& logits);

// Argmax class id per row.
std::vector<int> predict_classes(const Tensor& logits);

}  // namespace denim
