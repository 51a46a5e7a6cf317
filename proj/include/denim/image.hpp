#pragma once

#include <vector>

#include "denim/tensor.hpp"

namespace denim {

// A batch of images in the [0,1] pixel domain, channel-last (B, H, W, C),
// with optional integer class labels. The unit all pipelines operate on.
struct ImageBatch {
    Tensor pixels;            // (B, H, W, C)
    std::vector<int> labels;  // size B, or empty when unlabeled

    ImageBatch() = default;
    ImageBatch(std::int64_t b, std::int64_t h, std::int64_t w, std::int64_t c) : pixels({b, h, w, c}) {}
    explicit ImageBatch(Tensor px, std::vector<int> lab = {}) : pixels(std::move(px)), labels(std::move(lab)) {
        if (pixels.rank() != 4) throw ArgError("ImageBatch: pixels must be rank 4 (B,H,W,C)");
        if (!labels.empty() && static_cast<std::int64_t>(labels.size()) != pixels.dim(0))
            throw ArgError("ImageBatch: label count does not match batch size");
    }

    std::int64_t count() const { return pixels.dim(0); }
    std::int64_t height() const { return pixels.dim(1); }
    std::int64_t width() const { return pixels.dim(2); }
    std::int64_t channels() const { return pixels.dim(3); }
    std::int64_t pixels_per_image() const { return pixels.size() / pixels.dim(0); }

    float* image_data(std::int64_t i) { return pixels.data() + i * pixels_per_image(); }
    const float* image_data(std::int64_t i) const { return pixels.data() + i * pixels_per_image(); }

    ImageBatch select(const std::vector<std::int64_t>& indices) const;
};

// Elementwise clamp to [0,1]; the valid-image contract at system boundaries.
ImageBatch clip01(const ImageBatch& x);

// Horizontal mirror of one image in place.
void hflip_inplace(ImageBatch& batch, std::int64_t i);

// Zero-pad by `pad` on each side and crop back to the original size at the
// given offsets (0..2*pad). Used by the fine-tuning augmentation.
void shift_crop_inplace(ImageBatch& batch, std::int64_t i, int pad, int off_y, int off_x);

}  // namespace denim
