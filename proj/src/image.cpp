#include "denim/image.hpp"

#include <algorithm>
#include <cstring>

namespace denim {

ImageBatch ImageBatch::select(const std::vector<std::int64_t>& indices) const {
    const std::int64_t per = pixels_per_image();
    Tensor out({static_cast<std::int64_t>(indices.size()), height(), width(), channels()});
    std::vector<int> lab;
    lab.reserve(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const std::int64_t i = indices[k];
        if (i < 0 || i >= count()) throw ArgError("ImageBatch::select: index out of range");
        std::memcpy(out.data() + static_cast<std::int64_t>(k) * per, image_data(i), sizeof(float) * per);
        if (!labels.empty()) lab.push_back(labels[static_cast<std::size_t>(i)]);
    }
    return ImageBatch(std::move(out), std::move(lab));
}

ImageBatch clip01(const ImageBatch& x) {
    ImageBatch out = x;
    float* p = out.pixels.data();
    const std::int64_t n = out.pixels.size();
    for (std::int64_t i = 0; i < n; ++i) p[i] = std::min(1.0f, std::max(0.0f, p[i]));
    return out;
}

void hflip_inplace(ImageBatch& batch, std::int64_t i) {
    const std::int64_t h = batch.height(), w = batch.width(), c = batch.channels();
    float* img = batch.image_data(i);
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w / 2; ++x)
            for (std::int64_t ch = 0; ch < c; ++ch)
                std::swap(img[(y * w + x) * c + ch], img[(y * w + (w - 1 - x)) * c + ch]);
}

void shift_crop_inplace(ImageBatch& batch, std::int64_t i, int pad, int off_y, int off_x) {
    const std::int64_t h = batch.height(), w = batch.width(), c = batch.channels();
    if (off_y < 0 || off_y > 2 * pad || off_x < 0 || off_x > 2 * pad)
        throw ArgError("shift_crop_inplace: offset out of range");
    std::vector<float> src(batch.image_data(i), batch.image_data(i) + h * w * c);
    float* dst = batch.image_data(i);
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
            const std::int64_t sy = y + off_y - pad;
            const std::int64_t sx = x + off_x - pad;
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const bool inside = sy >= 0 && sy < h && sx >= 0 && sx < w;
                dst[(y * w + x) * c + ch] = inside ? src[static_cast<std::size_t>((sy * w + sx) * c + ch)] : 0.0f;
            }
        }
    }
}

}  // namespace denim
