#include "denim/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace denim {

SigmaSpec SigmaSpec::global(double sigma0) {
    SigmaSpec s;
    s.kind = Kind::Global;
    s.sigma0 = sigma0;
    s.validate();
    return s;
}

SigmaSpec SigmaSpec::uniform(double lo, double hi) {
    SigmaSpec s;
    s.kind = Kind::Uniform;
    s.lo = lo;
    s.hi = hi;
    s.validate();
    return s;
}

SigmaSpec SigmaSpec::gamma(double shape, double scale) {
    SigmaSpec s;
    s.kind = Kind::Gamma;
    s.shape = shape;
    s.scale = scale;
    s.validate();
    return s;
}

void SigmaSpec::validate() const {
    switch (kind) {
        case Kind::Global:
            if (!(sigma0 >= 0.0)) throw ConfigError("sigma.sigma0 must be >= 0");
            break;
        case Kind::Uniform:
            if (!(lo >= 0.0)) throw ConfigError("sigma.lo must be >= 0");
            if (!(lo <= hi)) throw ConfigError("sigma.lo must be <= sigma.hi");
            break;
        case Kind::Gamma:
            if (!(shape > 0.0)) throw ConfigError("sigma.shape must be > 0");
            if (!(scale > 0.0)) throw ConfigError("sigma.scale must be > 0");
            break;
    }
}

std::string SigmaSpec::describe() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::Global: os << "global(" << sigma0 << ")"; break;
        case Kind::Uniform: os << "uniform(" << lo << "," << hi << ")"; break;
        case Kind::Gamma: os << "gamma(" << shape << "," << scale << ")"; break;
    }
    return os.str();
}

int MaskSpec::num_masked() const { return static_cast<int>(std::lround(ratio * num_patches())); }

void MaskSpec::validate() const {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("mask.ratio must be in [0,1]");
    if (rows <= 0 || cols <= 0) throw ConfigError("mask.patch_grid dimensions must be positive");
}

std::string MaskSpec::describe() const {
    std::ostringstream os;
    os << "mask(ratio=" << ratio << "," << rows << "x" << cols << ")";
    return os.str();
}

int PatchMask::popcount() const {
    return static_cast<int>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

void DegradationSpec::validate() const {
    if (kind == Kind::Noise)
        sigma.validate();
    else
        mask.validate();
}

std::string DegradationSpec::describe() const {
    return kind == Kind::Noise ? "noise:" + sigma.describe() : mask.describe();
}

double sample_sigma(const SigmaSpec& spec, Rng& rng) {
    spec.validate();
    switch (spec.kind) {
        case SigmaSpec::Kind::Global: return spec.sigma0;
        case SigmaSpec::Kind::Uniform: return rng.uniform(spec.lo, spec.hi);
        case SigmaSpec::Kind::Gamma: return rng.gamma(spec.shape, spec.scale);
    }
    throw ConfigError("sigma.kind: unknown");
}

ImageBatch add_noise(const ImageBatch& x, double sigma, Rng& rng) {
    if (sigma < 0.0) throw ArgError("add_noise: sigma must be >= 0");
    ImageBatch out = x;
    if (sigma == 0.0) return out;
    const float s = static_cast<float>(sigma / 255.0);
    float* p = out.pixels.data();
    const std::int64_t n = out.pixels.size();
    for (std::int64_t i = 0; i < n; ++i) p[i] += s * static_cast<float>(rng.normal());
    return out;
}

void add_noise_inplace(ImageBatch& batch, std::int64_t image, double sigma, Rng& rng) {
    if (sigma < 0.0) throw ArgError("add_noise: sigma must be >= 0");
    if (sigma == 0.0) return;
    const float s = static_cast<float>(sigma / 255.0);
    float* p = batch.image_data(image);
    const std::int64_t n = batch.pixels_per_image();
    for (std::int64_t i = 0; i < n; ++i) p[i] += s * static_cast<float>(rng.normal());
}

PatchMask sample_mask(const MaskSpec& spec, Rng& rng) {
    spec.validate();
    const int n = spec.num_patches();
    const int k = spec.num_masked();
    PatchMask m(spec.rows, spec.cols);
    // partial Fisher-Yates: first k entries of a random permutation
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; ++i) {
        const auto j = i + static_cast<int>(rng.next_index(static_cast<std::uint64_t>(n - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        m.bits[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = 1;
    }
    return m;
}

namespace {

void check_grid(const ImageBatch& x, const PatchMask& m) {
    if (m.rows <= 0 || m.cols <= 0) throw ArgError("apply_mask: empty patch grid");
    if (x.height() % m.rows != 0 || x.width() % m.cols != 0)
        throw ArgError("apply_mask: patch grid does not divide image dimensions");
}

void mask_one(ImageBatch& out, std::int64_t image, const PatchMask& m) {
    const std::int64_t ph = out.height() / m.rows;
    const std::int64_t pw = out.width() / m.cols;
    const std::int64_t w = out.width(), c = out.channels();
    float* img = out.image_data(image);
    for (int pr = 0; pr < m.rows; ++pr) {
        for (int pc = 0; pc < m.cols; ++pc) {
            if (!m.masked(pr * m.cols + pc)) continue;
            for (std::int64_t y = pr * ph; y < (pr + 1) * ph; ++y)
                std::fill_n(img + (y * w + pc * pw) * c, pw * c, 0.0f);
        }
    }
}

}  // namespace

ImageBatch apply_mask(const ImageBatch& x, const PatchMask& m) {
    check_grid(x, m);
    ImageBatch out = x;
    for (std::int64_t i = 0; i < out.count(); ++i) mask_one(out, i, m);
    return out;
}

ImageBatch apply_mask(const ImageBatch& x, const std::vector<PatchMask>& masks) {
    if (masks.empty()) throw ArgError("apply_mask: no masks given");
    if (masks.size() == 1) return apply_mask(x, masks[0]);
    if (static_cast<std::int64_t>(masks.size()) != x.count())
        throw ArgError("apply_mask: mask count does not match batch size");
    check_grid(x, masks[0]);
    ImageBatch out = x;
    for (std::int64_t i = 0; i < out.count(); ++i) {
        check_grid(x, masks[static_cast<std::size_t>(i)]);
        mask_one(out, i, masks[static_cast<std::size_t>(i)]);
    }
    return out;
}

}  // namespace denim
