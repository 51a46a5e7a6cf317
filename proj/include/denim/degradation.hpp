#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "denim/image.hpp"
#include "denim/rng.hpp"

namespace denim {

// Sampler for the noise scale sigma. Sigma is always expressed in 0-255
// pixel units and divided by 255 where it is applied.
struct SigmaSpec {
    enum class Kind { Global, Uniform, Gamma };

    Kind kind = Kind::Global;
    double sigma0 = 0.0;  // Global
    double lo = 0.0;      // Uniform
    double hi = 0.0;
    double shape = 0.0;  // Gamma(shape k, scale theta)
    double scale = 0.0;

    static SigmaSpec global(double sigma0);
    static SigmaSpec uniform(double lo, double hi);
    static SigmaSpec gamma(double shape, double scale);

    void validate() const;  // throws ConfigError
    std::string describe() const;

    bool operator==(const SigmaSpec&) const = default;
};

// Patch-mask sampler: mask ratio over a (rows x cols) patch lattice.
struct MaskSpec {
    double ratio = 0.0;
    int rows = 0;
    int cols = 0;

    MaskSpec() = default;
    MaskSpec(double ratio_, int rows_, int cols_) : ratio(ratio_), rows(rows_), cols(cols_) {}

    int num_patches() const { return rows * cols; }
    // Number of masked patches is deterministic given (ratio, N).
    int num_masked() const;

    void validate() const;
    std::string describe() const;

    bool operator==(const MaskSpec&) const = default;
};

// Binary mask over the patch grid; 1 = masked.
struct PatchMask {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> bits;  // rows*cols

    PatchMask() = default;
    PatchMask(int rows_, int cols_) : rows(rows_), cols(cols_), bits(static_cast<std::size_t>(rows_ * cols_), 0) {}

    int num_patches() const { return rows * cols; }
    bool masked(int patch) const { return bits[static_cast<std::size_t>(patch)] != 0; }
    int popcount() const;
};

// Which degradation drives a pretraining run (and the matching defense).
struct DegradationSpec {
    enum class Kind { Noise, Mask };

    Kind kind = Kind::Noise;
    SigmaSpec sigma;  // Noise
    MaskSpec mask;    // Mask

    static DegradationSpec noise(SigmaSpec s) {
        DegradationSpec d;
        d.kind = Kind::Noise;
        d.sigma = s;
        return d;
    }
    static DegradationSpec masking(MaskSpec m) {
        DegradationSpec d;
        d.kind = Kind::Mask;
        d.mask = m;
        return d;
    }

    void validate() const;
    std::string describe() const;

    bool operator==(const DegradationSpec&) const = default;
};

// Draw one sigma (0-255 units) from the spec.
double sample_sigma(const SigmaSpec& spec, Rng& rng);

// x + (sigma/255) * eps, eps ~ N(0, I) i.i.d. per pixel. Output is not
// clipped; the pretraining data distribution stays exactly Gaussian around x.
ImageBatch add_noise(const ImageBatch& x, double sigma, Rng& rng);

// In-place variant for one image of a batch.
void add_noise_inplace(ImageBatch& batch, std::int64_t image, double sigma, Rng& rng);

// Uniformly random mask with exactly round(ratio * N) patches masked.
PatchMask sample_mask(const MaskSpec& spec, Rng& rng);

// Zero all pixels of masked patches; other pixels unchanged.
ImageBatch apply_mask(const ImageBatch& x, const PatchMask& m);

// Per-image masks over a batch (masks.size() == 1 applies one mask to all).
ImageBatch apply_mask(const ImageBatch& x, const std::vector<PatchMask>& masks);

}  // namespace denim
