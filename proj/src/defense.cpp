#include "denim/defense.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "denim/common.hpp"

namespace denim {

DefenseSpec DefenseSpec::none() {
    DefenseSpec d;
    d.kind = Kind::None;
    return d;
}

DefenseSpec DefenseSpec::de3_noise(double sigma, int votes) {
    DefenseSpec d;
    d.kind = Kind::De3Noise;
    d.sigma_de3 = sigma;
    d.eot_votes = votes;
    d.validate();
    return d;
}

DefenseSpec DefenseSpec::de3_mask(double gamma, int votes) {
    DefenseSpec d;
    d.kind = Kind::De3Mask;
    d.gamma_def = gamma;
    d.eot_votes = votes;
    d.validate();
    return d;
}

void DefenseSpec::validate() const {
    if (!(sigma_de3 >= 0.0)) throw ConfigError("defense.sigma_de3 must be >= 0");
    if (!(gamma_def >= 0.0 && gamma_def <= 1.0)) throw ConfigError("defense.gamma_def must lie in [0, 1]");
    if (eot_votes < 1) throw ConfigError("defense.eot_votes must be >= 1");
}

std::string DefenseSpec::describe() const {
    switch (kind) {
        case Kind::None:
            return "none";
        case Kind::De3Noise:
            return "de3_noise(sigma=" + std::to_string(sigma_de3) + ", votes=" + std::to_string(eot_votes) + ")";
        case Kind::De3Mask:
            return "de3_mask(gamma=" + std::to_string(gamma_def) + ", votes=" + std::to_string(eot_votes) + ")";
    }
    throw StateError("defense spec has an invalid kind");
}

bool DefenseSpec::randomized() const {
    switch (kind) {
        case Kind::None:
            return false;
        case Kind::De3Noise:
            return sigma_de3 > 0.0;
        case Kind::De3Mask:
            return gamma_def > 0.0;
    }
    return false;
}

std::string defense_kind_name(DefenseSpec::Kind kind) {
    switch (kind) {
        case DefenseSpec::Kind::None:
            return "none";
        case DefenseSpec::Kind::De3Noise:
            return "de3_noise";
        case DefenseSpec::Kind::De3Mask:
            return "de3_mask";
    }
    throw StateError("defense spec has an invalid kind");
}

DefenseSpec::Kind defense_kind_from(const std::string& name) {
    if (name == "none") return DefenseSpec::Kind::None;
    if (name == "de3_noise") return DefenseSpec::Kind::De3Noise;
    if (name == "de3_mask") return DefenseSpec::Kind::De3Mask;
    throw ConfigError("unknown defense kind '" + name + "'");
}

namespace {

void require_classifier(const ModelBundle& bundle) {
    if (!bundle.classifier) throw StateError("bundle has no classifier head; fine-tune before defended prediction");
}

}  // namespace

Tensor defend_vote(ModelBundle& bundle, const DefenseSpec& defense, const ImageBatch& x, Rng& vote_rng) {
    defense.validate();
    require_classifier(bundle);
    const ImageBatch clipped = clip01(x);
    switch (defense.kind) {
        case DefenseSpec::Kind::None:
            return bundle.classifier->forward(clipped);
        case DefenseSpec::Kind::De3Noise: {
            const ImageBatch noisy = add_noise(clipped, defense.sigma_de3, vote_rng);
            ImageBatch recon = clipped;
            recon.pixels = bundle.decoder.forward(bundle.encoder.forward(noisy));
            return bundle.classifier->forward(recon);
        }
        case DefenseSpec::Kind::De3Mask: {
            const int grid = bundle.arch.grid();
            const MaskSpec mask_spec(defense.gamma_def, grid, grid);
            std::vector<PatchMask> masks;
            masks.reserve(clipped.count());
            for (std::int64_t i = 0; i < clipped.count(); ++i) masks.push_back(sample_mask(mask_spec, vote_rng));
            ImageBatch recon = clipped;
            recon.pixels = bundle.decoder.forward(bundle.encoder.forward(clipped, &masks));
            return bundle.classifier->forward(recon);
        }
    }
    throw StateError("defense spec has an invalid kind");
}

Tensor defend_predict(ModelBundle& bundle, const DefenseSpec& defense, const ImageBatch& x, Rng& rng) {
    defense.validate();
    require_classifier(bundle);
    std::vector<double> acc;
    Tensor logits;
    for (int v = 0; v < defense.eot_votes; ++v) {
        Rng vote_rng = rng.child(static_cast<std::uint64_t>(v));
        logits = defend_vote(bundle, defense, x, vote_rng);
        if (acc.empty()) acc.assign(static_cast<std::size_t>(logits.size()), 0.0);
        for (std::int64_t i = 0; i < logits.size(); ++i) acc[static_cast<std::size_t>(i)] += logits[i];
    }
    for (std::int64_t i = 0; i < logits.size(); ++i)
        logits[i] = static_cast<float>(acc[static_cast<std::size_t>(i)] / defense.eot_votes);
    return logits;
}

double defended_accuracy(ModelBundle& bundle, const DefenseSpec& defense, const ImageBatch& data,
                         std::uint64_t eval_seed) {
    if (data.count() == 0) throw ArgError("defended_accuracy: empty dataset");
    if (static_cast<std::int64_t>(data.labels.size()) != data.count())
        throw ArgError("defended_accuracy: dataset is not fully labeled");
    const std::int64_t chunk_size = 128;
    const Rng root(eval_seed);
    std::int64_t correct = 0;
    for (std::int64_t start = 0, chunk = 0; start < data.count(); start += chunk_size, ++chunk) {
        const std::int64_t stop = std::min(start + chunk_size, data.count());
        std::vector<std::int64_t> idx(static_cast<std::size_t>(stop - start));
        for (std::int64_t i = start; i < stop; ++i) idx[static_cast<std::size_t>(i - start)] = i;
        const ImageBatch part = data.select(idx);
        Rng chunk_rng = root.child(static_cast<std::uint64_t>(chunk));
        const Tensor logits = defend_predict(bundle, defense, part, chunk_rng);
        const std::vector<int> got = predict_classes(logits);
        for (std::size_t i = 0; i < got.size(); ++i)
            if (got[i] == part.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.count());
}

ReconstructionTriple reconstruct_triple(ModelBundle& bundle, const ImageBatch& x, const DegradationSpec& degradation,
                                        Rng& rng) {
    degradation.validate();
    ReconstructionTriple t;
    t.original = clip01(x);
    if (degradation.kind == DegradationSpec::Kind::Noise) {
        t.degraded = t.original;
        for (std::int64_t i = 0; i < t.degraded.count(); ++i) {
            const double sigma = sample_sigma(degradation.sigma, rng);
            add_noise_inplace(t.degraded, i, sigma, rng);
        }
        const Tensor tokens = bundle.encoder.forward(t.degraded);
        t.reconstructed = t.original;
        t.reconstructed.pixels = bundle.decoder.forward(tokens);
    } else {
        std::vector<PatchMask> masks;
        masks.reserve(t.original.count());
        for (std::int64_t i = 0; i < t.original.count(); ++i) masks.push_back(sample_mask(degradation.mask, rng));
        t.degraded = apply_mask(t.original, masks);
        const Tensor tokens = bundle.encoder.forward(t.original, &masks);
        t.reconstructed = t.original;
        t.reconstructed.pixels = bundle.decoder.forward(tokens);
    }
    return t;
}

void write_reconstruction_grid(const ReconstructionTriple& triple, const std::string& path) {
    const ImageBatch* columns[3] = {&triple.original, &triple.degraded, &triple.reconstructed};
    const std::int64_t b = triple.original.count();
    const std::int64_t h = triple.original.height();
    const std::int64_t w = triple.original.width();
    const std::int64_t c = triple.original.channels();
    for (const ImageBatch* col : columns)
        if (col->count() != b || col->height() != h || col->width() != w || col->channels() != c)
            throw ArgError("write_reconstruction_grid: mismatched column shapes");
    if (b == 0) throw ArgError("write_reconstruction_grid: empty batch");
    if (c != 1 && c != 3) throw ArgError("write_reconstruction_grid: expected 1 or 3 channels");

    cv::Mat grid(static_cast<int>(b * h), static_cast<int>(3 * w), c == 3 ? CV_8UC3 : CV_8UC1);
    for (std::int64_t row = 0; row < b; ++row) {
        for (int col = 0; col < 3; ++col) {
            const float* img = columns[col]->image_data(row);
            for (std::int64_t y = 0; y < h; ++y) {
                unsigned char* out = grid.ptr<unsigned char>(static_cast<int>(row * h + y)) + col * w * c;
                for (std::int64_t xpos = 0; xpos < w; ++xpos) {
                    for (std::int64_t ch = 0; ch < c; ++ch) {
                        const float v = std::clamp(img[(y * w + xpos) * c + ch], 0.0f, 1.0f);
                        // RGB in memory, BGR on disk.
                        out[xpos * c + (c - 1 - ch)] = static_cast<unsigned char>(std::lround(v * 255.0f));
                    }
                }
            }
        }
    }
    bool written = false;
    try {
        written = cv::imwrite(path, grid);
    } catch (const cv::Exception& e) {
        throw IoError("failed to write reconstruction grid to " + path + ": " + e.what());
    }
    if (!written) throw IoError("failed to write reconstruction grid to " + path);
}

}  // namespace denim
