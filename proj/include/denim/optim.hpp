#pragma once

#include <vector>

#include "denim/nn.hpp"

namespace denim {

// Optimizer hyperparameters shared by pretraining and fine-tuning.
struct OptimConfig {
    double base_lr = 1e-3;
    double weight_decay = 0.05;
    double warmup_epochs = 5.0;
    bool cosine_schedule = true;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;

    void validate() const {
        if (!(base_lr > 0.0)) throw ConfigError("optim.base_lr must be > 0");
        if (weight_decay < 0.0) throw ConfigError("optim.weight_decay must be >= 0");
        if (warmup_epochs < 0.0) throw ConfigError("optim.warmup_epochs must be >= 0");
    }

    bool operator==(const OptimConfig&) const = default;
};

// Linear warmup to base_lr, then cosine decay to zero over the remaining
// epochs (or constant if the cosine flag is off). `epoch` may be fractional.
double scheduled_lr(const OptimConfig& cfg, double epoch, double total_epochs);

// Decoupled-weight-decay adaptive-moment optimizer over an explicit
// parameter list. Holds first/second moment state per parameter.
class AdamW {
public:
    AdamW(ParamRefs params, const OptimConfig& cfg);

    // One update with the given learning rate; zeroes gradients afterwards.
    void step(double lr);

    void zero_grad();
    std::int64_t num_params() const;

private:
    ParamRefs params_;
    OptimConfig cfg_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::int64_t t_ = 0;
};

}  // namespace denim
