#include "denim/optim.hpp"

#include <cmath>
#include <numbers>

namespace denim {

double scheduled_lr(const OptimConfig& cfg, double epoch, double total_epochs) {
    if (epoch < 0.0) throw ArgError("scheduled_lr: epoch must be >= 0");
    if (total_epochs <= 0.0) throw ArgError("scheduled_lr: total_epochs must be > 0");
    if (cfg.warmup_epochs > 0.0 && epoch < cfg.warmup_epochs) {
        return cfg.base_lr * (epoch / cfg.warmup_epochs);
    }
    if (!cfg.cosine_schedule) return cfg.base_lr;
    const double span = std::max(total_epochs - cfg.warmup_epochs, 1e-12);
    const double progress = std::min((epoch - cfg.warmup_epochs) / span, 1.0);
    return cfg.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(ParamRefs params, const OptimConfig& cfg) : params_(std::move(params)), cfg_(cfg) {
    cfg_.validate();
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Param* p : params_) {
        m_.push_back(Tensor::zeros(p->value.shape()));
        v_.push_back(Tensor::zeros(p->value.shape()));
    }
}

void AdamW::step(double lr) {
    if (lr < 0.0) throw ArgError("AdamW::step: lr must be >= 0");
    ++t_;
    const double bias1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bias2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const float b1 = static_cast<float>(cfg_.beta1);
    const float b2 = static_cast<float>(cfg_.beta2);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Param& p = *params_[i];
        auto w = p.value.vec();
        auto g = p.grad.vec();
        auto m = m_[i].vec();
        auto v = v_[i].vec();
        m = b1 * m + (1.0f - b1) * g;
        v = b2 * v + (1.0f - b2) * g.cwiseProduct(g);
        const auto m_hat = (m / static_cast<float>(bias1)).eval();
        const auto v_hat = (v / static_cast<float>(bias2)).eval();
        // Decay is decoupled from the gradient-based update.
        w -= static_cast<float>(lr * cfg_.weight_decay) * w;
        w -= static_cast<float>(lr) *
             (m_hat.array() / (v_hat.array().sqrt() + static_cast<float>(cfg_.eps))).matrix();
        g.setZero();
    }
}

void AdamW::zero_grad() {
    for (Param* p : params_) p->zero_grad();
}

std::int64_t AdamW::num_params() const {
    std::int64_t n = 0;
    for (const Param* p : params_) n += p->value.size();
    return n;
}

}  // namespace denim
