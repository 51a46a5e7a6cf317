#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "denim/nn.hpp"

namespace denim::fd {

// Scalar probe loss: sum of y ⊙ w with double accumulation, so finite
// differencing is not drowned by float32 reduction noise.
inline double weighted_sum(const Tensor& y, const Tensor& w) {
    double s = 0.0;
    for (std::int64_t i = 0; i < y.size(); ++i) s += static_cast<double>(y[i]) * static_cast<double>(w[i]);
    return s;
}

// Central difference of f with respect to one float slot.
inline double coord_derivative(const std::function<double()>& f, float* slot, double h) {
    const float saved = *slot;
    *slot = static_cast<float>(static_cast<double>(saved) + h);
    const double up = f();
    *slot = static_cast<float>(static_cast<double>(saved) - h);
    const double down = f();
    *slot = saved;
    return (up - down) / (2.0 * h);
}

// Relative gap with a floor on the denominator so near-zero pairs compare
// absolutely instead of blowing up.
inline double rel_gap(double fd_value, double analytic, double floor = 0.1) {
    return std::abs(fd_value - analytic) / std::max(std::abs(fd_value) + std::abs(analytic), floor);
}

// Indices to probe: every coordinate of small tensors, a deterministic
// stride otherwise.
inline std::vector<std::int64_t> probe_indices(std::int64_t size, std::int64_t max_probes = 64) {
    std::vector<std::int64_t> out;
    if (size <= max_probes) {
        for (std::int64_t i = 0; i < size; ++i) out.push_back(i);
    } else {
        const std::int64_t stride = size / max_probes;
        for (std::int64_t i = 0; i < max_probes; ++i) out.push_back(i * stride);
    }
    return out;
}

// Worst relative gap between analytic gradients and central differences over
// probed coordinates of `values` (grads must already be populated).
inline double worst_coord_gap(const std::function<double()>& f, Tensor& values, const Tensor& grads, double h,
                              std::int64_t max_probes = 64) {
    double worst = 0.0;
    for (std::int64_t i : probe_indices(values.size(), max_probes)) {
        const double fd_value = coord_derivative(f, &values[i], h);
        worst = std::max(worst, rel_gap(fd_value, static_cast<double>(grads[i])));
    }
    return worst;
}

// Relative gap between the analytic directional derivative u.g and a central
// difference along a random unit direction u spanning the given buffers.
// Aggregating over a direction keeps the signal well above float32 forward
// noise on deep nets; spanning several tensors at once aggregates further.
struct Slot {
    Tensor* values;
    const Tensor* grads;
};

inline double direction_gap(const std::function<double()>& f, const std::vector<Slot>& slots, Rng& rng, double h) {
    std::int64_t total = 0;
    for (const Slot& s : slots) total += s.values->size();
    std::vector<float> u(static_cast<std::size_t>(total));
    std::vector<float> saved(static_cast<std::size_t>(total));
    double norm = 0.0;
    for (auto& v : u) {
        v = static_cast<float>(rng.normal());
        norm += static_cast<double>(v) * static_cast<double>(v);
    }
    norm = std::sqrt(norm);

    double analytic = 0.0;
    std::int64_t off = 0;
    for (const Slot& s : slots) {
        for (std::int64_t i = 0; i < s.values->size(); ++i, ++off) {
            u[static_cast<std::size_t>(off)] /= static_cast<float>(norm);
            saved[static_cast<std::size_t>(off)] = (*s.values)[i];
            analytic += static_cast<double>(u[static_cast<std::size_t>(off)]) * static_cast<double>((*s.grads)[i]);
        }
    }

    auto shift = [&](double a) {
        std::int64_t k = 0;
        for (const Slot& s : slots)
            for (std::int64_t i = 0; i < s.values->size(); ++i, ++k)
                (*s.values)[i] = static_cast<float>(static_cast<double>(saved[static_cast<std::size_t>(k)]) +
                                                    a * static_cast<double>(u[static_cast<std::size_t>(k)]));
    };
    shift(h);
    const double up = f();
    shift(-h);
    const double down = f();
    shift(0.0);
    const double fd_value = (up - down) / (2.0 * h);
    return rel_gap(fd_value, analytic);
}

inline double direction_gap(const std::function<double()>& f, Tensor& values, const Tensor& grads, Rng& rng,
                            double h) {
    return direction_gap(f, std::vector<Slot>{{&values, &grads}}, rng, h);
}

inline double joint_direction_gap(const std::function<double()>& f, ParamRefs params, Rng& rng, double h) {
    std::vector<Slot> slots;
    slots.reserve(params.size());
    for (Param* p : params) slots.push_back({&p->value, &p->grad});
    return direction_gap(f, slots, rng, h);
}

}  // namespace denim::fd
