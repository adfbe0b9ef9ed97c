#include "graphdoc/optim.hpp"

#include <cmath>

#include "graphdoc/error.hpp"

namespace graphdoc {

void adam_step(ParamStore& params, AdamState& state, double lr, const AdamConfig& cfg) {
    if (lr < 0.0) throw usage_error("adam_step: negative learning rate");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (auto& [path, theta] : params.values) {
        auto git = params.grads.find(path);
        if (git == params.grads.end())
            throw data_error("adam_step: missing gradient for " + path);
        const Tensor& g = git->second;
        require_same_shape(theta, g, "adam_step");
        Tensor& m = state.m.try_emplace(path, Tensor::zeros(theta.shape)).first->second;
        Tensor& v = state.v.try_emplace(path, Tensor::zeros(theta.shape)).first->second;
        require_same_shape(theta, m, "adam_step moments");
        for (std::size_t i = 0; i < theta.size(); ++i) {
            if (cfg.weight_decay != 0.0)
                theta.data[i] -= lr * cfg.weight_decay * theta.data[i];
            const double gi = g.data[i];
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * gi;
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * gi * gi;
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            theta.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

double learning_rate(std::uint64_t step, std::uint64_t total_steps, double base_lr,
                     double warmup_rate, LrSchedule schedule) {
    if (total_steps == 0) throw usage_error("learning_rate: total_steps == 0");
    if (step > total_steps) throw usage_error("learning_rate: step beyond total_steps");
    if (warmup_rate < 0.0 || warmup_rate >= 1.0)
        throw usage_error("learning_rate: warmup_rate outside [0,1)");
    const double warmup_steps = warmup_rate * static_cast<double>(total_steps);
    const double s = static_cast<double>(step);
    if (warmup_steps > 0.0 && s < warmup_steps) return base_lr * s / warmup_steps;
    if (schedule == LrSchedule::Constant) return base_lr;
    const double span = static_cast<double>(total_steps) - warmup_steps;
    return base_lr * (static_cast<double>(total_steps) - s) / span;
}

} // namespace graphdoc
