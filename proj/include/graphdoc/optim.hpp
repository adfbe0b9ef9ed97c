#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "graphdoc/param_store.hpp"

namespace graphdoc {

/// Per-parameter Adam moments plus the shared step counter.
struct AdamState {
    std::map<std::string, Tensor> m; // first moments
    std::map<std::string, Tensor> v; // second moments
    std::uint64_t t = 0;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

/// One Adam step with bias correction over every parameter in the store,
/// consuming store.grads. Weight decay is decoupled: theta -= lr*wd*theta
/// before the moment update.
void adam_step(ParamStore& params, AdamState& state, double lr, const AdamConfig& cfg);

enum class LrSchedule { Constant, LinearDecay };

/// Linear warmup from 0 to base_lr over warmup_rate*total_steps steps, then
/// either flat or linear decay to 0 at total_steps.
double learning_rate(std::uint64_t step, std::uint64_t total_steps, double base_lr,
                     double warmup_rate, LrSchedule schedule = LrSchedule::LinearDecay);

} // namespace graphdoc
