#include "graphdoc/gradcheck.hpp"

#include <cmath>

#include "graphdoc/error.hpp"

namespace graphdoc {

namespace {

double eval_loss(const LossFn& loss_fn, const ParamStore& params) {
    Tape tape;
    Var loss = loss_fn(tape, params);
    return tape.scalar(loss);
}

} // namespace

double check_gradients(const LossFn& loss_fn, ParamStore& params, double eps) {
    if (eps < 1e-7 || eps > 1e-4)
        throw usage_error("check_gradients: eps outside [1e-7, 1e-4]");

    // Two evaluations at the same point must agree bitwise, otherwise the
    // numeric differences below are meaningless.
    const double f0 = eval_loss(loss_fn, params);
    const double f1 = eval_loss(loss_fn, params);
    if (!(f0 == f1))
        throw check_error("check_gradients: loss_fn is not deterministic");

    Tape tape;
    Var loss = loss_fn(tape, params);
    tape.backward(loss);
    tape.export_grads(params);

    double worst = 0.0;
    for (auto& [path, theta] : params.values) {
        const Tensor& analytic = params.grads.at(path);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double orig = theta.data[i];
            theta.data[i] = orig + eps;
            const double fp = eval_loss(loss_fn, params);
            theta.data[i] = orig - eps;
            const double fm = eval_loss(loss_fn, params);
            theta.data[i] = orig;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic.data[i];
            const double rel =
                std::fabs(a - numeric) / std::max(1e-8, std::fabs(a) + std::fabs(numeric));
            if (rel > worst) worst = rel;
        }
    }
    return worst;
}

} // namespace graphdoc
