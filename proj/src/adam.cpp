#include "camnet/adam.hpp"

#include <cmath>

namespace camnet {

void Adam::step(const std::vector<ParamSlot>& slots, float lr, float beta1, float beta2, float eps,
                int t) {
    if (t < 1) throw TrainError("adam_step: step count must be >= 1");
    const double bc1 = 1.0 - std::pow(static_cast<double>(beta1), t);
    const double bc2 = 1.0 - std::pow(static_cast<double>(beta2), t);
    for (const ParamSlot& s : slots) {
        Moments& mo = state_[s.name];
        if (mo.m.empty()) {
            mo.m.assign(s.value->data.size(), 0.0f);
            mo.v.assign(s.value->data.size(), 0.0f);
        }
        for (size_t i = 0; i < s.value->data.size(); ++i) {
            float g = s.grad->data[i];
            if (!std::isfinite(g))
                throw TrainError("adam_step: non-finite gradient in parameter '" + s.name + "'");
            mo.m[i] = beta1 * mo.m[i] + (1.0f - beta1) * g;
            mo.v[i] = beta2 * mo.v[i] + (1.0f - beta2) * g * g;
            double mhat = mo.m[i] / bc1;
            double vhat = mo.v[i] / bc2;
            s.value->data[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps));
        }
        s.grad->fill(0.0f);
    }
}

}  // namespace camnet
