#pragma once

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "camnet/param.hpp"

namespace camnet {

class TrainError : public std::runtime_error {
public:
    explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Adam with bias correction. Moment state is keyed by slot name so it
/// survives re-flattening of the parameter list.
class Adam {
public:
    /// In-place update; grads are zeroed afterward. t is 1-based.
    void step(const std::vector<ParamSlot>& slots, float lr, float beta1, float beta2, float eps,
              int t);

private:
    struct Moments {
        std::vector<float> m, v;
    };
    std::unordered_map<std::string, Moments> state_;
};

}  // namespace camnet
