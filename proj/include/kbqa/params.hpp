#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "kbqa/rng.hpp"
#include "kbqa/tensor.hpp"

namespace kbqa::ad {

// Named learnable tensors. Insertion order is fixed and drives deterministic
// initialization, gradient-buffer layout and checkpoint serialization.
class Parameters {
public:
    int add(const std::string& name, Tensor init); // unique name, returns index
    int index_of(const std::string& name) const;   // -1 when absent
    bool has(const std::string& name) const { return index_of(name) >= 0; }

    Tensor& value(int idx) { return values_[static_cast<size_t>(idx)]; }
    const Tensor& value(int idx) const { return values_[static_cast<size_t>(idx)]; }
    Tensor& value(const std::string& name);
    const std::string& name(int idx) const { return names_[static_cast<size_t>(idx)]; }

    int count() const { return static_cast<int>(values_.size()); }
    int64_t scalar_count() const;

    // Zeroed tensors matching every parameter shape, in parameter order.
    std::vector<Tensor> make_grad_buffer() const;

private:
    std::vector<std::string> names_;
    std::vector<Tensor> values_;
    std::unordered_map<std::string, int> index_;
};

// Uniform(-bound, bound) init, elements drawn in row-major order.
Tensor uniform_init(Rng& rng, std::vector<int64_t> shape, double bound);

// Adam with bias correction. Moments are laid out in parameter order.
struct AdamConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class AdamState {
public:
    AdamState(const Parameters& params, AdamConfig cfg);

    // One update from the given gradients (parameter order). Gradients are
    // consumed as-is; the caller zeroes them between steps.
    void step(Parameters& params, const std::vector<Tensor>& grads);

    int64_t timestep() const { return timestep_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    int64_t timestep_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

} // namespace kbqa::ad
