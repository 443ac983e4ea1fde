#include "kbqa/params.hpp"

#include <cmath>

#include "kbqa/errors.hpp"

namespace kbqa::ad {

int Parameters::add(const std::string& name, Tensor init) {
    if (index_.count(name) != 0) throw NumericError("duplicate parameter name: " + name);
    const int idx = static_cast<int>(values_.size());
    names_.push_back(name);
    values_.push_back(std::move(init));
    index_[name] = idx;
    return idx;
}

int Parameters::index_of(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
}

Tensor& Parameters::value(const std::string& name) {
    const int idx = index_of(name);
    if (idx < 0) throw NumericError("unknown parameter: " + name);
    return values_[static_cast<size_t>(idx)];
}

int64_t Parameters::scalar_count() const {
    int64_t n = 0;
    for (const Tensor& t : values_) n += t.size();
    return n;
}

std::vector<Tensor> Parameters::make_grad_buffer() const {
    std::vector<Tensor> grads;
    grads.reserve(values_.size());
    for (const Tensor& t : values_) grads.emplace_back(t.shape());
    return grads;
}

Tensor uniform_init(Rng& rng, std::vector<int64_t> shape, double bound) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) t.at(i) = rng.uniform(-bound, bound);
    return t;
}

AdamState::AdamState(const Parameters& params, AdamConfig cfg) : cfg_(cfg) {
    m_.reserve(static_cast<size_t>(params.count()));
    v_.reserve(static_cast<size_t>(params.count()));
    for (int i = 0; i < params.count(); ++i) {
        m_.emplace_back(params.value(i).shape());
        v_.emplace_back(params.value(i).shape());
    }
}

void AdamState::step(Parameters& params, const std::vector<Tensor>& grads) {
    if (static_cast<int>(grads.size()) != params.count()) {
        throw NumericError("adam: gradient buffer does not match parameter count");
    }
    ++timestep_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(timestep_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(timestep_));
    for (int p = 0; p < params.count(); ++p) {
        Tensor& theta = params.value(p);
        const Tensor& g = grads[static_cast<size_t>(p)];
        if (!g.same_shape(theta)) {
            throw NumericError("adam: gradient shape " + g.shape_str() +
                               " does not match parameter " + params.name(p));
        }
        Tensor& m = m_[static_cast<size_t>(p)];
        Tensor& v = v_[static_cast<size_t>(p)];
        for (int64_t i = 0; i < theta.size(); ++i) {
            const double gi = g.at(i);
            m.at(i) = cfg_.beta1 * m.at(i) + (1.0 - cfg_.beta1) * gi;
            v.at(i) = cfg_.beta2 * v.at(i) + (1.0 - cfg_.beta2) * gi * gi;
            const double mhat = m.at(i) / bc1;
            const double vhat = v.at(i) / bc2;
            theta.at(i) -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
        }
    }
}

} // namespace kbqa::ad
