#include "kbqa/tensor.hpp"

#include <cmath>
#include <sstream>

#include "kbqa/errors.hpp"

namespace kbqa::ad {

Tensor::Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    if (shape_.size() > 2) throw NumericError("tensors are limited to 1-D and 2-D");
    int64_t n = 1;
    for (int64_t d : shape_) {
        if (d < 0) throw NumericError("negative tensor dimension");
        n *= d;
    }
    data_.assign(static_cast<size_t>(n), 0.0);
}

Tensor Tensor::scalar(double v) {
    Tensor t({1});
    t.data_[0] = v;
    return t;
}

Tensor Tensor::vec(std::vector<double> values) {
    Tensor t;
    t.shape_ = {static_cast<int64_t>(values.size())};
    t.data_ = std::move(values);
    return t;
}

Tensor Tensor::mat(int64_t rows, int64_t cols, std::vector<double> values) {
    if (static_cast<int64_t>(values.size()) != rows * cols) {
        throw NumericError("matrix literal size does not match " + std::to_string(rows) + "x" +
                           std::to_string(cols));
    }
    Tensor t;
    t.shape_ = {rows, cols};
    t.data_ = std::move(values);
    return t;
}

Tensor Tensor::full(std::vector<int64_t> shape, double v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
}

double Tensor::item() const {
    if (size() != 1) throw NumericError("item() on tensor of shape " + shape_str());
    return data_[0];
}

void Tensor::fill(double v) {
    for (double& x : data_) x = v;
}

bool Tensor::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

double Tensor::sum() const {
    double s = 0.0;
    for (double x : data_) s += x;
    return s;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape_.size(); ++i) {
        if (i > 0) os << ", ";
        os << shape_[i];
    }
    os << "]";
    return os.str();
}

} // namespace kbqa::ad
