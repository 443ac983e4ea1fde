#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kbqa::ad {

// Dense 64-bit float value, 1-D or 2-D. Row-major for matrices.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int64_t> shape);

    static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
    static Tensor scalar(double v);
    static Tensor vec(std::vector<double> values);
    static Tensor mat(int64_t rows, int64_t cols, std::vector<double> values);
    static Tensor full(std::vector<int64_t> shape, double v);

    const std::vector<int64_t>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    // 2-D accessors; a 1-D tensor behaves as a single row.
    int64_t rows() const { return ndim() == 2 ? shape_[0] : 1; }
    int64_t cols() const { return ndim() == 2 ? shape_[1] : (ndim() == 1 ? shape_[0] : 0); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& at(int64_t i) { return data_[static_cast<size_t>(i)]; }
    double at(int64_t i) const { return data_[static_cast<size_t>(i)]; }
    double& at(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * shape_[1] + c)]; }
    double at(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * shape_[1] + c)]; }
    double* row(int64_t r) { return data_.data() + r * shape_[1]; }
    const double* row(int64_t r) const { return data_.data() + r * shape_[1]; }

    double item() const; // requires size() == 1

    void fill(double v);
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    double sum() const;

    std::string shape_str() const;

private:
    std::vector<int64_t> shape_;
    std::vector<double> data_;
};

} // namespace kbqa::ad
