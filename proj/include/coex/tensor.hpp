#pragma once

#include <cstdint>
#include <vector>

namespace coex {

// Dense row-major float tensor; last dimension varies fastest.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::int64_t> dims);

    const std::vector<std::int64_t>& dims() const { return dims_; }
    std::int64_t dim(std::size_t axis) const { return dims_.at(axis); }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float& at(std::int64_t i, std::int64_t j) { return data_[offset2(i, j)]; }
    float at(std::int64_t i, std::int64_t j) const { return data_[offset2(i, j)]; }
    float& at(std::int64_t i, std::int64_t j, std::int64_t k) { return data_[offset3(i, j, k)]; }
    float at(std::int64_t i, std::int64_t j, std::int64_t k) const { return data_[offset3(i, j, k)]; }
    float& at(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) {
        return data_[offset4(i, j, k, l)];
    }
    float at(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) const {
        return data_[offset4(i, j, k, l)];
    }

    bool all_finite() const;

private:
    std::size_t offset2(std::int64_t i, std::int64_t j) const;
    std::size_t offset3(std::int64_t i, std::int64_t j, std::int64_t k) const;
    std::size_t offset4(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) const;

    std::vector<std::int64_t> dims_;
    std::vector<float> data_;
};

}  // namespace coex
