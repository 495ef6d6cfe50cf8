#include "coex/tensor.hpp"

#include <cmath>

#include "coex/error.hpp"

namespace coex {

Tensor::Tensor(std::vector<std::int64_t> dims) : dims_(std::move(dims)) {
    std::int64_t total = 1;
    for (const auto d : dims_) {
        if (d <= 0) throw ContractViolation("Tensor extents must be positive");
        total *= d;
    }
    data_.assign(static_cast<std::size_t>(total), 0.0f);
}

bool Tensor::all_finite() const {
    for (const float v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::size_t Tensor::offset2(std::int64_t i, std::int64_t j) const {
    if (dims_.size() != 2 || i < 0 || i >= dims_[0] || j < 0 || j >= dims_[1]) {
        throw ContractViolation("Tensor 2-D index out of range");
    }
    return static_cast<std::size_t>(i * dims_[1] + j);
}

std::size_t Tensor::offset3(std::int64_t i, std::int64_t j, std::int64_t k) const {
    if (dims_.size() != 3 || i < 0 || i >= dims_[0] || j < 0 || j >= dims_[1] || k < 0 ||
        k >= dims_[2]) {
        throw ContractViolation("Tensor 3-D index out of range");
    }
    return static_cast<std::size_t>((i * dims_[1] + j) * dims_[2] + k);
}

std::size_t Tensor::offset4(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) const {
    if (dims_.size() != 4 || i < 0 || i >= dims_[0] || j < 0 || j >= dims_[1] || k < 0 ||
        k >= dims_[2] || l < 0 || l >= dims_[3]) {
        throw ContractViolation("Tensor 4-D index out of range");
    }
    return static_cast<std::size_t>(((i * dims_[1] + j) * dims_[2] + k) * dims_[3] + l);
}

}  // namespace coex
