#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>

namespace coex {

// Fully-connected layer core: Y[length x c_out] = X[length x c_in] * W[c_in x c_out].
struct LinearOp {
    std::int64_t length = 1;
    std::int64_t c_in = 1;
    std::int64_t c_out = 1;

    LinearOp(std::int64_t length, std::int64_t c_in, std::int64_t c_out);
};

// Square-kernel 2-D convolution with zero-padded same-style borders.
struct ConvOp {
    std::int64_t h_in = 1;
    std::int64_t w_in = 1;
    std::int64_t c_in = 1;
    std::int64_t c_out = 1;
    std::int64_t k = 1;
    std::int64_t s = 1;

    ConvOp(std::int64_t h_in, std::int64_t w_in, std::int64_t c_in, std::int64_t c_out,
           std::int64_t k, std::int64_t s);
};

using OpDescriptor = std::variant<LinearOp, ConvOp>;

// Output-channel split: CPU owns [0, c_cpu), GPU owns [c_cpu, c_cpu + c_gpu).
struct ChannelPartition {
    std::int64_t c_cpu = 0;
    std::int64_t c_gpu = 0;
};

// A side with zero channels is absent rather than a degenerate op.
struct SplitOps {
    std::optional<OpDescriptor> cpu;
    std::optional<OpDescriptor> gpu;
};

std::pair<std::int64_t, std::int64_t> output_shape(const ConvOp& op);

std::int64_t c_out_of(const OpDescriptor& op);

// Multiply-accumulate counted as 2 FLOPs.
std::int64_t flops(const LinearOp& op);
std::int64_t flops(const ConvOp& op);
std::int64_t flops(const OpDescriptor& op);

SplitOps split(const OpDescriptor& op, const ChannelPartition& partition);

// Canonical line-oriented record: {"type":"linear"|"conv","L","C_in","C_out","H_in","W_in","K","S"},
// absent fields omitted.
std::string op_to_json(const OpDescriptor& op);
OpDescriptor op_from_json(const std::string& text);

bool op_equal(const OpDescriptor& a, const OpDescriptor& b);

}  // namespace coex
