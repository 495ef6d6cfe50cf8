#pragma once

#include "coex/op_model.hpp"
#include "coex/tensor.hpp"

namespace coex {

// Which reference implementation executes a convolution slice.
enum class RefConvImpl { direct, winograd };

// Per-side kernel choice for a co-executed convolution; linear slices always
// run the plain matmul.
struct CoexecImpls {
    RefConvImpl cpu = RefConvImpl::direct;
    RefConvImpl gpu = RefConvImpl::direct;
};

// Y[L x C_out] = X[L x C_in] * W[C_in x C_out], k-ascending summation order.
Tensor linear_forward(const Tensor& x, const Tensor& w);

// X[H x W x C_in], W[K x K x C_in x C_out], zero-padded same-style taps,
// output (H/S, W/S, C_out).
Tensor conv_forward_direct(const Tensor& x, const Tensor& w, std::int64_t stride);

// F(2x2, 3x3) Winograd; requires K=3, S=1; borders zero-padded, odd output
// extents cropped from padded tiles.
Tensor conv_forward_winograd(const Tensor& x, const Tensor& w);

// Runs both channel slices through reference kernels and concatenates along
// the output-channel axis.
Tensor coexec_forward(const OpDescriptor& op, const ChannelPartition& partition, const Tensor& x,
                      const Tensor& w, const CoexecImpls& impls = {});

}  // namespace coex
