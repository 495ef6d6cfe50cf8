#include "coex/ref_kernels.hpp"

#include <array>

#include "coex/error.hpp"

namespace coex {

namespace {

void require(bool cond, const char* message) {
    if (!cond) throw ContractViolation(message);
}

float padded_tap(const Tensor& x, std::int64_t i, std::int64_t j, std::int64_t c) {
    if (i < 0 || i >= x.dim(0) || j < 0 || j >= x.dim(1)) return 0.0f;
    return x.at(i, j, c);
}

}  // namespace

Tensor linear_forward(const Tensor& x, const Tensor& w) {
    require(x.dims().size() == 2 && w.dims().size() == 2, "linear_forward expects 2-D tensors");
    require(x.dim(1) == w.dim(0), "linear_forward inner dimensions must match");
    const std::int64_t rows = x.dim(0);
    const std::int64_t inner = x.dim(1);
    const std::int64_t cols = w.dim(1);
    Tensor y({rows, cols});
    for (std::int64_t i = 0; i < rows; ++i) {
        for (std::int64_t j = 0; j < cols; ++j) {
            float acc = 0.0f;
            for (std::int64_t k = 0; k < inner; ++k) {
                acc += x.at(i, k) * w.at(k, j);
            }
            y.at(i, j) = acc;
        }
    }
    return y;
}

Tensor conv_forward_direct(const Tensor& x, const Tensor& w, std::int64_t stride) {
    require(x.dims().size() == 3 && w.dims().size() == 4, "conv_forward expects HWC input and KKCC weights");
    require(w.dim(0) == w.dim(1), "conv kernel must be square");
    require(w.dim(2) == x.dim(2), "conv input channels must match weights");
    require(stride == 1 || stride == 2, "conv stride must be 1 or 2");
    const std::int64_t k = w.dim(0);
    const std::int64_t pad = (k - 1) / 2;
    const std::int64_t h_out = x.dim(0) / stride;
    const std::int64_t w_out = x.dim(1) / stride;
    const std::int64_t c_in = x.dim(2);
    const std::int64_t c_out = w.dim(3);
    Tensor y({h_out, w_out, c_out});
    for (std::int64_t oi = 0; oi < h_out; ++oi) {
        for (std::int64_t oj = 0; oj < w_out; ++oj) {
            for (std::int64_t oc = 0; oc < c_out; ++oc) {
                float acc = 0.0f;
                for (std::int64_t u = 0; u < k; ++u) {
                    for (std::int64_t v = 0; v < k; ++v) {
                        for (std::int64_t c = 0; c < c_in; ++c) {
                            acc += padded_tap(x, oi * stride + u - pad, oj * stride + v - pad, c) *
                                   w.at(u, v, c, oc);
                        }
                    }
                }
                y.at(oi, oj, oc) = acc;
            }
        }
    }
    return y;
}

namespace {

// F(2x2,3x3) transform matrices (correlation form):
//   filter  U = G g G^T          (4x4 from 3x3)
//   input   V = B^T d B          (4x4 from 4x4)
//   output  Y = A^T (U .* V) A   (2x2 from 4x4)
constexpr std::array<std::array<float, 3>, 4> kG = {{
    {1.0f, 0.0f, 0.0f},
    {0.5f, 0.5f, 0.5f},
    {0.5f, -0.5f, 0.5f},
    {0.0f, 0.0f, 1.0f},
}};
constexpr std::array<std::array<float, 4>, 4> kBt = {{
    {1.0f, 0.0f, -1.0f, 0.0f},
    {0.0f, 1.0f, 1.0f, 0.0f},
    {0.0f, -1.0f, 1.0f, 0.0f},
    {0.0f, 1.0f, 0.0f, -1.0f},
}};
constexpr std::array<std::array<float, 4>, 2> kAt = {{
    {1.0f, 1.0f, 1.0f, 0.0f},
    {0.0f, 1.0f, -1.0f, -1.0f},
}};

using Mat4 = std::array<std::array<float, 4>, 4>;

Mat4 transform_filter(const Tensor& w, std::int64_t c, std::int64_t oc) {
    std::array<std::array<float, 3>, 4> gg{};
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 3; ++j) {
            float acc = 0.0f;
            for (int t = 0; t < 3; ++t) acc += kG[i][t] * w.at(t, j, c, oc);
            gg[i][j] = acc;
        }
    }
    Mat4 u{};
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            float acc = 0.0f;
            for (int t = 0; t < 3; ++t) acc += gg[i][t] * kG[j][t];
            u[i][j] = acc;
        }
    }
    return u;
}

Mat4 transform_input(const Mat4& d) {
    Mat4 bd{};
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            float acc = 0.0f;
            for (int t = 0; t < 4; ++t) acc += kBt[i][t] * d[t][j];
            bd[i][j] = acc;
        }
    }
    Mat4 v{};
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            float acc = 0.0f;
            for (int t = 0; t < 4; ++t) acc += bd[i][t] * kBt[j][t];
            v[i][j] = acc;
        }
    }
    return v;
}

std::array<std::array<float, 2>, 2> transform_output(const Mat4& m) {
    std::array<std::array<float, 4>, 2> am{};
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 4; ++j) {
            float acc = 0.0f;
            for (int t = 0; t < 4; ++t) acc += kAt[i][t] * m[t][j];
            am[i][j] = acc;
        }
    }
    std::array<std::array<float, 2>, 2> y{};
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            float acc = 0.0f;
            for (int t = 0; t < 4; ++t) acc += am[i][t] * kAt[j][t];
            y[i][j] = acc;
        }
    }
    return y;
}

}  // namespace

Tensor conv_forward_winograd(const Tensor& x, const Tensor& w) {
    require(x.dims().size() == 3 && w.dims().size() == 4, "winograd expects HWC input and KKCC weights");
    if (w.dim(0) != 3 || w.dim(1) != 3) {
        throw UnsupportedKernelError("winograd implementation requires K=3");
    }
    require(w.dim(2) == x.dim(2), "conv input channels must match weights");
    const std::int64_t h = x.dim(0);
    const std::int64_t wd = x.dim(1);
    const std::int64_t c_in = x.dim(2);
    const std::int64_t c_out = w.dim(3);
    const std::int64_t tiles_i = (h + 1) / 2;
    const std::int64_t tiles_j = (wd + 1) / 2;

    Tensor y({h, wd, c_out});
    for (std::int64_t oc = 0; oc < c_out; ++oc) {
        // Per-output-channel filter transforms, reused across all tiles.
        std::vector<Mat4> u(static_cast<std::size_t>(c_in));
        for (std::int64_t c = 0; c < c_in; ++c) u[static_cast<std::size_t>(c)] = transform_filter(w, c, oc);

        for (std::int64_t ti = 0; ti < tiles_i; ++ti) {
            for (std::int64_t tj = 0; tj < tiles_j; ++tj) {
                const std::int64_t i0 = 2 * ti - 1;  // input tile origin, centered padding
                const std::int64_t j0 = 2 * tj - 1;
                Mat4 m{};
                for (std::int64_t c = 0; c < c_in; ++c) {
                    Mat4 d{};
                    for (int a = 0; a < 4; ++a) {
                        for (int b = 0; b < 4; ++b) {
                            d[a][b] = padded_tap(x, i0 + a, j0 + b, c);
                        }
                    }
                    const Mat4 v = transform_input(d);
                    const Mat4& uc = u[static_cast<std::size_t>(c)];
                    for (int a = 0; a < 4; ++a) {
                        for (int b = 0; b < 4; ++b) m[a][b] += uc[a][b] * v[a][b];
                    }
                }
                const auto tile = transform_output(m);
                for (int a = 0; a < 2; ++a) {
                    for (int b = 0; b < 2; ++b) {
                        const std::int64_t oi = 2 * ti + a;
                        const std::int64_t oj = 2 * tj + b;
                        if (oi < h && oj < wd) y.at(oi, oj, oc) = tile[a][b];
                    }
                }
            }
        }
    }
    return y;
}

namespace {

Tensor slice_linear_weights(const Tensor& w, std::int64_t from, std::int64_t count) {
    Tensor out({w.dim(0), count});
    for (std::int64_t i = 0; i < w.dim(0); ++i) {
        for (std::int64_t j = 0; j < count; ++j) out.at(i, j) = w.at(i, from + j);
    }
    return out;
}

Tensor slice_conv_weights(const Tensor& w, std::int64_t from, std::int64_t count) {
    Tensor out({w.dim(0), w.dim(1), w.dim(2), count});
    for (std::int64_t u = 0; u < w.dim(0); ++u) {
        for (std::int64_t v = 0; v < w.dim(1); ++v) {
            for (std::int64_t c = 0; c < w.dim(2); ++c) {
                for (std::int64_t j = 0; j < count; ++j) out.at(u, v, c, j) = w.at(u, v, c, from + j);
            }
        }
    }
    return out;
}

Tensor run_conv_impl(const Tensor& x, const Tensor& w, std::int64_t stride, RefConvImpl impl) {
    if (impl == RefConvImpl::winograd) {
        if (stride != 1) throw UnsupportedKernelError("winograd implementation requires S=1");
        return conv_forward_winograd(x, w);
    }
    return conv_forward_direct(x, w, stride);
}

}  // namespace

Tensor coexec_forward(const OpDescriptor& op, const ChannelPartition& partition, const Tensor& x,
                      const Tensor& w, const CoexecImpls& impls) {
    const SplitOps sides = split(op, partition);

    if (const auto* lin = std::get_if<LinearOp>(&op)) {
        Tensor y({lin->length, lin->c_out});
        if (sides.cpu) {
            const Tensor part = linear_forward(x, slice_linear_weights(w, 0, partition.c_cpu));
            for (std::int64_t i = 0; i < lin->length; ++i) {
                for (std::int64_t j = 0; j < partition.c_cpu; ++j) y.at(i, j) = part.at(i, j);
            }
        }
        if (sides.gpu) {
            const Tensor part = linear_forward(x, slice_linear_weights(w, partition.c_cpu, partition.c_gpu));
            for (std::int64_t i = 0; i < lin->length; ++i) {
                for (std::int64_t j = 0; j < partition.c_gpu; ++j) {
                    y.at(i, partition.c_cpu + j) = part.at(i, j);
                }
            }
        }
        return y;
    }

    const auto& conv = std::get<ConvOp>(op);
    const auto [h_out, w_out] = output_shape(conv);
    Tensor y({h_out, w_out, conv.c_out});
    const auto merge = [&](const Tensor& part, std::int64_t channel_base) {
        for (std::int64_t i = 0; i < h_out; ++i) {
            for (std::int64_t j = 0; j < w_out; ++j) {
                for (std::int64_t c = 0; c < part.dim(2); ++c) {
                    y.at(i, j, channel_base + c) = part.at(i, j, c);
                }
            }
        }
    };
    if (sides.cpu) {
        merge(run_conv_impl(x, slice_conv_weights(w, 0, partition.c_cpu), conv.s, impls.cpu), 0);
    }
    if (sides.gpu) {
        merge(run_conv_impl(x, slice_conv_weights(w, partition.c_cpu, partition.c_gpu), conv.s, impls.gpu),
              partition.c_cpu);
    }
    return y;
}

}  // namespace coex
