#include "coex/gpu_dispatch.hpp"

#include "coex/error.hpp"

namespace coex {

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

}  // namespace

std::string kernel_name(KernelId id) {
    switch (id) {
        case KernelId::linear_generic: return "linear_generic";
        case KernelId::conv_constant: return "conv_constant";
        case KernelId::winograd: return "winograd";
        case KernelId::conv_generic: return "conv_generic";
    }
    throw ContractViolation("unknown kernel id");
}

KernelId kernel_from_name(const std::string& name) {
    if (name == "linear_generic") return KernelId::linear_generic;
    if (name == "conv_constant") return KernelId::conv_constant;
    if (name == "winograd") return KernelId::winograd;
    if (name == "conv_generic") return KernelId::conv_generic;
    throw ValidationError("unknown kernel name: " + name);
}

void DeviceProfile::validate() const {
    const bool ok = constant_mem_bytes > 0 && reg_cout_limit > 0 && winograd_cout_min > 0 &&
                    winograd_area_min > 0 && compute_units > 0 && tile_x > 0 && tile_y > 0 &&
                    wg_x > 0 && wg_y > 0 && !name.empty();
    if (!ok) throw ValidationError("device profile fields must be positive and named");
}

KernelId select_kernel(const ConvOp& op, const DeviceProfile& profile) {
    const auto [h_out, w_out] = output_shape(op);
    if (op.k == 3 && op.s == 1 && op.c_out > profile.winograd_cout_min &&
        h_out * w_out >= profile.winograd_area_min) {
        return KernelId::winograd;
    }
    const std::int64_t filter_bytes = op.k * op.k * op.c_in * op.c_out * 4;
    if (filter_bytes <= profile.constant_mem_bytes && op.c_out <= profile.reg_cout_limit) {
        return KernelId::conv_constant;
    }
    return KernelId::conv_generic;
}

KernelId select_kernel(const OpDescriptor& op, const DeviceProfile& profile) {
    if (std::holds_alternative<LinearOp>(op)) return KernelId::linear_generic;
    return select_kernel(std::get<ConvOp>(op), profile);
}

DispatchInfo dispatch(const OpDescriptor& op, KernelId kernel, const DeviceProfile& profile) {
    std::int64_t rows = 0;
    const std::int64_t channels = c_out_of(op);
    if (const auto* lin = std::get_if<LinearOp>(&op)) {
        if (kernel != KernelId::linear_generic) {
            throw ContractViolation("linear ops dispatch only through linear_generic");
        }
        rows = lin->length;
    } else {
        const auto& conv = std::get<ConvOp>(op);
        if (kernel == KernelId::linear_generic) {
            throw ContractViolation("conv ops cannot dispatch through linear_generic");
        }
        const auto [h_out, w_out] = output_shape(conv);
        if (kernel == KernelId::winograd) {
            rows = ceil_div(h_out, 2) * ceil_div(w_out, 2);  // 2x2 output tiles
        } else {
            rows = h_out * w_out;
        }
    }

    DispatchInfo info;
    info.kernel = kernel;
    info.grid_x = ceil_div(rows, profile.tile_x);
    info.grid_y = ceil_div(channels, profile.tile_y);
    info.wg_x = profile.wg_x;
    info.wg_y = profile.wg_y;
    info.wg_count = ceil_div(info.grid_x, profile.wg_x) * ceil_div(info.grid_y, profile.wg_y);
    const double dispatched = static_cast<double>(ceil_div(info.grid_x, profile.wg_x) * profile.wg_x) *
                              static_cast<double>(ceil_div(info.grid_y, profile.wg_y) * profile.wg_y);
    info.padding_waste = 1.0 - static_cast<double>(info.grid_x) * static_cast<double>(info.grid_y) / dispatched;
    return info;
}

std::int64_t wave_count(const DispatchInfo& info, const DeviceProfile& profile) {
    return ceil_div(info.wg_count, profile.compute_units);
}

FeatureVector features(const OpDescriptor& op, const DeviceProfile& profile, FeatureMode mode) {
    FeatureVector out;
    const auto push = [&out](const char* name, double value) {
        out.names.emplace_back(name);
        out.values.push_back(value);
    };

    if (const auto* lin = std::get_if<LinearOp>(&op)) {
        push("L", static_cast<double>(lin->length));
        push("C_in", static_cast<double>(lin->c_in));
        push("C_out", static_cast<double>(lin->c_out));
    } else {
        const auto& conv = std::get<ConvOp>(op);
        push("H_in", static_cast<double>(conv.h_in));
        push("W_in", static_cast<double>(conv.w_in));
        push("C_in", static_cast<double>(conv.c_in));
        push("C_out", static_cast<double>(conv.c_out));
        push("K", static_cast<double>(conv.k));
        push("S", static_cast<double>(conv.s));
    }
    push("flops", static_cast<double>(flops(op)));

    if (mode == FeatureMode::augmented) {
        const KernelId kernel = select_kernel(op, profile);
        const DispatchInfo info = dispatch(op, kernel, profile);
        push("kernel_id", static_cast<double>(static_cast<int>(kernel)));
        push("wg_count", static_cast<double>(info.wg_count));
        push("wg_x", static_cast<double>(info.wg_x));
        push("wg_y", static_cast<double>(info.wg_y));
        push("padding_waste", info.padding_waste);
        push("wave_count", static_cast<double>(wave_count(info, profile)));
    }
    return out;
}

}  // namespace coex
