#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coex/op_model.hpp"

namespace coex {

// GPU code paths a backend may pick for one op.
enum class KernelId : int {
    linear_generic = 0,
    conv_constant = 1,
    winograd = 2,
    conv_generic = 3,
};

std::string kernel_name(KernelId id);
KernelId kernel_from_name(const std::string& name);

// Hardware knobs behind kernel selection and workgroup dispatch. Defaults are
// documented stand-ins, not vendor ground truth.
struct DeviceProfile {
    std::string name = "default";
    std::int64_t constant_mem_bytes = 16384;
    std::int64_t reg_cout_limit = 64;
    std::int64_t winograd_cout_min = 128;
    std::int64_t winograd_area_min = 256;
    std::int64_t compute_units = 8;
    std::int64_t tile_x = 4;  // output cells per work item, row axis
    std::int64_t tile_y = 4;  // output cells per work item, channel axis
    std::int64_t wg_x = 8;    // workgroup size in tiles, row axis
    std::int64_t wg_y = 4;    // workgroup size in tiles, channel axis

    void validate() const;
};

// Result of the workgroup dispatch heuristic for one (op, kernel) pair.
struct DispatchInfo {
    KernelId kernel = KernelId::linear_generic;
    std::int64_t grid_x = 1;  // work-item tiles along rows
    std::int64_t grid_y = 1;  // work-item tiles along output channels
    std::int64_t wg_x = 1;
    std::int64_t wg_y = 1;
    std::int64_t wg_count = 1;
    double padding_waste = 0.0;  // dispatched tiles outside the output
};

// Ordered feature schema; deterministic for a given (op, profile).
struct FeatureVector {
    std::vector<std::string> names;
    std::vector<double> values;
};

enum class FeatureMode { augmented, baseline };

KernelId select_kernel(const ConvOp& op, const DeviceProfile& profile);
KernelId select_kernel(const OpDescriptor& op, const DeviceProfile& profile);

DispatchInfo dispatch(const OpDescriptor& op, KernelId kernel, const DeviceProfile& profile);

std::int64_t wave_count(const DispatchInfo& info, const DeviceProfile& profile);

FeatureVector features(const OpDescriptor& op, const DeviceProfile& profile,
                       FeatureMode mode = FeatureMode::augmented);

}  // namespace coex
