#include "coex/device_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "coex/error.hpp"
#include "coex/rng.hpp"

namespace coex {

std::string executor_name(Executor e) { return e == Executor::gpu ? "gpu" : "cpu"; }

Executor executor_from_name(const std::string& name) {
    if (name == "gpu") return Executor::gpu;
    if (name == "cpu") return Executor::cpu;
    throw ValidationError("unknown executor: " + name);
}

void SyntheticDeviceSpec::validate() const {
    profile.validate();
    if (gpu_dispatch_us < 0 || cpu_gflops_1t <= 0 || cpu_overhead_us < 0) {
        throw ValidationError("synthetic spec costs must be non-negative and throughput positive");
    }
    if (noise_rel < 0.0 || noise_rel > 0.1) {
        throw ValidationError("noise_rel must lie in [0, 0.1]");
    }
    for (const auto& [kernel, us] : wave_us) {
        if (us <= 0) throw ValidationError("wave_us must be positive for " + kernel_name(kernel));
    }
    const auto it1 = cpu_scaling.find(1);
    if (it1 == cpu_scaling.end() || it1->second != 1.0) {
        throw ValidationError("cpu_scaling(1) must be 1.0");
    }
    double prev_total = 0.0;
    for (int t = 1; t <= 3; ++t) {
        const auto it = cpu_scaling.find(t);
        if (it == cpu_scaling.end()) throw ValidationError("cpu_scaling must cover threads 1..3");
        const double total = t * it->second;
        if (total < prev_total) throw ValidationError("total CPU throughput must be monotone in threads");
        prev_total = total;
    }
}

namespace {

std::uint64_t op_noise_key(const OpDescriptor& op, Executor executor, int threads,
                           std::uint64_t seed) {
    std::uint64_t h = splitmix64(seed);
    if (const auto* lin = std::get_if<LinearOp>(&op)) {
        h = hash_combine(h, 1);
        h = hash_combine(h, static_cast<std::uint64_t>(lin->length));
        h = hash_combine(h, static_cast<std::uint64_t>(lin->c_in));
        h = hash_combine(h, static_cast<std::uint64_t>(lin->c_out));
    } else {
        const auto& conv = std::get<ConvOp>(op);
        h = hash_combine(h, 2);
        h = hash_combine(h, static_cast<std::uint64_t>(conv.h_in));
        h = hash_combine(h, static_cast<std::uint64_t>(conv.w_in));
        h = hash_combine(h, static_cast<std::uint64_t>(conv.c_in));
        h = hash_combine(h, static_cast<std::uint64_t>(conv.c_out));
        h = hash_combine(h, static_cast<std::uint64_t>(conv.k));
        h = hash_combine(h, static_cast<std::uint64_t>(conv.s));
    }
    h = hash_combine(h, executor == Executor::gpu ? 0x67 : 0x63);
    h = hash_combine(h, static_cast<std::uint64_t>(threads));
    return h;
}

// Multiplicative Uniform(1-noise, 1+noise), keyed by (op, executor, threads,
// seed) so oracle calls are pure and order-independent.
double noise_factor(const OpDescriptor& op, Executor executor, int threads,
                    const SyntheticDeviceSpec& spec) {
    if (spec.noise_rel == 0.0) return 1.0;
    const double u = hash_unit_real(op_noise_key(op, executor, threads, spec.seed));
    return 1.0 - spec.noise_rel + 2.0 * spec.noise_rel * u;
}

// FLOPs one workgroup covers: output cells per workgroup times work per cell.
// Winograd counts its 2x2 tiles as cells (72*C_in FLOPs each under the 2/MAC
// convention: 4 outputs, 9 taps).
double per_workgroup_mflop(const OpDescriptor& op, KernelId kernel, const DeviceProfile& profile) {
    const double cells = static_cast<double>(profile.wg_x * profile.wg_y * profile.tile_x * profile.tile_y);
    double flops_per_cell = 0.0;
    if (const auto* lin = std::get_if<LinearOp>(&op)) {
        flops_per_cell = 2.0 * static_cast<double>(lin->c_in);
    } else {
        const auto& conv = std::get<ConvOp>(op);
        if (kernel == KernelId::winograd) {
            flops_per_cell = 8.0 * 9.0 * static_cast<double>(conv.c_in);
        } else {
            flops_per_cell = 2.0 * static_cast<double>(conv.k * conv.k) * static_cast<double>(conv.c_in);
        }
    }
    return cells * flops_per_cell / 1e6;
}

}  // namespace

double synth_gpu_latency(const OpDescriptor& op, const SyntheticDeviceSpec& spec) {
    const KernelId kernel = select_kernel(op, spec.profile);
    const DispatchInfo info = dispatch(op, kernel, spec.profile);
    const std::int64_t waves = wave_count(info, spec.profile);
    const auto it = spec.wave_us.find(kernel);
    if (it == spec.wave_us.end()) {
        throw ValidationError("synthetic spec lacks wave_us for " + kernel_name(kernel));
    }
    const double base = spec.gpu_dispatch_us +
                        static_cast<double>(waves) * it->second * per_workgroup_mflop(op, kernel, spec.profile);
    return base * noise_factor(op, Executor::gpu, 0, spec);
}

double synth_cpu_latency(const OpDescriptor& op, int threads, const SyntheticDeviceSpec& spec) {
    if (threads < 1 || threads > 3) throw ContractViolation("CPU threads must be in {1,2,3}");
    const auto it = spec.cpu_scaling.find(threads);
    if (it == spec.cpu_scaling.end()) throw ValidationError("cpu_scaling missing thread count");
    const double gflops = spec.cpu_gflops_1t * threads * it->second;
    const double base = static_cast<double>(flops(op)) / (gflops * 1000.0) + spec.cpu_overhead_us;
    return base * noise_factor(op, Executor::cpu, threads, spec);
}

namespace {

std::int64_t draw_octave_dim(std::mt19937_64& rng) {
    const std::int64_t k = uniform_int(rng, 2, 9);
    return uniform_int(rng, std::int64_t{1} << k, std::int64_t{1} << (k + 1));
}

}  // namespace

std::vector<OpDescriptor> sample_training_ops(std::int64_t count, OpType type, std::uint64_t seed) {
    if (count < 1) throw ContractViolation("sample_training_ops requires count >= 1");
    std::mt19937_64 rng(seed);
    std::vector<OpDescriptor> ops;
    ops.reserve(static_cast<std::size_t>(count));
    constexpr std::int64_t kKernels[] = {1, 3, 5, 7};
    for (std::int64_t n = 0; n < count; ++n) {
        if (type == OpType::linear) {
            const std::int64_t length = draw_octave_dim(rng);
            const std::int64_t c_in = draw_octave_dim(rng);
            const std::int64_t c_out = draw_octave_dim(rng);
            ops.emplace_back(LinearOp(length, c_in, c_out));
        } else {
            while (true) {
                const std::int64_t h_in = draw_octave_dim(rng);
                const std::int64_t w_in = draw_octave_dim(rng);
                const std::int64_t c_in = draw_octave_dim(rng);
                const std::int64_t c_out = draw_octave_dim(rng);
                const std::int64_t k = kKernels[uniform_int(rng, 0, 3)];
                const std::int64_t s = uniform_int(rng, 1, 2);
                if (h_in < k || w_in < k) continue;  // kernel would not fit; redraw tuple
                ops.emplace_back(ConvOp(h_in, w_in, c_in, c_out, k, s));
                break;
            }
        }
    }
    return ops;
}

std::vector<OpDescriptor> sample_eval_ops(OpType type) {
    constexpr double kFlopsLo = 4e6;
    constexpr double kFlopsHi = 1e9;
    std::vector<OpDescriptor> ops;

    if (type == OpType::linear) {
        std::vector<std::int64_t> dims;
        for (std::int64_t j = 2; j <= 9; ++j) {
            for (std::int64_t i = 4; i <= 6; ++i) dims.push_back(i << j);
        }
        std::sort(dims.begin(), dims.end());
        for (const std::int64_t length : dims) {
            for (const std::int64_t c_in : dims) {
                for (const std::int64_t c_out : dims) {
                    const LinearOp op(length, c_in, c_out);
                    const double f = static_cast<double>(flops(op));
                    if (f >= kFlopsLo && f <= kFlopsHi) ops.emplace_back(op);
                }
            }
        }
        return ops;
    }

    constexpr std::int64_t kStageOneRes[] = {64, 56, 48, 40};
    constexpr std::int64_t kKernels[] = {1, 3, 5, 7};
    constexpr std::int64_t kChannelDivisor[] = {1, 1, 4, 8};  // aligned with kKernels
    constexpr std::int64_t kChannelBase[] = {256, 320, 384, 448, 512};
    for (int stage = 0; stage < 4; ++stage) {
        const std::int64_t res_shift = stage;       // halve resolution per stage
        const std::int64_t chan_mult = 1 << stage;  // double channels per stage
        for (const std::int64_t base_res : kStageOneRes) {
            const std::int64_t res = base_res >> res_shift;
            for (int ki = 0; ki < 4; ++ki) {
                const std::int64_t k = kKernels[ki];
                if (res < k) continue;  // kernel would not fit; unrepresentable op
                for (const std::int64_t s : {std::int64_t{1}, std::int64_t{2}}) {
                    for (const std::int64_t base_ci : kChannelBase) {
                        const std::int64_t c_in = base_ci / kChannelDivisor[ki] * chan_mult;
                        for (const std::int64_t base_co : kChannelBase) {
                            const std::int64_t c_out = base_co / kChannelDivisor[ki] * chan_mult;
                            const ConvOp op(res, res, c_in, c_out, k, s);
                            const double f = static_cast<double>(flops(op));
                            if (f >= kFlopsLo && f <= kFlopsHi) ops.emplace_back(op);
                        }
                    }
                }
            }
        }
    }
    return ops;
}

namespace {

// Minimal RFC-4180 reader: quoted fields may contain commas and doubled quotes.
std::vector<std::string> parse_csv_row(const std::string& line, std::int64_t line_no) {
    std::vector<std::string> fields;
    std::string current;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                current.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (in_quotes) {
        throw IoError("line " + std::to_string(line_no) + ": unterminated quoted field");
    }
    fields.push_back(std::move(current));
    return fields;
}

constexpr const char* kTraceHeader = "op_json,executor,threads,kernel,latency_us";

}  // namespace

std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string quoted = "\"";
    for (const char c : field) {
        if (c == '"') quoted += "\"\"";
        else quoted.push_back(c);
    }
    quoted.push_back('"');
    return quoted;
}

Dataset ingest_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace file: " + path);
    std::string line;
    std::int64_t line_no = 0;
    if (!std::getline(in, line)) throw IoError(path + ": empty trace file");
    ++line_no;
    if (line != kTraceHeader) {
        throw IoError(path + ": line 1: expected header '" + kTraceHeader + "'");
    }
    Dataset dataset;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto ctx = [&](const std::string& msg) {
            return path + ": line " + std::to_string(line_no) + ": " + msg;
        };
        const auto fields = parse_csv_row(line, line_no);
        if (fields.size() != 5) throw IoError(ctx("expected 5 fields, got " + std::to_string(fields.size())));
        LatencySample sample;
        try {
            sample.op = op_from_json(fields[0]);
            sample.executor = executor_from_name(fields[1]);
        } catch (const ValidationError& e) {
            throw ValidationError(ctx(e.what()));
        }
        try {
            sample.threads = fields[2].empty() ? 0 : std::stoi(fields[2]);
            sample.latency_us = std::stod(fields[4]);
        } catch (const std::exception&) {
            throw IoError(ctx("numeric field is not parseable"));
        }
        if (sample.executor == Executor::gpu) {
            if (sample.threads != 0) throw ValidationError(ctx("threads must be 0 for gpu rows"));
            if (fields[3].empty()) throw ValidationError(ctx("kernel required for gpu rows"));
            try {
                sample.kernel = kernel_from_name(fields[3]);
            } catch (const ValidationError& e) {
                throw ValidationError(ctx(e.what()));
            }
        } else {
            if (sample.threads < 1 || sample.threads > 3) {
                throw ValidationError(ctx("threads must be in {1,2,3} for cpu rows"));
            }
            if (!fields[3].empty()) throw ValidationError(ctx("kernel must be empty for cpu rows"));
        }
        if (!(sample.latency_us > 0)) throw ValidationError(ctx("latency_us must be positive"));
        dataset.samples.push_back(std::move(sample));
    }
    return dataset;
}

void write_trace(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write trace file: " + path);
    out << kTraceHeader << "\n";
    std::ostringstream row;
    for (const auto& sample : dataset.samples) {
        row.str("");
        row << csv_quote(op_to_json(sample.op)) << ',' << executor_name(sample.executor) << ','
            << (sample.executor == Executor::cpu ? std::to_string(sample.threads) : std::string("0"))
            << ',' << (sample.kernel ? kernel_name(*sample.kernel) : std::string()) << ',';
        std::ostringstream lat;
        lat.precision(17);
        lat << sample.latency_us;
        row << lat.str();
        out << row.str() << "\n";
    }
    if (!out) throw IoError("short write to trace file: " + path);
}

void write_features(const Dataset& dataset, const DeviceProfile& profile, FeatureMode mode,
                    const std::string& path) {
    if (dataset.samples.empty()) throw ValidationError("cannot featurize an empty dataset");
    const auto& first = dataset.samples.front();
    for (const auto& sample : dataset.samples) {
        if (sample.op.index() != first.op.index() || sample.executor != first.executor) {
            throw ValidationError("featurized export requires homogeneous op type and executor");
        }
    }
    // CPU latency does not depend on dispatch, so CPU rows always use the
    // op-parameter schema plus a threads column.
    const FeatureMode row_mode = first.executor == Executor::cpu ? FeatureMode::baseline : mode;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write features file: " + path);
    const FeatureVector schema = features(first.op, profile, row_mode);
    for (const auto& name : schema.names) out << name << ',';
    if (first.executor == Executor::cpu) out << "threads,";
    out << "latency_us\n";
    out.precision(17);
    for (const auto& sample : dataset.samples) {
        const FeatureVector row = features(sample.op, profile, row_mode);
        for (const double v : row.values) out << v << ',';
        if (sample.executor == Executor::cpu) out << sample.threads << ',';
        out << sample.latency_us << "\n";
    }
    if (!out) throw IoError("short write to features file: " + path);
}

namespace {

SyntheticDeviceSpec spec_from_parsed(const nlohmann::json& j) {
    SyntheticDeviceSpec spec;
    try {
        const auto& p = j.at("profile");
        spec.profile.name = p.at("name").get<std::string>();
        spec.profile.constant_mem_bytes = p.at("constant_mem_bytes").get<std::int64_t>();
        spec.profile.reg_cout_limit = p.at("reg_cout_limit").get<std::int64_t>();
        spec.profile.winograd_cout_min = p.at("winograd_cout_min").get<std::int64_t>();
        spec.profile.winograd_area_min = p.at("winograd_area_min").get<std::int64_t>();
        spec.profile.compute_units = p.at("compute_units").get<std::int64_t>();
        spec.profile.tile_x = p.at("tile").at(0).get<std::int64_t>();
        spec.profile.tile_y = p.at("tile").at(1).get<std::int64_t>();
        spec.profile.wg_x = p.at("wg").at(0).get<std::int64_t>();
        spec.profile.wg_y = p.at("wg").at(1).get<std::int64_t>();
        spec.gpu_dispatch_us = j.at("gpu_dispatch_us").get<double>();
        spec.wave_us.clear();
        for (const auto& [name, value] : j.at("wave_us").items()) {
            spec.wave_us[kernel_from_name(name)] = value.get<double>();
        }
        spec.cpu_gflops_1t = j.at("cpu_gflops_1t").get<double>();
        spec.cpu_scaling.clear();
        for (const auto& [name, value] : j.at("cpu_scaling").items()) {
            spec.cpu_scaling[std::stoi(name)] = value.get<double>();
        }
        spec.cpu_overhead_us = j.at("cpu_overhead_us").get<double>();
        spec.noise_rel = j.at("noise_rel").get<double>();
        spec.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed synthetic device spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

}  // namespace

SyntheticDeviceSpec spec_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("malformed synthetic device spec: ") + e.what());
    }
    return spec_from_parsed(j);
}

std::string spec_to_json(const SyntheticDeviceSpec& spec) {
    nlohmann::ordered_json j;
    j["profile"] = {
        {"name", spec.profile.name},
        {"constant_mem_bytes", spec.profile.constant_mem_bytes},
        {"reg_cout_limit", spec.profile.reg_cout_limit},
        {"winograd_cout_min", spec.profile.winograd_cout_min},
        {"winograd_area_min", spec.profile.winograd_area_min},
        {"compute_units", spec.profile.compute_units},
        {"tile", {spec.profile.tile_x, spec.profile.tile_y}},
        {"wg", {spec.profile.wg_x, spec.profile.wg_y}},
    };
    j["gpu_dispatch_us"] = spec.gpu_dispatch_us;
    nlohmann::ordered_json waves;
    for (const auto& [kernel, us] : spec.wave_us) waves[kernel_name(kernel)] = us;
    j["wave_us"] = waves;
    j["cpu_gflops_1t"] = spec.cpu_gflops_1t;
    nlohmann::ordered_json scaling;
    for (const auto& [threads, factor] : spec.cpu_scaling) scaling[std::to_string(threads)] = factor;
    j["cpu_scaling"] = scaling;
    j["cpu_overhead_us"] = spec.cpu_overhead_us;
    j["noise_rel"] = spec.noise_rel;
    j["seed"] = spec.seed;
    return j.dump(2);
}

std::map<std::string, SyntheticDeviceSpec> load_profiles(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open profiles file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(path + ": " + e.what());
    }
    if (!j.is_object() || j.empty()) throw ValidationError(path + ": profiles file must be a non-empty object");
    std::map<std::string, SyntheticDeviceSpec> profiles;
    for (const auto& [name, body] : j.items()) {
        try {
            profiles[name] = spec_from_parsed(body);
        } catch (const ValidationError& e) {
            throw ValidationError(path + ": profile '" + name + "': " + e.what());
        }
    }
    return profiles;
}

}  // namespace coex
