#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "coex/device_model.hpp"
#include "coex/error.hpp"
#include "coex/op_model.hpp"

using namespace coex;

namespace {

std::filesystem::path temp_file(const std::string& stem) {
    return std::filesystem::temp_directory_path() / ("coex_devmodel_" + stem);
}

struct FileGuard {
    std::filesystem::path path;
    ~FileGuard() {
        std::error_code ec;
        std::filesystem::remove(path, ec);
    }
};

}  // namespace

TEST_CASE("synthetic spec validation") {
    SyntheticDeviceSpec spec;
    CHECK_NOTHROW(spec.validate());

    SUBCASE("noise bounds") {
        spec.noise_rel = 0.2;
        CHECK_THROWS_AS(spec.validate(), ValidationError);
        spec.noise_rel = -0.01;
        CHECK_THROWS_AS(spec.validate(), ValidationError);
    }
    SUBCASE("single-thread scaling anchors at 1") {
        spec.cpu_scaling[1] = 0.9;
        CHECK_THROWS_AS(spec.validate(), ValidationError);
    }
    SUBCASE("total throughput must not shrink with threads") {
        spec.cpu_scaling[3] = 0.5;  // 3 * 0.5 < 2 * 0.9
        CHECK_THROWS_AS(spec.validate(), ValidationError);
    }
    SUBCASE("wave cost must be positive") {
        spec.wave_us[KernelId::winograd] = 0.0;
        CHECK_THROWS_AS(spec.validate(), ValidationError);
    }
}

TEST_CASE("default-profile cpu latency is an affine staircase-free curve") {
    const SyntheticDeviceSpec spec;  // noise 0
    // flops = 2*50*3072*c; 3 threads at 51.2 GFLOPs and 0.8 scaling give
    // 122.88 GFLOPs effective: latency = 2.5*c + 20 us.
    for (const std::int64_t c : {1, 64, 128, 424, 425, 1024}) {
        const double got = synth_cpu_latency(OpDescriptor(LinearOp(50, 3072, c)), 3, spec);
        CHECK(got == doctest::Approx(2.5 * static_cast<double>(c) + 20.0).epsilon(1e-12));
    }
    // 1 and 2 threads scale by 1/(t*scaling(t)).
    const OpDescriptor op = LinearOp(50, 3072, 100);
    const double base = 2.0 * 50 * 3072 * 100;
    CHECK(synth_cpu_latency(op, 1, spec) == doctest::Approx(base / (51.2 * 1000.0) + 20.0));
    CHECK(synth_cpu_latency(op, 2, spec) == doctest::Approx(base / (51.2 * 2 * 0.9 * 1000.0) + 20.0));

    CHECK_THROWS_AS(synth_cpu_latency(op, 0, spec), ContractViolation);
    CHECK_THROWS_AS(synth_cpu_latency(op, 4, spec), ContractViolation);
}

TEST_CASE("default-profile gpu latency is a 64-channel staircase") {
    const SyntheticDeviceSpec spec;
    // Per-workgroup work for C_in=3072 linear: 8*4*4*4 cells * 2*3072 FLOPs
    // = 3.145728 MFLOP; one wave costs 15 us/MFLOP * that = 47.18592 us.
    for (const std::int64_t c : {1, 63, 64, 65, 424, 425, 1024}) {
        const double waves = std::ceil(static_cast<double>(c) / 64.0);
        const double want = 751.0 + 47.18592 * waves;
        CHECK(synth_gpu_latency(OpDescriptor(LinearOp(50, 3072, c)), spec) ==
              doctest::Approx(want).epsilon(1e-12));
    }
    // Steps are flat between multiples of 64.
    CHECK(synth_gpu_latency(OpDescriptor(LinearOp(50, 3072, 1)), spec) ==
          synth_gpu_latency(OpDescriptor(LinearOp(50, 3072, 64)), spec));
}

TEST_CASE("default calibration crosses over at 425 output channels") {
    const SyntheticDeviceSpec spec;
    for (std::int64_t c = 2; c <= 1024; ++c) {
        const OpDescriptor op = LinearOp(50, 3072, c);
        const double cpu = synth_cpu_latency(op, 3, spec);
        const double gpu = synth_gpu_latency(op, spec);
        if (c < 425) {
            CHECK(cpu < gpu);
        } else {
            CHECK(gpu < cpu);
        }
    }
}

TEST_CASE("noise is bounded, pure, and off at zero") {
    SyntheticDeviceSpec spec;
    const OpDescriptor op = ConvOp(28, 28, 64, 128, 3, 1);

    const double clean = synth_gpu_latency(op, spec);
    spec.noise_rel = 0.05;
    const double noisy1 = synth_gpu_latency(op, spec);
    const double noisy2 = synth_gpu_latency(op, spec);
    CHECK(noisy1 == noisy2);  // keyed by op, not by call order
    CHECK(std::abs(noisy1 / clean - 1.0) <= 0.05);

    spec.seed = 43;
    CHECK(synth_gpu_latency(op, spec) != noisy1);

    // Different ops and different executors draw independent factors.
    spec.seed = 42;
    const OpDescriptor other = ConvOp(28, 28, 64, 129, 3, 1);
    CHECK(synth_gpu_latency(other, spec) / synth_gpu_latency(other, SyntheticDeviceSpec{}) !=
          doctest::Approx(noisy1 / clean).epsilon(1e-12));
}

TEST_CASE("training op sampler is seeded and respects op invariants") {
    const auto ops = sample_training_ops(500, OpType::conv, 7);
    CHECK(ops.size() == 500);
    for (const auto& op : ops) {
        const auto& conv = std::get<ConvOp>(op);
        CHECK(conv.h_in >= conv.k);
        CHECK(conv.w_in >= conv.k);
        CHECK(conv.h_in >= 4);    // octave draws start at 2^2
        CHECK(conv.h_in <= 1024); // and end at 2^10
        CHECK((conv.s == 1 || conv.s == 2));
    }
    const auto again = sample_training_ops(500, OpType::conv, 7);
    for (std::size_t i = 0; i < ops.size(); ++i) CHECK(op_equal(ops[i], again[i]));
    const auto reseeded = sample_training_ops(500, OpType::conv, 8);
    bool any_diff = false;
    for (std::size_t i = 0; i < ops.size(); ++i) any_diff = any_diff || !op_equal(ops[i], reseeded[i]);
    CHECK(any_diff);

    const auto linear = sample_training_ops(100, OpType::linear, 7);
    for (const auto& op : linear) CHECK(std::holds_alternative<LinearOp>(op));
}

TEST_CASE("evaluation grids are frozen") {
    const auto linear = sample_eval_ops(OpType::linear);
    CHECK(linear.size() == 8610);
    std::set<std::int64_t> allowed;
    for (std::int64_t j = 2; j <= 9; ++j) {
        for (std::int64_t i = 4; i <= 6; ++i) allowed.insert(i << j);
    }
    for (const auto& op : linear) {
        const auto& lin = std::get<LinearOp>(op);
        CHECK(allowed.count(lin.length) == 1);
        CHECK(allowed.count(lin.c_in) == 1);
        CHECK(allowed.count(lin.c_out) == 1);
        const double f = static_cast<double>(flops(op));
        CHECK(f >= 4e6);
        CHECK(f <= 1e9);
    }

    const auto conv = sample_eval_ops(OpType::conv);
    CHECK(conv.size() == 1960);
    for (const auto& op : conv) {
        const auto& c = std::get<ConvOp>(op);
        CHECK(c.h_in == c.w_in);
        CHECK(c.h_in >= c.k);
        const double f = static_cast<double>(flops(op));
        CHECK(f >= 4e6);
        CHECK(f <= 1e9);
    }

    // Deterministic: repeated enumeration yields the identical sequence.
    const auto conv_again = sample_eval_ops(OpType::conv);
    REQUIRE(conv_again.size() == conv.size());
    for (std::size_t i = 0; i < conv.size(); ++i) CHECK(op_equal(conv[i], conv_again[i]));
}

TEST_CASE("csv quoting escapes delimiters and quotes") {
    CHECK(csv_quote("plain") == "plain");
    CHECK(csv_quote("a,b") == "\"a,b\"");
    CHECK(csv_quote("say \"hi\"") == "\"say \"\"hi\"\"\"");
}

TEST_CASE("trace files round-trip") {
    Dataset dataset;
    dataset.samples.push_back(
        {OpDescriptor(LinearOp(50, 3072, 425)), Executor::gpu, 0, KernelId::linear_generic, 1081.30144});
    dataset.samples.push_back(
        {OpDescriptor(ConvOp(28, 28, 64, 129, 3, 1)), Executor::gpu, 0, KernelId::winograd, 912.5});
    dataset.samples.push_back(
        {OpDescriptor(ConvOp(28, 28, 64, 129, 3, 1)), Executor::cpu, 2, std::nullopt, 1550.0625});

    const FileGuard guard{temp_file("roundtrip.csv")};
    write_trace(dataset, guard.path.string());
    const Dataset back = ingest_trace(guard.path.string());
    REQUIRE(back.samples.size() == dataset.samples.size());
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        CHECK(op_equal(back.samples[i].op, dataset.samples[i].op));
        CHECK(back.samples[i].executor == dataset.samples[i].executor);
        CHECK(back.samples[i].threads == dataset.samples[i].threads);
        CHECK(back.samples[i].kernel == dataset.samples[i].kernel);
        CHECK(back.samples[i].latency_us == dataset.samples[i].latency_us);
    }
}

TEST_CASE("trace ingestion reports the offending line") {
    const FileGuard guard{temp_file("bad.csv")};

    SUBCASE("wrong header") {
        std::ofstream(guard.path) << "op,executor\n";
        CHECK_THROWS_WITH_AS(ingest_trace(guard.path.string()),
                             doctest::Contains("line 1"), IoError);
    }
    SUBCASE("wrong field count") {
        std::ofstream(guard.path) << "op_json,executor,threads,kernel,latency_us\n"
                                  << "\"{\"\"type\"\":\"\"linear\"\",\"\"L\"\":4,\"\"C_in\"\":4,\"\"C_out\"\":4}\",gpu,0\n";
        CHECK_THROWS_WITH_AS(ingest_trace(guard.path.string()),
                             doctest::Contains("line 2"), IoError);
    }
    SUBCASE("bad latency on a later line") {
        std::ofstream(guard.path)
            << "op_json,executor,threads,kernel,latency_us\n"
            << "\"{\"\"type\"\":\"\"linear\"\",\"\"L\"\":4,\"\"C_in\"\":4,\"\"C_out\"\":4}\",gpu,0,linear_generic,10\n"
            << "\"{\"\"type\"\":\"\"linear\"\",\"\"L\"\":4,\"\"C_in\"\":4,\"\"C_out\"\":4}\",gpu,0,linear_generic,oops\n";
        CHECK_THROWS_WITH_AS(ingest_trace(guard.path.string()),
                             doctest::Contains("line 3"), IoError);
    }
    SUBCASE("cpu rows must not carry a kernel") {
        std::ofstream(guard.path)
            << "op_json,executor,threads,kernel,latency_us\n"
            << "\"{\"\"type\"\":\"\"linear\"\",\"\"L\"\":4,\"\"C_in\"\":4,\"\"C_out\"\":4}\",cpu,2,winograd,10\n";
        CHECK_THROWS_WITH_AS(ingest_trace(guard.path.string()),
                             doctest::Contains("line 2"), ValidationError);
    }
    SUBCASE("gpu rows need a kernel") {
        std::ofstream(guard.path)
            << "op_json,executor,threads,kernel,latency_us\n"
            << "\"{\"\"type\"\":\"\"linear\"\",\"\"L\"\":4,\"\"C_in\"\":4,\"\"C_out\"\":4}\",gpu,0,,10\n";
        CHECK_THROWS_AS(ingest_trace(guard.path.string()), ValidationError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(ingest_trace((guard.path / "nowhere.csv").string()), IoError);
    }
}

TEST_CASE("feature export writes one homogeneous schema") {
    const SyntheticDeviceSpec spec;
    Dataset dataset;
    for (const std::int64_t c : {64, 128, 256}) {
        const OpDescriptor op = LinearOp(50, 3072, c);
        dataset.samples.push_back({op, Executor::gpu, 0, KernelId::linear_generic,
                                   synth_gpu_latency(op, spec)});
    }
    const FileGuard guard{temp_file("features.csv")};
    write_features(dataset, spec.profile, FeatureMode::augmented, guard.path.string());
    std::ifstream in(guard.path);
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "L,C_in,C_out,flops,kernel_id,wg_count,wg_x,wg_y,padding_waste,wave_count,latency_us");
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 3);

    // Mixing executors in one export is rejected.
    dataset.samples.push_back({OpDescriptor(LinearOp(4, 4, 4)), Executor::cpu, 1, std::nullopt, 5.0});
    CHECK_THROWS_AS(write_features(dataset, spec.profile, FeatureMode::augmented, guard.path.string()),
                    ValidationError);

    // CPU rows use op parameters plus a threads column regardless of mode.
    Dataset cpu_rows;
    cpu_rows.samples.push_back({OpDescriptor(LinearOp(4, 4, 4)), Executor::cpu, 1, std::nullopt, 5.0});
    write_features(cpu_rows, spec.profile, FeatureMode::augmented, guard.path.string());
    std::ifstream cpu_in(guard.path);
    std::getline(cpu_in, header);
    CHECK(header == "L,C_in,C_out,flops,threads,latency_us");
}

TEST_CASE("device spec json round-trips") {
    SyntheticDeviceSpec spec;
    spec.noise_rel = 0.03;
    spec.seed = 1234;
    spec.profile.name = "bench";
    spec.cpu_gflops_1t = 40.0;
    const SyntheticDeviceSpec back = spec_from_json(spec_to_json(spec));
    CHECK(back.profile.name == "bench");
    CHECK(back.noise_rel == 0.03);
    CHECK(back.seed == 1234);
    CHECK(back.cpu_gflops_1t == 40.0);
    CHECK(back.wave_us == spec.wave_us);
    CHECK(back.cpu_scaling == spec.cpu_scaling);

    CHECK_THROWS_AS(spec_from_json("{"), ValidationError);
    CHECK_THROWS_AS(spec_from_json("{}"), ValidationError);
}

TEST_CASE("profiles file loads named specs and rejects bad ones") {
    const FileGuard guard{temp_file("profiles.json")};
    SyntheticDeviceSpec spec;
    std::ofstream(guard.path) << "{\"default\": " << spec_to_json(spec) << "}";
    const auto profiles = load_profiles(guard.path.string());
    REQUIRE(profiles.count("default") == 1);
    CHECK(profiles.at("default").gpu_dispatch_us == 751.0);

    std::ofstream(guard.path) << "[]";
    CHECK_THROWS_AS(load_profiles(guard.path.string()), ValidationError);

    std::ofstream(guard.path) << "{\"broken\": {\"gpu_dispatch_us\": 1}}";
    CHECK_THROWS_WITH_AS(load_profiles(guard.path.string()), doctest::Contains("broken"),
                         ValidationError);

    CHECK_THROWS_AS(load_profiles("/nonexistent/profiles.json"), IoError);
}
