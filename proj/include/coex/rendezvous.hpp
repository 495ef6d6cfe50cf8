#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace coex {

// One completed synchronization round; timestamps are steady-clock ns from
// the start of the run.
struct RoundRecord {
    std::int64_t cpu_work_end_ns = 0;
    std::int64_t gpu_work_end_ns = 0;
    std::int64_t cpu_set_ns = 0;   // taken immediately before publishing own flag
    std::int64_t gpu_set_ns = 0;
    std::int64_t cpu_join_ns = 0;  // taken after observing the partner's flag
    std::int64_t gpu_join_ns = 0;
    double overhead_us = 0.0;      // max(join) - max(work end)
};

struct RendezvousReport {
    std::string mode;         // "polling" or "passive"
    bool emulated_gpu = true;  // the GPU role runs on a second CPU thread
    int rounds_requested = 0;
    int rounds_completed = 0;
    int rounds_discarded = 0;  // work spin missed its duration by > 5%
    int timeouts = 0;
    bool safety_ok = true;  // no join observed before both flags were set
    double injected_delay_us = 0.0;
    double clock_overhead_ns = 0.0;  // startup calibration: cost of one clock read
    std::vector<RoundRecord> rounds;
};

double min_overhead_us(const RendezvousReport& report);
double median_overhead_us(const RendezvousReport& report);
double p95_overhead_us(const RendezvousReport& report);

std::string report_to_json(const RendezvousReport& report, bool include_rounds = true);

// Two real threads emulate the CPU and GPU roles. Each round both spin their
// work duration, publish a monotone per-round counter with release semantics,
// and busy-poll (with yields) the partner's counter with acquire semantics.
// Rounds whose measured work duration missed the request by more than 5% are
// discarded and re-run; a worker that polls longer than timeout_s aborts the
// run and reports a liveness failure instead of hanging.
RendezvousReport rendezvous_run(double t_cpu_work_us, double t_gpu_work_us, int rounds,
                                double timeout_s = 1.0);

// Same harness, but the GPU role signals through a mutex/condvar notification
// with injected_delay_us of extra latency before visibility, emulating
// event-wait completion paths.
RendezvousReport passive_baseline_run(double t_cpu_work_us, double t_gpu_work_us, int rounds,
                                      double injected_delay_us, double timeout_s = 1.0);

}  // namespace coex
