#include "coex/rendezvous.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "coex/error.hpp"

namespace coex {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t ns_since(Clock::time_point epoch) {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - epoch).count();
}

// Cost of one steady-clock read, measured at startup; also warms the caches
// so the first rounds are not outliers.
double calibrate_clock_overhead_ns() {
    constexpr int kProbes = 4096;
    const auto begin = Clock::now();
    for (int i = 0; i < kProbes - 1; ++i) {
        volatile auto tick = Clock::now();
        (void)tick;
    }
    const auto end = Clock::now();
    return static_cast<double>(
               std::chrono::duration_cast<std::chrono::nanoseconds>(end - begin).count()) /
           kProbes;
}

// Clock-bounded work emulation: spins until the deadline, never blocks.
void spin_work(Clock::time_point deadline) {
    while (Clock::now() < deadline) {
    }
}

struct WorkerTrace {
    std::vector<std::int64_t> work_start_ns;
    std::vector<std::int64_t> work_end_ns;
    std::vector<std::int64_t> set_ns;
    std::vector<std::int64_t> join_ns;
    int completed = 0;
    bool timed_out = false;
};

constexpr double kWorkTolerance = 0.05;
constexpr int kAttemptFactor = 16;  // attempt budget per requested round

struct PollingShared {
    std::atomic<std::uint64_t> cpu_start{0};
    std::atomic<std::uint64_t> gpu_start{0};
    std::atomic<std::uint64_t> cpu_done{0};
    std::atomic<std::uint64_t> gpu_done{0};
    std::atomic<bool> abort{false};
};

// Busy-poll with yields until `counter >= round`; yields keep the partner
// schedulable even on a single hardware thread.
bool poll_counter(const std::atomic<std::uint64_t>& counter, std::uint64_t round,
                  std::atomic<bool>& abort, double timeout_s) {
    const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                             std::chrono::duration<double>(timeout_s));
    while (counter.load(std::memory_order_acquire) < round) {
        if (abort.load(std::memory_order_relaxed)) return false;
        if (Clock::now() >= deadline) {
            abort.store(true, std::memory_order_relaxed);
            return false;
        }
        std::this_thread::yield();
    }
    return true;
}

void polling_worker(bool cpu_role, PollingShared& shared, Clock::time_point epoch,
                    std::int64_t work_ns, int attempts, double timeout_s, WorkerTrace& trace) {
    auto& my_start = cpu_role ? shared.cpu_start : shared.gpu_start;
    auto& partner_start = cpu_role ? shared.gpu_start : shared.cpu_start;
    auto& my_done = cpu_role ? shared.cpu_done : shared.gpu_done;
    auto& partner_done = cpu_role ? shared.gpu_done : shared.cpu_done;

    for (int a = 1; a <= attempts; ++a) {
        const auto round = static_cast<std::uint64_t>(a);
        my_start.store(round, std::memory_order_release);
        if (!poll_counter(partner_start, round, shared.abort, timeout_s)) {
            trace.timed_out = true;
            return;
        }

        const auto work_begin = Clock::now();
        trace.work_start_ns.push_back(ns_since(epoch));
        if (work_ns > 0) spin_work(work_begin + std::chrono::nanoseconds(work_ns));
        trace.work_end_ns.push_back(ns_since(epoch));

        trace.set_ns.push_back(ns_since(epoch));
        my_done.store(round, std::memory_order_release);
        if (!poll_counter(partner_done, round, shared.abort, timeout_s)) {
            trace.timed_out = true;
            return;
        }
        trace.join_ns.push_back(ns_since(epoch));
        ++trace.completed;
    }
}

struct PassiveShared {
    std::mutex mutex;
    std::condition_variable cv;
    std::uint64_t cpu_start = 0;
    std::uint64_t gpu_start = 0;
    std::uint64_t cpu_done = 0;
    std::uint64_t gpu_done = 0;
    bool abort = false;
};

bool passive_wait(PassiveShared& shared, std::uint64_t PassiveShared::*counter, std::uint64_t round,
                  double timeout_s) {
    std::unique_lock<std::mutex> lock(shared.mutex);
    const bool ok = shared.cv.wait_for(lock, std::chrono::duration<double>(timeout_s), [&] {
        return shared.*counter >= round || shared.abort;
    });
    if (!ok || shared.abort) {
        shared.abort = true;
        shared.cv.notify_all();
        return false;
    }
    return true;
}

void passive_signal(PassiveShared& shared, std::uint64_t PassiveShared::*counter,
                    std::uint64_t round) {
    {
        std::lock_guard<std::mutex> lock(shared.mutex);
        shared.*counter = round;
    }
    shared.cv.notify_all();
}

void passive_worker(bool cpu_role, PassiveShared& shared, Clock::time_point epoch,
                    std::int64_t work_ns, std::int64_t injected_delay_ns, int attempts,
                    double timeout_s, WorkerTrace& trace) {
    for (int a = 1; a <= attempts; ++a) {
        const auto round = static_cast<std::uint64_t>(a);
        passive_signal(shared, cpu_role ? &PassiveShared::cpu_start : &PassiveShared::gpu_start, round);
        if (!passive_wait(shared, cpu_role ? &PassiveShared::gpu_start : &PassiveShared::cpu_start,
                          round, timeout_s)) {
            trace.timed_out = true;
            return;
        }

        const auto work_begin = Clock::now();
        trace.work_start_ns.push_back(ns_since(epoch));
        if (work_ns > 0) spin_work(work_begin + std::chrono::nanoseconds(work_ns));
        trace.work_end_ns.push_back(ns_since(epoch));

        // The emulated event-notification latency sits between GPU completion
        // and the moment the flag becomes visible to the waiting CPU.
        if (!cpu_role && injected_delay_ns > 0) {
            std::this_thread::sleep_for(std::chrono::nanoseconds(injected_delay_ns));
        }
        trace.set_ns.push_back(ns_since(epoch));
        passive_signal(shared, cpu_role ? &PassiveShared::cpu_done : &PassiveShared::gpu_done, round);
        if (!passive_wait(shared, cpu_role ? &PassiveShared::gpu_done : &PassiveShared::cpu_done,
                          round, timeout_s)) {
            trace.timed_out = true;
            return;
        }
        trace.join_ns.push_back(ns_since(epoch));
        ++trace.completed;
    }
}

RendezvousReport assemble_report(const std::string& mode, double injected_delay_us,
                                 double t_cpu_work_us, double t_gpu_work_us, int rounds_requested,
                                 double clock_overhead_ns, const WorkerTrace& cpu,
                                 const WorkerTrace& gpu) {
    RendezvousReport report;
    report.mode = mode;
    report.injected_delay_us = injected_delay_us;
    report.rounds_requested = rounds_requested;
    report.clock_overhead_ns = clock_overhead_ns;
    report.timeouts = (cpu.timed_out ? 1 : 0) + (gpu.timed_out ? 1 : 0);

    const int attempts_done = std::min(cpu.completed, gpu.completed);
    const auto work_ok = [](const WorkerTrace& trace, int i, double requested_us) {
        if (requested_us <= 0.0) return true;
        const double actual_us =
            static_cast<double>(trace.work_end_ns[static_cast<std::size_t>(i)] -
                                trace.work_start_ns[static_cast<std::size_t>(i)]) /
            1000.0;
        return std::abs(actual_us - requested_us) / requested_us <= kWorkTolerance;
    };

    for (int i = 0; i < attempts_done && report.rounds_completed < rounds_requested; ++i) {
        if (!work_ok(cpu, i, t_cpu_work_us) || !work_ok(gpu, i, t_gpu_work_us)) {
            ++report.rounds_discarded;
            continue;
        }
        RoundRecord record;
        record.cpu_work_end_ns = cpu.work_end_ns[static_cast<std::size_t>(i)];
        record.gpu_work_end_ns = gpu.work_end_ns[static_cast<std::size_t>(i)];
        record.cpu_set_ns = cpu.set_ns[static_cast<std::size_t>(i)];
        record.gpu_set_ns = gpu.set_ns[static_cast<std::size_t>(i)];
        record.cpu_join_ns = cpu.join_ns[static_cast<std::size_t>(i)];
        record.gpu_join_ns = gpu.join_ns[static_cast<std::size_t>(i)];
        const auto join = std::max(record.cpu_join_ns, record.gpu_join_ns);
        const auto work_end = std::max(record.cpu_work_end_ns, record.gpu_work_end_ns);
        record.overhead_us = static_cast<double>(join - work_end) / 1000.0;
        // A join stamped before the partner's publish stamp would mean the
        // barrier was passed without the flag set.
        if (record.cpu_join_ns < record.gpu_set_ns || record.gpu_join_ns < record.cpu_set_ns) {
            report.safety_ok = false;
        }
        report.rounds.push_back(record);
        ++report.rounds_completed;
    }
    return report;
}

enum class HarnessMode { polling, passive };

RendezvousReport run_rounds(HarnessMode mode, double t_cpu_work_us, double t_gpu_work_us, int rounds,
                            double injected_delay_us, double timeout_s) {
    if (rounds < 1) throw ContractViolation("rendezvous requires rounds >= 1");
    if (t_cpu_work_us < 0 || t_gpu_work_us < 0 || injected_delay_us < 0) {
        throw ContractViolation("work and delay durations must be >= 0");
    }
    const double clock_overhead_ns = calibrate_clock_overhead_ns();
    const auto work_cpu_ns = static_cast<std::int64_t>(t_cpu_work_us * 1000.0);
    const auto work_gpu_ns = static_cast<std::int64_t>(t_gpu_work_us * 1000.0);
    const auto delay_ns = static_cast<std::int64_t>(injected_delay_us * 1000.0);

    WorkerTrace cpu_trace;
    WorkerTrace gpu_trace;
    RendezvousReport report;
    int remaining = rounds;
    int attempt_budget = rounds * kAttemptFactor;

    while (remaining > 0 && attempt_budget > 0) {
        const int batch = std::min(remaining + remaining / 4 + 1, attempt_budget);
        attempt_budget -= batch;
        WorkerTrace cpu_batch;
        WorkerTrace gpu_batch;
        const auto epoch = Clock::now();
        if (mode == HarnessMode::polling) {
            PollingShared shared;
            std::thread gpu_thread(polling_worker, false, std::ref(shared), epoch, work_gpu_ns, batch,
                                   timeout_s, std::ref(gpu_batch));
            polling_worker(true, shared, epoch, work_cpu_ns, batch, timeout_s, cpu_batch);
            gpu_thread.join();
        } else {
            PassiveShared shared;
            std::thread gpu_thread(passive_worker, false, std::ref(shared), epoch, work_gpu_ns,
                                   delay_ns, batch, timeout_s, std::ref(gpu_batch));
            passive_worker(true, shared, epoch, work_cpu_ns, 0, batch, timeout_s, cpu_batch);
            gpu_thread.join();
        }
        RendezvousReport partial = assemble_report(
            mode == HarnessMode::polling ? "polling" : "passive", injected_delay_us, t_cpu_work_us,
            t_gpu_work_us, remaining, clock_overhead_ns, cpu_batch, gpu_batch);
        report.rounds_completed += partial.rounds_completed;
        report.rounds_discarded += partial.rounds_discarded;
        report.timeouts += partial.timeouts;
        report.safety_ok = report.safety_ok && partial.safety_ok;
        report.rounds.insert(report.rounds.end(), partial.rounds.begin(), partial.rounds.end());
        remaining = rounds - report.rounds_completed;
        if (partial.timeouts > 0) break;  // liveness failure: report, never hang
    }

    report.mode = mode == HarnessMode::polling ? "polling" : "passive";
    report.injected_delay_us = injected_delay_us;
    report.rounds_requested = rounds;
    report.clock_overhead_ns = clock_overhead_ns;
    return report;
}

std::vector<double> sorted_overheads(const RendezvousReport& report) {
    std::vector<double> values;
    values.reserve(report.rounds.size());
    for (const auto& round : report.rounds) values.push_back(round.overhead_us);
    std::sort(values.begin(), values.end());
    return values;
}

}  // namespace

RendezvousReport rendezvous_run(double t_cpu_work_us, double t_gpu_work_us, int rounds,
                                double timeout_s) {
    return run_rounds(HarnessMode::polling, t_cpu_work_us, t_gpu_work_us, rounds, 0.0, timeout_s);
}

RendezvousReport passive_baseline_run(double t_cpu_work_us, double t_gpu_work_us, int rounds,
                                      double injected_delay_us, double timeout_s) {
    return run_rounds(HarnessMode::passive, t_cpu_work_us, t_gpu_work_us, rounds, injected_delay_us,
                      timeout_s);
}

double min_overhead_us(const RendezvousReport& report) {
    const auto values = sorted_overheads(report);
    if (values.empty()) throw ContractViolation("report has no completed rounds");
    return values.front();
}

double median_overhead_us(const RendezvousReport& report) {
    const auto values = sorted_overheads(report);
    if (values.empty()) throw ContractViolation("report has no completed rounds");
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

double p95_overhead_us(const RendezvousReport& report) {
    const auto values = sorted_overheads(report);
    if (values.empty()) throw ContractViolation("report has no completed rounds");
    const auto rank = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(values.size())));
    return values[std::max<std::size_t>(rank, 1) - 1];
}

std::string report_to_json(const RendezvousReport& report, bool include_rounds) {
    nlohmann::ordered_json j;
    j["mode"] = report.mode;
    j["emulated_gpu"] = report.emulated_gpu;
    j["rounds_requested"] = report.rounds_requested;
    j["rounds_completed"] = report.rounds_completed;
    j["rounds_discarded"] = report.rounds_discarded;
    j["timeouts"] = report.timeouts;
    j["safety_ok"] = report.safety_ok;
    j["injected_delay_us"] = report.injected_delay_us;
    j["clock_overhead_ns"] = report.clock_overhead_ns;
    if (!report.rounds.empty()) {
        j["overhead_us"] = {
            {"min", min_overhead_us(report)},
            {"median", median_overhead_us(report)},
            {"p95", p95_overhead_us(report)},
        };
    }
    if (include_rounds) {
        nlohmann::ordered_json rounds = nlohmann::ordered_json::array();
        for (const auto& r : report.rounds) {
            rounds.push_back({
                {"cpu_work_end_ns", r.cpu_work_end_ns},
                {"gpu_work_end_ns", r.gpu_work_end_ns},
                {"cpu_set_ns", r.cpu_set_ns},
                {"gpu_set_ns", r.gpu_set_ns},
                {"cpu_join_ns", r.cpu_join_ns},
                {"gpu_join_ns", r.gpu_join_ns},
                {"overhead_us", r.overhead_us},
            });
        }
        j["rounds"] = rounds;
    }
    return j.dump(2);
}

}  // namespace coex
