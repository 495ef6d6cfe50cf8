#include <doctest.h>

#include <nlohmann/json.hpp>

#include "coex/error.hpp"
#include "coex/rendezvous.hpp"

using namespace coex;

namespace {

RendezvousReport synthetic_report(const std::vector<double>& overheads) {
    RendezvousReport report;
    report.mode = "polling";
    report.rounds_requested = static_cast<int>(overheads.size());
    report.rounds_completed = static_cast<int>(overheads.size());
    for (const double us : overheads) {
        RoundRecord record;
        record.overhead_us = us;
        report.rounds.push_back(record);
    }
    return report;
}

}  // namespace

TEST_CASE("overhead statistics use sorted values, averaged median, nearest-rank p95") {
    const RendezvousReport odd = synthetic_report({5.0, 1.0, 3.0});
    CHECK(min_overhead_us(odd) == 1.0);
    CHECK(median_overhead_us(odd) == 3.0);
    CHECK(p95_overhead_us(odd) == 5.0);  // rank ceil(0.95*3) = 3

    const RendezvousReport even = synthetic_report({4.0, 1.0, 3.0, 2.0});
    CHECK(median_overhead_us(even) == doctest::Approx(2.5));
    CHECK(p95_overhead_us(even) == 4.0);  // rank ceil(3.8) = 4

    std::vector<double> twenty;
    for (int i = 1; i <= 20; ++i) twenty.push_back(static_cast<double>(i));
    const RendezvousReport big = synthetic_report(twenty);
    CHECK(median_overhead_us(big) == doctest::Approx(10.5));
    CHECK(p95_overhead_us(big) == 19.0);  // rank ceil(19.0) = 19

    const RendezvousReport single = synthetic_report({7.5});
    CHECK(min_overhead_us(single) == 7.5);
    CHECK(median_overhead_us(single) == 7.5);
    CHECK(p95_overhead_us(single) == 7.5);

    const RendezvousReport empty = synthetic_report({});
    CHECK_THROWS_AS(min_overhead_us(empty), ContractViolation);
    CHECK_THROWS_AS(median_overhead_us(empty), ContractViolation);
    CHECK_THROWS_AS(p95_overhead_us(empty), ContractViolation);
}

TEST_CASE("report json carries the summary and optionally the rounds") {
    RendezvousReport report = synthetic_report({2.0, 4.0});
    report.mode = "passive";
    report.injected_delay_us = 162.0;

    const auto with_rounds = nlohmann::json::parse(report_to_json(report, true));
    CHECK(with_rounds.at("mode") == "passive");
    CHECK(with_rounds.at("rounds_completed") == 2);
    CHECK(with_rounds.at("injected_delay_us") == 162.0);
    CHECK(with_rounds.at("safety_ok") == true);
    CHECK(with_rounds.at("overhead_us").at("min") == 2.0);
    CHECK(with_rounds.at("overhead_us").at("median") == 3.0);
    REQUIRE(with_rounds.contains("rounds"));
    CHECK(with_rounds.at("rounds").size() == 2);

    const auto summary_only = nlohmann::json::parse(report_to_json(report, false));
    CHECK_FALSE(summary_only.contains("rounds"));

    const auto no_rounds = nlohmann::json::parse(report_to_json(synthetic_report({}), true));
    CHECK_FALSE(no_rounds.contains("overhead_us"));
}

TEST_CASE("polling rendezvous completes its rounds without safety violations") {
    const RendezvousReport report = rendezvous_run(100.0, 100.0, 20, 10.0);
    CHECK(report.mode == "polling");
    CHECK(report.rounds_requested == 20);
    CHECK(report.rounds_completed == 20);
    CHECK(report.timeouts == 0);
    CHECK(report.safety_ok);
    CHECK(report.clock_overhead_ns > 0.0);
    REQUIRE(report.rounds.size() == 20);
    for (const auto& round : report.rounds) {
        // Joins observe the partner's published flag, so they cannot precede
        // the partner's publish stamp, and overhead is non-negative.
        CHECK(round.cpu_join_ns >= round.gpu_set_ns);
        CHECK(round.gpu_join_ns >= round.cpu_set_ns);
        CHECK(round.cpu_set_ns >= round.cpu_work_end_ns);
        CHECK(round.gpu_set_ns >= round.gpu_work_end_ns);
        CHECK(round.overhead_us >= 0.0);
    }
}

TEST_CASE("zero work durations are measured without discards") {
    const RendezvousReport report = rendezvous_run(0.0, 0.0, 5, 10.0);
    CHECK(report.rounds_completed == 5);
    CHECK(report.rounds_discarded == 0);  // no duration requested, nothing to miss
    CHECK(report.timeouts == 0);
}

TEST_CASE("passive baseline injects the notification delay before publishing") {
    const RendezvousReport report = passive_baseline_run(100.0, 100.0, 10, 162.0, 10.0);
    CHECK(report.mode == "passive");
    CHECK(report.rounds_completed == 10);
    CHECK(report.timeouts == 0);
    CHECK(report.safety_ok);
    CHECK(report.injected_delay_us == 162.0);
    for (const auto& round : report.rounds) {
        // The sleep sits between GPU work end and its publish stamp.
        CHECK(round.gpu_set_ns - round.gpu_work_end_ns >= 162'000);
    }
}

TEST_CASE("a starved poll aborts with a timeout instead of hanging") {
    // CPU work far exceeds the poll deadline: the GPU role must abort, flag a
    // timeout, and both threads must return promptly.
    const RendezvousReport report = rendezvous_run(200'000.0, 0.0, 1, 0.05);
    CHECK(report.timeouts > 0);
    CHECK(report.rounds_completed < 1);
}

TEST_CASE("degenerate round requests are rejected") {
    CHECK_THROWS_AS(rendezvous_run(10.0, 10.0, 0, 1.0), ContractViolation);
    CHECK_THROWS_AS(rendezvous_run(-1.0, 10.0, 1, 1.0), ContractViolation);
    CHECK_THROWS_AS(passive_baseline_run(10.0, 10.0, 1, -5.0, 1.0), ContractViolation);
}
