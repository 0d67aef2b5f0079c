#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "servo/bench.hpp"

using namespace servo;
namespace fs = std::filesystem;

namespace {

int count_lines(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    int n = 0;
    std::string line;
    while (std::getline(in, line)) ++n;
    return n;
}

}  // namespace

TEST_CASE("nearest rank percentile picks the ceil(p*n) smallest value") {
    std::vector<double> v{15, 20, 35, 40, 50};
    CHECK(percentile_nearest_rank(v, 30) == 20);   // ceil(1.5) = 2nd
    CHECK(percentile_nearest_rank(v, 40) == 20);   // exactly rank 2
    CHECK(percentile_nearest_rank(v, 41) == 35);   // next rank
    CHECK(percentile_nearest_rank(v, 100) == 50);
    CHECK(percentile_nearest_rank(v, 1) == 15);
    CHECK(percentile_nearest_rank({7}, 50) == 7);

    CHECK_THROWS_AS(percentile_nearest_rank({}, 50), std::invalid_argument);
    CHECK_THROWS_AS(percentile_nearest_rank(v, 0), std::invalid_argument);
    CHECK_THROWS_AS(percentile_nearest_rank(v, 101), std::invalid_argument);
}

TEST_CASE("max supported players uses a strict overrun fraction") {
    std::map<int, std::vector<double>> by_count;
    auto samples = [](int over, int total) {
        std::vector<double> v(total, 10.0);
        for (int i = 0; i < over; ++i) v[i] = 60.0;
        return v;
    };
    by_count[10] = samples(0, 100);
    by_count[20] = samples(4, 100);   // 4% over budget, still fine
    by_count[30] = samples(5, 100);   // exactly 5%, not strictly under
    by_count[40] = samples(50, 100);
    CHECK(max_supported_players(by_count) == 20);

    by_count[30] = samples(4, 100);
    CHECK(max_supported_players(by_count) == 30);

    std::map<int, std::vector<double>> none{{1, samples(10, 100)}};
    CHECK(max_supported_players(none) == 0);

    std::map<int, std::vector<double>> budget{{8, {49.9, 50.0, 10.0, 10.0}}};
    // 50.0 is within budget; only values beyond it count as overruns.
    CHECK(max_supported_players(budget, 50.0, 0.05) == 8);
}

TEST_CASE("efficiency summaries report the full-speculation fraction") {
    std::vector<double> eff{1.0, 1.0, 1.0, 0.375, 0.0, 1.0, 0.5, 1.0};
    auto s = summarize_efficiency(eff);
    CHECK(s.count == 8);
    CHECK(s.fraction_full == doctest::Approx(5.0 / 8.0));
    CHECK(s.median == 1.0);
    CHECK(s.p5 == 0.0);
    CHECK(s.p95 == 1.0);

    auto empty = summarize_efficiency({});
    CHECK(empty.count == 0);
}

TEST_CASE("invocation cost combines request count and compute seconds") {
    std::vector<InvocationRecord> recs(2);
    recs[0].worker_ms = 1000.0;
    recs[1].worker_ms = 500.0;
    CostParams p;
    p.usd_per_invocation = 1e-6;
    p.usd_per_gb_second = 2e-5;
    p.function_gb = 0.5;
    // 2 invocations + 1.5 compute seconds at 0.5 GB.
    double want = 2 * 1e-6 + 1.5 * 0.5 * 2e-5;
    CHECK(invocation_cost_usd(recs, p) == doctest::Approx(want));
    CHECK(invocation_cost_usd({}, p) == 0.0);
}

TEST_CASE("metrics directory contains one csv per stream plus a manifest") {
    MetricsLog log;
    for (int i = 0; i < 3; ++i) {
        TickSample t;
        t.tick = i;
        t.duration_ms = 1.5 * i;
        log.ticks.push_back(t);
    }
    EfficiencyRecord e;
    e.construct_id = 4;
    e.total_steps = 8;
    e.duplicated_steps = 5;
    e.efficiency = 0.375;
    log.efficiency.push_back(e);
    InvocationRecord inv;
    inv.seq = 1;
    inv.end_to_end_ms = 62.0;
    log.invocations.push_back(inv);
    log.storage_reads.push_back({100, "c_0_0", 2.5, true});
    log.storage_writes.push_back({200, "c_0_0", 3.5});
    log.distance.push_back({5, 128});
    log.distance.push_back({6, 127});

    auto dir = fs::temp_directory_path() / "servo_test_metrics";
    fs::remove_all(dir);
    write_metrics(log, dir, {{"players", "4"}});

    CHECK(count_lines(dir / "tick_durations.csv") == 4);  // header + 3 rows
    CHECK(count_lines(dir / "efficiency.csv") == 2);
    CHECK(count_lines(dir / "invocations.csv") == 2);
    CHECK(count_lines(dir / "storage_latency.csv") == 2);
    CHECK(count_lines(dir / "storage_writes.csv") == 2);
    CHECK(count_lines(dir / "distance.csv") == 3);

    std::ifstream manifest(dir / "manifest.json");
    std::string all((std::istreambuf_iterator<char>(manifest)),
                    std::istreambuf_iterator<char>());
    CHECK(all.find("\"players\"") != std::string::npos);

    std::ifstream ticks(dir / "tick_durations.csv");
    std::string header;
    std::getline(ticks, header);
    CHECK(header.find("tick") != std::string::npos);
    CHECK(header.find("duration_ms") != std::string::npos);
}

TEST_CASE("format_double trims trailing zeros") {
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(0.375) == "0.375");
    CHECK(format_double(-2.5) == "-2.5");
}
