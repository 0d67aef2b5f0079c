#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "servo/faas.hpp"
#include "servo/speculation.hpp"
#include "servo/storage.hpp"

namespace servo {

struct TickSample {
    int64_t tick = 0;
    double duration_ms = 0;   // emulated + wall
    double emulated_ms = 0;   // deterministic modeled cost
    double wall_ms = 0;       // measured, excludes inline handler execution
    double actions_ms = 0;
    double sc_ms = 0;
    double chunk_load_ms = 0;
    double emit_ms = 0;
    double wall_offset_ms = 0;  // tick start relative to run start (wall clock)
};

struct DistanceSample {
    int64_t tick = 0;
    int distance_blocks = 0;
};

struct MetricsLog {
    std::vector<TickSample> ticks;
    std::vector<EfficiencyRecord> efficiency;
    std::vector<InvocationRecord> invocations;
    std::vector<StorageReadRecord> storage_reads;
    std::vector<StorageWriteRecord> storage_writes;
    std::vector<DistanceSample> distance;
};

// Nearest-rank percentile: the ceil(pct/100 * n)-th smallest value. pct must
// be in (0, 100]. Throws std::invalid_argument on an empty input.
double percentile_nearest_rank(std::vector<double> values, double pct);

// Largest player count whose tick samples exceed budget_ms in strictly fewer
// than over_fraction of samples; 0 when no count qualifies.
int max_supported_players(const std::map<int, std::vector<double>>& samples_by_count,
                          double budget_ms = 50.0, double over_fraction = 0.05);

struct EfficiencyStats {
    size_t count = 0;
    double median = 0;
    double p5 = 0;
    double p95 = 0;
    double fraction_full = 0;  // records at exactly 1.0
};

EfficiencyStats summarize_efficiency(const std::vector<double>& efficiencies);

// Public cloud style price model, reported for context only.
struct CostParams {
    double usd_per_invocation = 2.0e-7;
    double usd_per_gb_second = 1.6667e-5;
    double function_gb = 0.125;
};

double invocation_cost_usd(const std::vector<InvocationRecord>& records,
                           const CostParams& params = {});

// Writes tick_durations.csv, efficiency.csv, invocations.csv,
// storage_latency.csv, storage_writes.csv, distance.csv and manifest.json
// into dir. manifest_extra entries are copied into the manifest verbatim.
void write_metrics(const MetricsLog& log, const std::filesystem::path& dir,
                   const std::map<std::string, std::string>& manifest_extra = {});

std::string format_double(double v);

}  // namespace servo
