#include "servo/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace servo {

double percentile_nearest_rank(std::vector<double> values, double pct) {
    if (values.empty())
        throw std::invalid_argument("percentile of empty sample");
    if (pct <= 0.0 || pct > 100.0)
        throw std::invalid_argument("percentile outside (0, 100]");
    std::sort(values.begin(), values.end());
    size_t rank = static_cast<size_t>(std::ceil(pct / 100.0 * values.size()));
    if (rank == 0) rank = 1;
    return values[rank - 1];
}

int max_supported_players(const std::map<int, std::vector<double>>& samples_by_count,
                          double budget_ms, double over_fraction) {
    int best = 0;
    for (const auto& [count, samples] : samples_by_count) {
        if (samples.empty()) continue;
        size_t over = 0;
        for (double d : samples)
            if (d > budget_ms) ++over;
        double frac = static_cast<double>(over) / static_cast<double>(samples.size());
        if (frac < over_fraction) best = std::max(best, count);
    }
    return best;
}

EfficiencyStats summarize_efficiency(const std::vector<double>& efficiencies) {
    EfficiencyStats s;
    s.count = efficiencies.size();
    if (efficiencies.empty()) return s;
    s.median = percentile_nearest_rank(efficiencies, 50.0);
    s.p5 = percentile_nearest_rank(efficiencies, 5.0);
    s.p95 = percentile_nearest_rank(efficiencies, 95.0);
    size_t full = 0;
    for (double e : efficiencies)
        if (e == 1.0) ++full;
    s.fraction_full = static_cast<double>(full) / static_cast<double>(s.count);
    return s;
}

double invocation_cost_usd(const std::vector<InvocationRecord>& records,
                           const CostParams& params) {
    double total = 0;
    for (const InvocationRecord& r : records) {
        total += params.usd_per_invocation;
        double billed_s = std::ceil(r.worker_ms) / 1000.0;
        total += billed_s * params.function_gb * params.usd_per_gb_second;
    }
    return total;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    std::string s(buf);
    size_t dot = s.find('.');
    if (dot != std::string::npos) {
        size_t last = s.find_last_not_of('0');
        s.erase(last == dot ? dot : last + 1);
    }
    return s;
}

void write_metrics(const MetricsLog& log, const std::filesystem::path& dir,
                   const std::map<std::string, std::string>& manifest_extra) {
    std::filesystem::create_directories(dir);

    {
        std::ofstream out(dir / "tick_durations.csv", std::ios::trunc);
        out << "tick,duration_ms,emulated_ms,wall_ms,actions_ms,sc_ms,chunk_load_ms,"
               "emit_ms,wall_offset_ms\n";
        for (const TickSample& t : log.ticks) {
            out << t.tick << ',' << format_double(t.duration_ms) << ','
                << format_double(t.emulated_ms) << ',' << format_double(t.wall_ms) << ','
                << format_double(t.actions_ms) << ',' << format_double(t.sc_ms) << ','
                << format_double(t.chunk_load_ms) << ',' << format_double(t.emit_ms)
                << ',' << format_double(t.wall_offset_ms) << '\n';
        }
    }
    {
        std::ofstream out(dir / "efficiency.csv", std::ios::trunc);
        out << "seq,construct_id,issue_tick,start_tick,total_steps,duplicated_steps,"
               "efficiency\n";
        for (const EfficiencyRecord& r : log.efficiency) {
            out << r.seq << ',' << r.construct_id << ',' << r.issue_tick << ','
                << r.start_tick << ',' << r.total_steps << ',' << r.duplicated_steps
                << ',' << format_double(r.efficiency) << '\n';
        }
    }
    {
        std::ofstream out(dir / "invocations.csv", std::ios::trunc);
        out << "seq,function,enqueue_tick,enqueue_ms,end_to_end_ms,worker_ms,was_cold,"
               "payload_bytes,reply_bytes\n";
        for (const InvocationRecord& r : log.invocations) {
            out << r.seq << ',' << fn_name(r.function) << ',' << (r.enqueue_ms / 50)
                << ',' << r.enqueue_ms << ',' << format_double(r.end_to_end_ms) << ','
                << format_double(r.worker_ms) << ',' << (r.was_cold ? 1 : 0) << ','
                << r.payload_bytes << ',' << r.reply_bytes << '\n';
        }
    }
    {
        std::ofstream out(dir / "storage_latency.csv", std::ios::trunc);
        out << "at_ms,key,latency_ms,hit\n";
        for (const StorageReadRecord& r : log.storage_reads) {
            out << r.at_ms << ',' << r.key << ',' << format_double(r.latency_ms) << ','
                << (r.hit ? 1 : 0) << '\n';
        }
    }
    {
        std::ofstream out(dir / "storage_writes.csv", std::ios::trunc);
        out << "at_ms,key,latency_ms\n";
        for (const StorageWriteRecord& r : log.storage_writes) {
            out << r.at_ms << ',' << r.key << ',' << format_double(r.latency_ms) << '\n';
        }
    }
    {
        std::ofstream out(dir / "distance.csv", std::ios::trunc);
        out << "tick,distance_blocks\n";
        for (const DistanceSample& d : log.distance)
            out << d.tick << ',' << d.distance_blocks << '\n';
    }
    {
        nlohmann::json j;
        j["ticks"] = log.ticks.size();
        j["efficiency_records"] = log.efficiency.size();
        j["invocations"] = log.invocations.size();
        j["storage_reads"] = log.storage_reads.size();
        j["storage_writes"] = log.storage_writes.size();
        for (const auto& [k, v] : manifest_extra) {
            // Keep numeric extras typed so consumers can read them back
            // without re-parsing strings.
            size_t used = 0;
            try {
                long long n = std::stoll(v, &used);
                if (used == v.size()) {
                    j[k] = n;
                    continue;
                }
            } catch (const std::exception&) {
            }
            try {
                double d = std::stod(v, &used);
                if (used == v.size()) {
                    j[k] = d;
                    continue;
                }
            } catch (const std::exception&) {
            }
            j[k] = v;
        }
        std::ofstream out(dir / "manifest.json", std::ios::trunc);
        out << j.dump(2) << '\n';
    }
}

}  // namespace servo
