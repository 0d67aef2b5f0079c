// servo-sim: run the game server, scripted-bot benchmarks, and report over
// the CSV output of a finished run.

#include <CLI11.hpp>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "servo/bench.hpp"
#include "servo/protocol.hpp"
#include "servo/server.hpp"
#include "servo/workload.hpp"

namespace {

servo::KVConfig load_config(const std::string& path,
                            const std::vector<std::string>& overrides) {
    servo::KVConfig kv;
    if (!path.empty()) kv = servo::KVConfig::from_file(path);
    kv.apply_env_overrides();
    for (const std::string& kvpair : overrides) {
        auto eq = kvpair.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("--set expects key=value, got: " + kvpair);
        }
        kv.set(kvpair.substr(0, eq), kvpair.substr(eq + 1));
    }
    return kv;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(path);
    if (!in) return rows;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, ',')) cols.push_back(col);
        rows.push_back(std::move(cols));
    }
    return rows;
}

void print_summary(const std::filesystem::path& dir) {
    using servo::percentile_nearest_rank;

    int64_t warmup_ticks = 0;
    {
        std::ifstream in(dir / "manifest.json");
        if (in) {
            auto j = nlohmann::json::parse(in, nullptr, false);
            if (!j.is_discarded() && j.contains("warmup_ticks")) {
                const auto& w = j["warmup_ticks"];
                if (w.is_number()) {
                    warmup_ticks = w.get<int64_t>();
                } else if (w.is_string()) {
                    warmup_ticks = std::stoll(w.get<std::string>());
                }
            }
        }
    }

    auto ticks = read_csv(dir / "tick_durations.csv");
    std::vector<double> durations;
    int over = 0;
    for (const auto& r : ticks) {
        if (r.size() < 2) continue;
        int64_t t = std::stoll(r[0]);
        if (t < warmup_ticks) continue;
        double d = std::stod(r[1]);
        durations.push_back(d);
        if (d > 50.0) ++over;
    }
    if (!durations.empty()) {
        std::printf("ticks: %zu (warmup skipped: %lld)\n", durations.size(),
                    (long long)warmup_ticks);
        std::printf("  duration ms p50 %.3f  p95 %.3f  p99 %.3f  over-50ms %.2f%%\n",
                    percentile_nearest_rank(durations, 50),
                    percentile_nearest_rank(durations, 95),
                    percentile_nearest_rank(durations, 99),
                    100.0 * over / durations.size());
    }

    auto eff = read_csv(dir / "efficiency.csv");
    std::vector<double> effs;
    for (const auto& r : eff) {
        if (r.size() >= 7) effs.push_back(std::stod(r[6]));
    }
    if (!effs.empty()) {
        auto st = servo::summarize_efficiency(effs);
        std::printf("efficiency: n %zu  median %.3f  p5 %.3f  p95 %.3f  full %.1f%%\n",
                    st.count, st.median, st.p5, st.p95, 100.0 * st.fraction_full);
    }

    auto inv = read_csv(dir / "invocations.csv");
    if (!inv.empty()) {
        size_t cold = 0;
        double e2e_sum = 0;
        std::vector<servo::InvocationRecord> recs;
        for (const auto& r : inv) {
            if (r.size() < 9) continue;
            servo::InvocationRecord rec;
            rec.worker_ms = std::stod(r[5]);
            recs.push_back(rec);
            e2e_sum += std::stod(r[4]);
            if (r[6] == "1") ++cold;
        }
        std::printf("invocations: n %zu  cold %.2f%%  mean e2e %.1f ms  est cost $%.4f\n",
                    recs.size(), 100.0 * cold / recs.size(), e2e_sum / recs.size(),
                    servo::invocation_cost_usd(recs));
    }

    auto reads = read_csv(dir / "storage_latency.csv");
    std::vector<double> hits, misses;
    for (const auto& r : reads) {
        if (r.size() < 4) continue;
        (r[3] == "1" ? hits : misses).push_back(std::stod(r[2]));
    }
    if (!hits.empty()) {
        std::printf("storage reads cached: n %zu  p50 %.2f  p99 %.2f  p99.9 %.2f ms\n",
                    hits.size(), percentile_nearest_rank(hits, 50),
                    percentile_nearest_rank(hits, 99),
                    percentile_nearest_rank(hits, 99.9));
    }
    if (!misses.empty()) {
        std::printf("storage reads uncached: n %zu  p50 %.2f  p99 %.2f  p99.9 %.2f ms\n",
                    misses.size(), percentile_nearest_rank(misses, 50),
                    percentile_nearest_rank(misses, 99),
                    percentile_nearest_rank(misses, 99.9));
    }

    auto dist = read_csv(dir / "distance.csv");
    std::vector<double> ds;
    for (const auto& r : dist) {
        if (r.size() < 2) continue;
        if (std::stoll(r[0]) < warmup_ticks) continue;
        ds.push_back(std::stod(r[1]));
    }
    if (!ds.empty()) {
        double mn = ds[0];
        for (double d : ds) mn = std::min(mn, d);
        std::printf("view distance loaded: min %.0f  p50 %.0f blocks\n", mn,
                    percentile_nearest_rank(ds, 50));
    }
}

int cmd_serve(const std::string& config, const std::vector<std::string>& sets) {
    auto kv = load_config(config, sets);
    auto cfg = servo::server_config_from_kv(kv);
    cfg.realtime = true;
    servo::Server server(cfg);
    std::printf("listening on %s:%d (%s / %s / %s)\n", cfg.listen_host.c_str(),
                cfg.listen_port, servo::sc_mode_name(cfg.sc_mode),
                servo::terrain_mode_name(cfg.terrain_mode),
                servo::storage_mode_name(cfg.storage_mode));
    std::fflush(stdout);
    server.serve();
    return 0;
}

int cmd_bench(const std::string& config, const std::vector<std::string>& sets,
              const std::string& out_dir) {
    auto kv = load_config(config, sets);
    auto scenario = servo::scenario_from_kv(kv);
    auto res = servo::run_scenario(scenario);
    std::map<std::string, std::string> extra;
    extra["warmup_ticks"] = std::to_string(res.warmup_ticks);
    extra["total_ticks"] = std::to_string(res.total_ticks);
    extra["world_hash"] = std::to_string(res.world_hash);
    extra["constructs_hash"] = std::to_string(res.constructs_hash);
    extra["sc_mode"] = servo::sc_mode_name(scenario.server.sc_mode);
    extra["terrain_mode"] = servo::terrain_mode_name(scenario.server.terrain_mode);
    extra["storage_mode"] = servo::storage_mode_name(scenario.server.storage_mode);
    extra["players"] = std::to_string(scenario.players);
    extra["sc_count"] = std::to_string(scenario.sc_count);
    servo::write_metrics(res.metrics, out_dir, extra);
    std::printf("wrote %s\n", out_dir.c_str());
    print_summary(out_dir);
    return 0;
}

// Minimal TCP load bots for a remotely running server: join, then wander.
int cmd_bots(const std::string& host, int port, int players, int seconds) {
    std::vector<std::thread> threads;
    std::vector<uint64_t> received((size_t)players, 0);
    threads.reserve(players);
    for (int i = 0; i < players; ++i) {
        threads.emplace_back([&host, port, i, seconds, &received] {
            int fd = ::socket(AF_INET, SOCK_STREAM, 0);
            sockaddr_in addr{};
            addr.sin_family = AF_INET;
            addr.sin_port = htons((uint16_t)port);
            addr.sin_addr.s_addr = inet_addr(host.c_str());
            if (::connect(fd, (sockaddr*)&addr, sizeof addr) != 0) {
                ::close(fd);
                std::fprintf(stderr, "bot %d: connect failed\n", i);
                return;
            }
            auto send_frame = [fd](servo::MsgTag tag, const std::vector<uint8_t>& p) {
                auto frame = servo::encode_frame(tag, p);
                (void)!::send(fd, frame.data(), frame.size(), MSG_NOSIGNAL);
            };
            send_frame(servo::MsgTag::Join,
                       servo::encode_join({"bot" + std::to_string(i)}));
            servo::Rng rng(servo::derive_seed(42, "tcp_bot", (uint64_t)i));
            auto deadline =
                std::chrono::steady_clock::now() + std::chrono::seconds(seconds);
            uint8_t buf[65536];
            while (std::chrono::steady_clock::now() < deadline) {
                servo::PlayerAction a;
                a.kind = servo::PlayerAction::Kind::Move;
                a.target = servo::Pos{(int32_t)rng.uniform_int(-64, 64), 0,
                                      (int32_t)rng.uniform_int(-64, 64)};
                a.speed = (uint8_t)rng.uniform_int(1, 8);
                send_frame(servo::MsgTag::Action, servo::encode_action(a));
                auto until = std::chrono::steady_clock::now() + std::chrono::seconds(2);
                while (std::chrono::steady_clock::now() < until) {
                    timeval tv{0, 100000};
                    fd_set rfds;
                    FD_ZERO(&rfds);
                    FD_SET(fd, &rfds);
                    if (::select(fd + 1, &rfds, nullptr, nullptr, &tv) > 0) {
                        ssize_t n = ::recv(fd, buf, sizeof buf, 0);
                        if (n <= 0) goto out;
                        received[(size_t)i] += (uint64_t)n;
                    }
                }
            }
        out:
            ::close(fd);
        });
    }
    for (auto& t : threads) t.join();
    uint64_t total = 0;
    for (uint64_t r : received) total += r;
    std::printf("%d bots, %d s: received %llu bytes total\n", players, seconds,
                (unsigned long long)total);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale game server with function-offloaded simulation"};
    app.require_subcommand(1);

    std::string config, out_dir = "bench_out", host = "127.0.0.1", report_dir;
    std::vector<std::string> sets;
    int port = 4070, players = 4, seconds = 60;

    auto* serve = app.add_subcommand("serve", "run the TCP server (realtime)");
    serve->add_option("--config", config, "key = value config file");
    serve->add_option("--set", sets, "override config key=value")->take_all();

    auto* bench = app.add_subcommand("bench", "run a scripted scenario, write CSVs");
    bench->add_option("--config", config, "key = value config file");
    bench->add_option("--set", sets, "override config key=value")->take_all();
    bench->add_option("--out", out_dir, "output directory");

    auto* bots = app.add_subcommand("bots", "TCP wander bots against a server");
    bots->add_option("--host", host);
    bots->add_option("--port", port);
    bots->add_option("--players", players);
    bots->add_option("--seconds", seconds);

    auto* report = app.add_subcommand("report", "summarize a bench output directory");
    report->add_option("dir", report_dir)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (serve->parsed()) return cmd_serve(config, sets);
        if (bench->parsed()) return cmd_bench(config, sets, out_dir);
        if (bots->parsed()) return cmd_bots(host, port, players, seconds);
        if (report->parsed()) {
            print_summary(report_dir);
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
