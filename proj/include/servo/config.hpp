#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace servo {

// Flat key = value configuration. Keys are snake_case; '#' starts a comment;
// blank lines are ignored. Environment variables override file values:
// SERVO_FAAS_WARM_LATENCY overrides the key faas_warm_latency.
class KVConfig {
public:
    KVConfig() = default;

    static KVConfig from_file(const std::filesystem::path& path);
    static KVConfig from_string(const std::string& text);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::string get_str(const std::string& key, const std::string& def = "") const;
    int64_t get_int(const std::string& key, int64_t def = 0) const;
    double get_double(const std::string& key, double def = 0.0) const;
    bool get_bool(const std::string& key, bool def = false) const;

    // prefix defaults to "SERVO_".
    void apply_env_overrides(const std::string& prefix = "SERVO_");

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace servo
