#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "servo/faas.hpp"

namespace servo {

// JSON envelope for carrying function payloads over HTTP:
//   request  {"fn": <int>, "body": "<base64>"}
//   response {"status": "ok", "body": "<base64>"} or {"status": "error", ...}
std::string encode_http_request(FnKind fn, const std::vector<uint8_t>& body);
std::pair<FnKind, std::vector<uint8_t>> decode_http_request(const std::string& json);
std::string encode_http_response(const std::vector<uint8_t>& reply_body);
std::vector<uint8_t> decode_http_response(const std::string& json);

// Minimal HTTP host for the two handlers (POST /invoke). Runs handlers
// inline with real network latency instead of the emulator's modeled clock.
// Intended for manual experiments; benchmark runs use FaasEmulator.
class HttpFaasServer {
public:
    HttpFaasServer(HandlerCosts costs, const std::string& host, int port);
    ~HttpFaasServer();
    bool start();  // blocks until stopped
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

class HttpFaasClient {
public:
    HttpFaasClient(const std::string& host, int port);
    ~HttpFaasClient();
    // Returns the reply body, or an error-status reply on transport failure.
    std::vector<uint8_t> invoke(FnKind fn, const std::vector<uint8_t>& body);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace servo
