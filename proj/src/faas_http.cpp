#include "servo/http_adapter.hpp"

#include <json.hpp>

#include "servo/storage.hpp"

#define CPPHTTPLIB_NO_EXCEPTIONS 0
#include <httplib.h>

namespace servo {

using nlohmann::json;

std::string encode_http_request(FnKind fn, const std::vector<uint8_t>& body) {
    json j;
    j["fn"] = static_cast<int>(fn);
    j["body"] = base64_encode(body);
    return j.dump();
}

std::pair<FnKind, std::vector<uint8_t>> decode_http_request(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.contains("fn") || !j.contains("body") ||
        !j["fn"].is_number_integer() || !j["body"].is_string())
        throw WireError("malformed HTTP invocation envelope");
    int fn = j["fn"].get<int>();
    if (fn != static_cast<int>(FnKind::ScSimulate) &&
        fn != static_cast<int>(FnKind::TerrainGenerate))
        throw WireError("unknown function tag in HTTP envelope");
    return {static_cast<FnKind>(fn), base64_decode(j["body"].get<std::string>())};
}

std::string encode_http_response(const std::vector<uint8_t>& reply_body) {
    json j;
    j["status"] = "ok";
    j["body"] = base64_encode(reply_body);
    return j.dump();
}

std::vector<uint8_t> decode_http_response(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.contains("status") || !j["status"].is_string())
        throw WireError("malformed HTTP invocation reply");
    if (j["status"].get<std::string>() != "ok" || !j.contains("body") ||
        !j["body"].is_string())
        throw WireError("HTTP invocation failed");
    return base64_decode(j["body"].get<std::string>());
}

struct HttpFaasServer::Impl {
    HandlerCosts costs;
    std::string host;
    int port;
    httplib::Server server;
};

HttpFaasServer::HttpFaasServer(HandlerCosts costs, const std::string& host, int port)
    : impl_(std::make_unique<Impl>()) {
    impl_->costs = costs;
    impl_->host = host;
    impl_->port = port;
    impl_->server.Post("/invoke", [this](const httplib::Request& req,
                                         httplib::Response& res) {
        try {
            auto [fn, body] = decode_http_request(req.body);
            double worker_ms = 0;
            std::vector<uint8_t> reply;
            if (fn == FnKind::ScSimulate)
                reply = sc_simulate_handler(body, impl_->costs, worker_ms);
            else
                reply = terrain_generate_handler(body, impl_->costs, worker_ms);
            res.set_content(encode_http_response(reply), "application/json");
        } catch (const std::exception& e) {
            json j;
            j["status"] = "error";
            j["message"] = e.what();
            res.status = 400;
            res.set_content(j.dump(), "application/json");
        }
    });
}

HttpFaasServer::~HttpFaasServer() { stop(); }

bool HttpFaasServer::start() { return impl_->server.listen(impl_->host, impl_->port); }

void HttpFaasServer::stop() {
    if (impl_->server.is_running()) impl_->server.stop();
}

struct HttpFaasClient::Impl {
    httplib::Client client;
    Impl(const std::string& host, int port) : client(host, port) {}
};

HttpFaasClient::HttpFaasClient(const std::string& host, int port)
    : impl_(std::make_unique<Impl>(host, port)) {}

HttpFaasClient::~HttpFaasClient() = default;

std::vector<uint8_t> HttpFaasClient::invoke(FnKind fn, const std::vector<uint8_t>& body) {
    auto res = impl_->client.Post("/invoke", encode_http_request(fn, body),
                                  "application/json");
    if (!res || res->status != 200) {
        OffloadReply err;
        err.error = true;
        return encode_offload_reply(err);
    }
    try {
        return decode_http_response(res->body);
    } catch (const std::exception&) {
        OffloadReply err;
        err.error = true;
        return encode_offload_reply(err);
    }
}

namespace {

class HttpBlobBackend : public StorageBackend {
public:
    HttpBlobBackend(const std::string& host, int port) : client_(host, port) {}

    const char* name() const override { return "http_blob"; }

    std::optional<std::vector<uint8_t>> read(const std::string& key) override {
        auto res = client_.Get("/blob/" + key);
        if (!res || res->status != 200) return std::nullopt;
        return std::vector<uint8_t>(res->body.begin(), res->body.end());
    }

    void write(const std::string& key, const std::vector<uint8_t>& bytes) override {
        client_.Put("/blob/" + key,
                    std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                    "application/octet-stream");
    }

    // Real transport: no modeled latency on top.
    double sample_read_latency(Rng&, uint64_t) override { return 0.0; }
    double sample_write_latency(Rng&, uint64_t) override { return 0.0; }

private:
    httplib::Client client_;
};

}  // namespace

std::unique_ptr<StorageBackend> make_http_blob_backend(const std::string& host, int port) {
    return std::make_unique<HttpBlobBackend>(host, port);
}

}  // namespace servo
