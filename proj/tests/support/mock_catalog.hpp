#pragma once

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <map>
#include <mutex>
#include <string>
#include <thread>

namespace provtrace::testutil {

// In-process catalog endpoint: stores entities by guid (upsert), so a
// second upload of the same graph leaves the store unchanged. Can be
// scripted to fail the first N requests with a 500.
class MockCatalog {
public:
    MockCatalog() {
        server_.Post("/entities/bulk", [this](const httplib::Request& req,
                                              httplib::Response& res) {
            ++requests_;
            if (failures_remaining_ > 0) {
                --failures_remaining_;
                res.status = 500;
                res.set_content("injected failure", "text/plain");
                return;
            }
            auto doc = nlohmann::json::parse(req.body, nullptr, false);
            if (doc.is_discarded()) {
                res.status = 400;
                return;
            }
            std::lock_guard<std::mutex> lock(mutex_);
            const std::string kind = doc.value("kind", "");
            for (const auto& item : doc.value("items", nlohmann::json::array())) {
                if (kind == "entities") {
                    entities_[item.value("guid", "")] = item;
                } else if (kind == "relationships") {
                    relationships_[item.dump()] = item;
                }
            }
            res.status = 200;
            res.set_content("{}", "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~MockCatalog() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    std::string endpoint() const {
        return "http://127.0.0.1:" + std::to_string(port_);
    }

    void fail_next(int n) { failures_remaining_ = n; }

    std::size_t entity_count() {
        std::lock_guard<std::mutex> lock(mutex_);
        return entities_.size();
    }
    std::size_t relationship_count() {
        std::lock_guard<std::mutex> lock(mutex_);
        return relationships_.size();
    }
    std::map<std::string, nlohmann::json> entities() {
        std::lock_guard<std::mutex> lock(mutex_);
        return entities_;
    }
    int requests() const { return requests_; }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_{};
    std::mutex mutex_;
    std::map<std::string, nlohmann::json> entities_;
    std::map<std::string, nlohmann::json> relationships_;
    std::atomic<int> failures_remaining_{0};
    std::atomic<int> requests_{0};
};

} // namespace provtrace::testutil
