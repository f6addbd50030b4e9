/// @file gateway.hpp
/// @brief Teacher-model gateway: n-sampling, concurrency limiting, retries,
/// and record/replay of transcripts.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace checklist_forge {

struct ChatMessage {
    std::string role;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct TeacherRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 1.0;
    double top_p = 1.0;
    int n = 1;
    int max_tokens = 512;
    std::optional<std::uint64_t> seed;

    bool operator==(const TeacherRequest&) const = default;
};

/// Canonical bytes of a request; the fingerprint hashes exactly these.
std::string canonical_request(const TeacherRequest& request);

/// SHA-256 over the canonical request. Sensitive to every field, including
/// message order, n and the sampling parameters.
std::string fingerprint(const TeacherRequest& request);

struct TeacherTranscript {
    std::string request_fingerprint;
    std::vector<std::string> completions;
    double latency_ms = 0.0;
    std::string recorded_at;
};

class GatewayError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Replay store has no transcript for the request. Never retried and never
/// downgraded to MISSING: a replay miss means the fixture is stale.
class ReplayMiss : public GatewayError {
public:
    explicit ReplayMiss(const std::string& fp)
        : GatewayError("transcript not found: " + fp) {}
};

/// Endpoint gave up: retries exhausted or a permanent error.
class EndpointFailure : public GatewayError {
public:
    using GatewayError::GatewayError;
};

/// Thrown by backends for errors worth retrying (network, 429, 5xx).
class TransientEndpointError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

/// A source of completions. Backends may be called from many threads.
class TeacherBackend {
public:
    virtual ~TeacherBackend() = default;
    virtual std::vector<std::string> complete(const TeacherRequest& request) = 0;
    /// Whether one call can return n > 1 completions.
    virtual bool supports_n() const { return true; }
};

/// Append-only transcript file keyed by request fingerprint.
class ReplayStore {
public:
    ReplayStore() = default;
    /// Loads an existing file (if any) and appends new transcripts to it.
    explicit ReplayStore(std::string path);

    std::optional<TeacherTranscript> find(const std::string& fp) const;
    /// Persists to the backing file (if any) before returning.
    void append(TeacherTranscript transcript);
    std::size_t size() const;

private:
    std::string path_;
    mutable std::mutex mu_;
    std::unordered_map<std::string, TeacherTranscript> entries_;
};

enum class GatewayMode { live, record, replay };

struct GatewayOptions {
    int max_concurrency = 8;
    int max_attempts = 3;
    std::chrono::milliseconds base_backoff{250};
    /// Injected for tests; defaults to std::this_thread::sleep_for.
    std::function<void(std::chrono::milliseconds)> sleeper;
};

struct GatewayMetrics {
    std::uint64_t requests = 0;               // logical complete() calls
    std::uint64_t completions_requested = 0;  // sum of n over requests
    std::uint64_t upstream_calls = 0;         // backend calls incl. retries
    std::uint64_t replay_hits = 0;
    std::uint64_t failures = 0;
    std::uint64_t max_in_flight = 0;
};

class Gateway {
public:
    /// `backend` may be null in replay mode. `store` must be set in record
    /// and replay modes.
    Gateway(std::shared_ptr<TeacherBackend> backend, std::shared_ptr<ReplayStore> store,
            GatewayMode mode, GatewayOptions options = {});

    /// Returns exactly request.n completions.
    /// Throws std::invalid_argument (bad request), ReplayMiss, EndpointFailure.
    std::vector<std::string> complete(const TeacherRequest& request);

    GatewayMetrics metrics() const;
    void reset_metrics();
    GatewayMode mode() const { return mode_; }

private:
    std::vector<std::string> call_backend(const TeacherRequest& request);
    std::vector<std::string> call_with_retry(const TeacherRequest& request);

    std::shared_ptr<TeacherBackend> backend_;
    std::shared_ptr<ReplayStore> store_;
    GatewayMode mode_;
    GatewayOptions options_;
    std::counting_semaphore<> limiter_;

    std::atomic<std::uint64_t> requests_{0};
    std::atomic<std::uint64_t> completions_requested_{0};
    std::atomic<std::uint64_t> upstream_calls_{0};
    std::atomic<std::uint64_t> replay_hits_{0};
    std::atomic<std::uint64_t> failures_{0};
    std::atomic<std::uint64_t> in_flight_{0};
    std::atomic<std::uint64_t> max_in_flight_{0};
};

}  // namespace checklist_forge
