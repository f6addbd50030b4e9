#include "checklist_forge/gateway.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "checklist_forge/serialize.hpp"
#include "checklist_forge/text_util.hpp"

namespace checklist_forge {

namespace {

std::string utc_now() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// RAII slot in the concurrency limiter.
class InFlight {
public:
    InFlight(std::counting_semaphore<>& sem, std::atomic<std::uint64_t>& in_flight,
             std::atomic<std::uint64_t>& max_in_flight)
        : sem_(sem), in_flight_(in_flight) {
        sem_.acquire();
        auto now = in_flight_.fetch_add(1) + 1;
        auto prev = max_in_flight.load();
        while (now > prev && !max_in_flight.compare_exchange_weak(prev, now)) {
        }
    }
    ~InFlight() {
        in_flight_.fetch_sub(1);
        sem_.release();
    }
    InFlight(const InFlight&) = delete;
    InFlight& operator=(const InFlight&) = delete;

private:
    std::counting_semaphore<>& sem_;
    std::atomic<std::uint64_t>& in_flight_;
};

}  // namespace

std::string canonical_request(const TeacherRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back(json{{"role", m.role}, {"content", m.content}});
    }
    json j{{"model", request.model},
           {"messages", std::move(messages)},
           {"temperature", json_number(request.temperature, "temperature")},
           {"top_p", json_number(request.top_p, "top_p")},
           {"n", request.n},
           {"max_tokens", request.max_tokens},
           {"seed", request.seed ? json(*request.seed) : json(nullptr)}};
    return canonical_line(j);
}

std::string fingerprint(const TeacherRequest& request) {
    return sha256_hex(canonical_request(request));
}

ReplayStore::ReplayStore(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            auto j = json::parse(line);
            TeacherTranscript t;
            t.request_fingerprint = j.at("fingerprint").get<std::string>();
            t.completions = j.at("completions").get<std::vector<std::string>>();
            t.latency_ms = j.value("latency_ms", 0.0);
            t.recorded_at = j.value("recorded_at", std::string{});
            entries_[t.request_fingerprint] = std::move(t);
        } catch (const json::exception& e) {
            throw GatewayError("replay store " + path_ + ":" + std::to_string(lineno) +
                               ": " + e.what());
        }
    }
}

std::optional<TeacherTranscript> ReplayStore::find(const std::string& fp) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(fp);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ReplayStore::append(TeacherTranscript transcript) {
    std::lock_guard lock(mu_);
    if (!path_.empty()) {
        std::ofstream out(path_, std::ios::app);
        json j{{"fingerprint", transcript.request_fingerprint},
               {"completions", transcript.completions},
               {"latency_ms", json_number(transcript.latency_ms, "latency_ms")},
               {"recorded_at", transcript.recorded_at}};
        out << canonical_line(j);
        out.flush();
        if (!out) throw GatewayError("failed to append to replay store " + path_);
    }
    entries_[transcript.request_fingerprint] = std::move(transcript);
}

std::size_t ReplayStore::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

Gateway::Gateway(std::shared_ptr<TeacherBackend> backend, std::shared_ptr<ReplayStore> store,
                 GatewayMode mode, GatewayOptions options)
    : backend_(std::move(backend)),
      store_(std::move(store)),
      mode_(mode),
      options_(std::move(options)),
      limiter_(std::max(1, options_.max_concurrency)) {
    if (mode_ != GatewayMode::replay && !backend_) {
        throw std::invalid_argument("gateway: live/record mode requires a backend");
    }
    if (mode_ != GatewayMode::live && !store_) {
        throw std::invalid_argument("gateway: record/replay mode requires a transcript store");
    }
    if (!options_.sleeper) {
        options_.sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
}

std::vector<std::string> Gateway::complete(const TeacherRequest& request) {
    if (request.n < 1) throw std::invalid_argument("teacher request: n must be >= 1");
    if (!(request.temperature >= 0.0)) {
        throw std::invalid_argument("teacher request: temperature must be >= 0");
    }
    requests_.fetch_add(1);
    completions_requested_.fetch_add(static_cast<std::uint64_t>(request.n));

    InFlight slot(limiter_, in_flight_, max_in_flight_);
    const std::string fp = fingerprint(request);

    if (mode_ != GatewayMode::live) {
        if (auto hit = store_->find(fp)) {
            if (static_cast<int>(hit->completions.size()) != request.n) {
                throw GatewayError("transcript " + fp + " has " +
                                   std::to_string(hit->completions.size()) +
                                   " completions, expected " + std::to_string(request.n));
            }
            replay_hits_.fetch_add(1);
            return hit->completions;
        }
        if (mode_ == GatewayMode::replay) throw ReplayMiss(fp);
    }

    auto start = std::chrono::steady_clock::now();
    std::vector<std::string> completions;
    try {
        completions = call_backend(request);
    } catch (const EndpointFailure&) {
        failures_.fetch_add(1);
        throw;
    }
    if (mode_ == GatewayMode::record) {
        std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - start;
        store_->append(TeacherTranscript{fp, completions, elapsed.count(), utc_now()});
    }
    return completions;
}

std::vector<std::string> Gateway::call_backend(const TeacherRequest& request) {
    if (request.n == 1 || backend_->supports_n()) return call_with_retry(request);

    // Emulated n-sampling: n single-completion calls with identical decoding
    // parameters. Seeded endpoints get distinct seeds so samples differ.
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(request.n));
    for (int i = 0; i < request.n; ++i) {
        TeacherRequest single = request;
        single.n = 1;
        if (single.seed) *single.seed += static_cast<std::uint64_t>(i);
        auto one = call_with_retry(single);
        out.push_back(std::move(one.front()));
    }
    return out;
}

std::vector<std::string> Gateway::call_with_retry(const TeacherRequest& request) {
    std::string last_error;
    for (int attempt = 0; attempt < options_.max_attempts; ++attempt) {
        if (attempt > 0) options_.sleeper(options_.base_backoff * (1 << (attempt - 1)));
        upstream_calls_.fetch_add(1);
        try {
            auto completions = backend_->complete(request);
            if (static_cast<int>(completions.size()) == request.n) return completions;
            last_error = "endpoint returned " + std::to_string(completions.size()) +
                         " completions, expected " + std::to_string(request.n);
        } catch (const TransientEndpointError& e) {
            last_error = e.what();
        }
    }
    throw EndpointFailure("endpoint failed after " + std::to_string(options_.max_attempts) +
                          " attempts: " + last_error);
}

GatewayMetrics Gateway::metrics() const {
    return GatewayMetrics{requests_.load(),     completions_requested_.load(),
                          upstream_calls_.load(), replay_hits_.load(),
                          failures_.load(),     max_in_flight_.load()};
}

void Gateway::reset_metrics() {
    requests_ = 0;
    completions_requested_ = 0;
    upstream_calls_ = 0;
    replay_hits_ = 0;
    failures_ = 0;
    max_in_flight_ = in_flight_.load();
}

}  // namespace checklist_forge
