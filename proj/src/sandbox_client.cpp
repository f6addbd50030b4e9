#include "checklist_forge/sandbox_client.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <mutex>
#include <stdexcept>

#include <json.hpp>

#include "checklist_forge/serialize.hpp"
#include "checklist_forge/text_util.hpp"
#include "checklist_forge/verifier_gen.hpp"

namespace checklist_forge {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

int ms_until(Clock::time_point deadline) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    return left < 0 ? 0 : static_cast<int>(left);
}

std::string truncate_detail(std::string s) { return truncate_utf8(s, kMaxDetailBytes); }

json parse_object(std::string_view line, const char* what) {
    try {
        auto j = json::parse(line);
        if (!j.is_object()) throw std::invalid_argument(std::string(what) + ": not an object");
        return j;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string(what) + ": " + e.what());
    }
}

std::string resolve_executable(const std::string& name) {
    if (name.find('/') != std::string::npos) return name;
    const char* path = std::getenv("PATH");
    std::string dirs = path ? path : "/usr/bin:/bin";
    std::size_t start = 0;
    while (start <= dirs.size()) {
        auto end = dirs.find(':', start);
        if (end == std::string::npos) end = dirs.size();
        std::filesystem::path candidate = std::filesystem::path(dirs.substr(start, end - start)) / name;
        if (::access(candidate.c_str(), X_OK) == 0) return candidate.string();
        start = end + 1;
    }
    return name;
}

// One live sandbox child.
class Child {
public:
    Child(const std::string& exe, const std::vector<std::string>& argv, int memory_mb) {
        char tmpl[] = "/tmp/cf-sandbox-XXXXXX";
        if (!::mkdtemp(tmpl)) throw std::runtime_error("mkdtemp failed");
        workdir_ = tmpl;

        int in_pipe[2], out_pipe[2], err_pipe[2];
        if (::pipe2(in_pipe, O_CLOEXEC) || ::pipe2(out_pipe, O_CLOEXEC) || ::pipe2(err_pipe, O_CLOEXEC)) {
            throw std::runtime_error("pipe2 failed");
        }
        std::vector<char*> cargv;
        for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
        cargv.push_back(nullptr);
        rlimit mem{};
        mem.rlim_cur = mem.rlim_max = static_cast<rlim_t>(memory_mb + 512) * 1024 * 1024;

        pid_ = ::fork();
        if (pid_ < 0) throw std::runtime_error("fork failed");
        if (pid_ == 0) {
            // Only async-signal-safe calls until exec.
            ::setpgid(0, 0);
            ::dup2(in_pipe[0], STDIN_FILENO);
            ::dup2(out_pipe[1], STDOUT_FILENO);
            ::dup2(err_pipe[1], STDERR_FILENO);
            if (::chdir(tmpl) != 0) ::_exit(126);
            ::setrlimit(RLIMIT_AS, &mem);
            ::execv(exe.c_str(), cargv.data());
            ::_exit(127);
        }
        ::setpgid(pid_, pid_);
        ::close(in_pipe[0]);
        ::close(out_pipe[1]);
        ::close(err_pipe[1]);
        in_ = in_pipe[1];
        out_ = out_pipe[0];
        err_ = err_pipe[0];
        ::fcntl(out_, F_SETFL, O_NONBLOCK);
        ::fcntl(err_, F_SETFL, O_NONBLOCK);
        ::fcntl(in_, F_SETFL, O_NONBLOCK);
    }

    ~Child() {
        kill();
        std::error_code ec;
        std::filesystem::remove_all(workdir_, ec);
    }

    Child(const Child&) = delete;
    Child& operator=(const Child&) = delete;

    bool write_all(std::string_view data, Clock::time_point deadline) {
        while (!data.empty()) {
            ssize_t n = ::write(in_, data.data(), data.size());
            if (n > 0) {
                data.remove_prefix(static_cast<std::size_t>(n));
                continue;
            }
            if (n < 0 && errno != EAGAIN && errno != EINTR) return false;
            pollfd pfd{in_, POLLOUT, 0};
            if (::poll(&pfd, 1, ms_until(deadline)) <= 0) return false;
            if (pfd.revents & (POLLERR | POLLHUP)) return false;
        }
        return true;
    }

    enum class ReadStatus { line, eof, timeout };

    ReadStatus read_line(std::string& line, Clock::time_point deadline) {
        for (;;) {
            auto nl = buf_.find('\n');
            if (nl != std::string::npos) {
                line = buf_.substr(0, nl);
                buf_.erase(0, nl + 1);
                return ReadStatus::line;
            }
            if (out_eof_) return ReadStatus::eof;
            pollfd pfds[2] = {{out_, POLLIN, 0}, {err_, POLLIN, 0}};
            int timeout = ms_until(deadline);
            int rc = ::poll(pfds, err_ >= 0 ? 2 : 1, timeout);
            if (rc < 0 && errno == EINTR) continue;
            if (rc <= 0) return ReadStatus::timeout;
            if (err_ >= 0 && (pfds[1].revents & (POLLIN | POLLHUP))) drain_stderr();
            if (pfds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
                char chunk[4096];
                ssize_t n = ::read(out_, chunk, sizeof chunk);
                if (n > 0) buf_.append(chunk, static_cast<std::size_t>(n));
                else if (n == 0) out_eof_ = true;
                else if (errno != EAGAIN && errno != EINTR) out_eof_ = true;
            }
        }
    }

    void drain_stderr() {
        char chunk[4096];
        for (;;) {
            ssize_t n = ::read(err_, chunk, sizeof chunk);
            if (n > 0) {
                if (stderr_.size() < kMaxDetailBytes) stderr_.append(chunk, static_cast<std::size_t>(n));
                continue;
            }
            if (n == 0) {
                ::close(err_);
                err_ = -1;
            }
            return;
        }
    }

    void close_stdin() {
        if (in_ >= 0) ::close(in_);
        in_ = -1;
    }

    /// Waits for exit until `deadline`, then kills the process group.
    int finish(Clock::time_point deadline) {
        close_stdin();
        while (Clock::now() < deadline) {
            int status = 0;
            pid_t r = ::waitpid(pid_, &status, WNOHANG);
            if (r == pid_) {
                pid_ = -1;
                return status;
            }
            ::usleep(2000);
        }
        kill();
        return -1;
    }

    void kill() {
        close_stdin();
        if (pid_ > 0) {
            ::killpg(pid_, SIGKILL);
            ::kill(pid_, SIGKILL);
            int status = 0;
            ::waitpid(pid_, &status, 0);
            pid_ = -1;
        }
        if (out_ >= 0) ::close(out_);
        if (err_ >= 0) ::close(err_);
        out_ = err_ = -1;
    }

    std::string exit_detail() {
        if (err_ >= 0) drain_stderr();
        std::string d = "sandbox child exited without a verdict";
        if (!stderr_.empty()) d += ": " + stderr_;
        return truncate_detail(d);
    }

private:
    pid_t pid_ = -1;
    int in_ = -1, out_ = -1, err_ = -1;
    bool out_eof_ = false;
    std::string buf_;
    std::string stderr_;
    std::string workdir_;
};

}  // namespace

ProgramSpec make_program_spec(const std::string& source) {
    ProgramSpec spec;
    spec.source = source;
    spec.entry_point = verifier_entry_point(source);
    if (spec.entry_point.empty()) {
        throw std::invalid_argument("verifier source has no single top-level predicate");
    }
    spec.program_id = sha256_hex(source).substr(0, 16);
    return spec;
}

std::string_view to_string(VerdictStatus status) {
    switch (status) {
        case VerdictStatus::pass: return "pass";
        case VerdictStatus::fail: return "fail";
        case VerdictStatus::error: return "error";
        case VerdictStatus::timeout: return "timeout";
    }
    return "error";
}

VerdictStatus verdict_status_from_string(std::string_view s) {
    if (s == "pass") return VerdictStatus::pass;
    if (s == "fail") return VerdictStatus::fail;
    if (s == "error") return VerdictStatus::error;
    if (s == "timeout") return VerdictStatus::timeout;
    throw std::invalid_argument("unknown verdict status '" + std::string(s) + "'");
}

ProgramResult to_program_result(const std::optional<SandboxVerdict>& verdict) {
    if (!verdict) return ProgramResult::absent;
    switch (verdict->status) {
        case VerdictStatus::pass: return ProgramResult::pass;
        case VerdictStatus::fail: return ProgramResult::fail;
        case VerdictStatus::error:
        case VerdictStatus::timeout: return ProgramResult::error;
    }
    return ProgramResult::error;
}

std::string encode_preamble(const ProgramSpec& program, const SandboxLimits& limits) {
    json header{{"program_id", program.program_id},
                {"entry_point", program.entry_point},
                {"length", program.source.size()},
                {"timeout_ms", limits.timeout_ms},
                {"memory_mb", limits.memory_mb}};
    return canonical_line(header) + program.source;
}

PreambleHeader decode_preamble_header(std::string_view line) {
    auto j = parse_object(line, "preamble");
    try {
        PreambleHeader h;
        h.program_id = j.at("program_id").get<std::string>();
        h.entry_point = j.at("entry_point").get<std::string>();
        h.length = j.at("length").get<std::size_t>();
        h.limits.timeout_ms = j.at("timeout_ms").get<int>();
        h.limits.memory_mb = j.at("memory_mb").get<int>();
        return h;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("preamble: ") + e.what());
    }
}

std::string encode_request_line(const WireRequest& request) {
    return canonical_line(json{{"program_id", request.program_id},
                               {"response_id", request.response_id},
                               {"response_text", request.response_text}});
}

WireRequest decode_request_line(std::string_view line) {
    auto j = parse_object(line, "request");
    try {
        return WireRequest{j.at("program_id").get<std::string>(), j.at("response_id").get<std::string>(),
                           j.at("response_text").get<std::string>()};
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("request: ") + e.what());
    }
}

std::string encode_verdict_line(const WireVerdict& v) {
    return canonical_line(json{{"response_id", v.response_id},
                               {"status", std::string(to_string(v.verdict.status))},
                               {"detail", v.verdict.detail ? json(*v.verdict.detail) : json(nullptr)},
                               {"wall_ms", json_number(v.verdict.wall_ms, "wall_ms")}});
}

WireVerdict decode_verdict_line(std::string_view line) {
    auto j = parse_object(line, "verdict");
    try {
        WireVerdict v;
        v.response_id = j.at("response_id").get<std::string>();
        v.verdict.status = verdict_status_from_string(j.at("status").get<std::string>());
        const auto& detail = j.value("detail", json(nullptr));
        if (!detail.is_null()) v.verdict.detail = detail.get<std::string>();
        v.verdict.wall_ms = j.value("wall_ms", 0.0);
        return v;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("verdict: ") + e.what());
    }
}

std::vector<std::optional<SandboxVerdict>> NullExecutor::execute(const ProgramSpec&,
                                                                 std::span<const std::string> responses,
                                                                 const SandboxLimits&) {
    return std::vector<std::optional<SandboxVerdict>>(responses.size());
}

SubprocessExecutor::SubprocessExecutor(std::vector<std::string> argv, int grace_ms)
    : argv_(std::move(argv)), grace_ms_(grace_ms) {
    if (argv_.empty()) throw std::invalid_argument("sandbox command is empty");
    resolved_ = resolve_executable(argv_.front());
    static std::once_flag sigpipe_once;
    std::call_once(sigpipe_once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

std::vector<std::optional<SandboxVerdict>> SubprocessExecutor::execute(
    const ProgramSpec& program, std::span<const std::string> responses, const SandboxLimits& limits) {
    std::vector<std::optional<SandboxVerdict>> out(responses.size());
    const auto budget = std::chrono::milliseconds(limits.timeout_ms + grace_ms_);

    std::size_t next = 0;
    while (next < responses.size()) {
        Child child(resolved_, argv_, limits.memory_mb);
        if (!child.write_all(encode_preamble(program, limits), Clock::now() + budget)) {
            out[next] = SandboxVerdict{VerdictStatus::error, child.exit_detail(), 0.0};
            ++next;
            continue;
        }
        bool restart = false;
        for (; next < responses.size() && !restart; ++next) {
            const std::string response_id = std::to_string(next);
            const auto start = Clock::now();
            const auto deadline = start + budget;
            WireRequest req{program.program_id, response_id, responses[next]};
            std::string line;
            auto status = child.write_all(encode_request_line(req), deadline)
                              ? child.read_line(line, deadline)
                              : Child::ReadStatus::eof;
            if (status == Child::ReadStatus::timeout) {
                child.kill();
                out[next] = SandboxVerdict{VerdictStatus::timeout,
                                           "no verdict within " + std::to_string(budget.count()) + " ms",
                                           ms_since(start)};
                restart = true;
            } else if (status == Child::ReadStatus::eof) {
                out[next] = SandboxVerdict{VerdictStatus::error, child.exit_detail(), ms_since(start)};
                restart = true;
            } else {
                try {
                    auto v = decode_verdict_line(line);
                    if (v.response_id != response_id) {
                        throw std::invalid_argument("reply for response " + v.response_id +
                                                    ", expected " + response_id);
                    }
                    if (v.verdict.detail) v.verdict.detail = truncate_detail(*v.verdict.detail);
                    out[next] = std::move(v.verdict);
                } catch (const std::invalid_argument& e) {
                    out[next] = SandboxVerdict{VerdictStatus::error,
                                               truncate_detail(std::string("protocol error: ") + e.what()),
                                               ms_since(start)};
                    restart = true;
                }
            }
        }
        if (!restart) child.finish(Clock::now() + std::chrono::milliseconds(grace_ms_));
    }
    return out;
}

}  // namespace checklist_forge
