// Stand-in for the sandbox child, speaking the wire protocol without running
// any program. Behaviour is keyed off each response text:
//   contains "yes"   -> pass
//   contains "hang"  -> never answers (exercises the parent's timeout)
//   contains "crash" -> writes to stderr and exits 3 mid-batch
//   contains "boom"  -> error verdict with a detail
//   otherwise        -> fail
// The program source must be non-empty; an empty one is a protocol error.

#include <chrono>
#include <iostream>
#include <string>
#include <thread>

#include "checklist_forge/sandbox_client.hpp"

namespace cf = checklist_forge;

int main() {
    std::string header_line;
    if (!std::getline(std::cin, header_line)) return 2;
    cf::PreambleHeader header;
    try {
        header = cf::decode_preamble_header(header_line);
    } catch (const std::exception& e) {
        std::cerr << "bad preamble: " << e.what() << "\n";
        return 2;
    }
    std::string source(header.length, '\0');
    std::cin.read(source.data(), static_cast<std::streamsize>(header.length));
    if (!std::cin || source.empty()) {
        std::cerr << "short program body\n";
        return 2;
    }

    std::string line;
    while (std::getline(std::cin, line)) {
        const auto request = cf::decode_request_line(line);
        cf::WireVerdict out;
        out.response_id = request.response_id;
        out.verdict.wall_ms = 1.0;
        const auto& text = request.response_text;
        if (text.find("hang") != std::string::npos) {
            std::this_thread::sleep_for(std::chrono::hours(1));
        } else if (text.find("crash") != std::string::npos) {
            std::cerr << "fake child crashed on purpose\n";
            return 3;
        } else if (text.find("boom") != std::string::npos) {
            out.verdict.status = cf::VerdictStatus::error;
            out.verdict.detail = "ZeroDivisionError: division by zero";
        } else if (text.find("yes") != std::string::npos) {
            out.verdict.status = cf::VerdictStatus::pass;
        } else {
            out.verdict.status = cf::VerdictStatus::fail;
        }
        std::cout << cf::encode_verdict_line(out) << std::flush;
    }
    return 0;
}
