// checklist-forge: run the checklist-feedback pipeline stage by stage.
//
//   checklist-forge <stage> --config run.json [--record store.jsonl | --replay store.jsonl] [--force]
//
// Exit codes: 0 ok, 1 other error, 2 invalid config, 3 missing upstream
// input, 4 replay miss.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "checklist_forge/config.hpp"
#include "checklist_forge/gateway.hpp"
#include "checklist_forge/http_backend.hpp"
#include "checklist_forge/pipeline.hpp"
#include "checklist_forge/sandbox_client.hpp"
#include "checklist_forge/sim_teacher.hpp"

namespace cf = checklist_forge;

namespace {

enum Exit { kOk = 0, kOther = 1, kBadConfig = 2, kUpstream = 3, kReplayMiss = 4 };

std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v ? v : "";
}

std::shared_ptr<cf::TeacherBackend> make_backend(const cf::PipelineConfig& config) {
    const std::string endpoint = env_or_empty(cf::kEndpointEnvVar);
    if (endpoint.empty()) return nullptr;
    if (endpoint == "sim://") return std::make_shared<cf::SimulatedTeacher>(config.seed);
    return std::make_shared<cf::HttpChatBackend>(endpoint, env_or_empty(cf::kApiKeyEnvVar),
                                                 config.endpoint_supports_n);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Checklist-based preference data pipeline"};
    std::string stage_name, config_path, record_path, replay_path;
    bool force = false;
    app.add_option("stage", stage_name,
                   "ingest | checklists | verifiers | responses | score | mine | eval-checklists | all")
        ->required();
    app.add_option("--config", config_path, "pipeline config (JSON)")->required();
    auto* record = app.add_option("--record", record_path, "serve hits from and append misses to this transcript store");
    auto* replay = app.add_option("--replay", replay_path, "answer only from this transcript store");
    record->excludes(replay);
    app.add_flag("--force", force, "rerun stages already complete under this config");
    CLI11_PARSE(app, argc, argv);

    cf::Stage stage;
    try {
        stage = cf::stage_from_string(stage_name);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kOther;
    }

    cf::LoadedConfig loaded;
    try {
        loaded = cf::load_config(config_path);
    } catch (const cf::ConfigError& e) {
        std::cerr << "invalid config " << config_path << ":\n";
        for (const auto& f : e.field_errors()) std::cerr << "  " << f << "\n";
        return kBadConfig;
    }

    try {
        cf::GatewayOptions options;
        options.max_concurrency = loaded.config.concurrency;
        std::shared_ptr<cf::Gateway> gateway;
        const bool needs_teacher = stage != cf::Stage::ingest;
        if (!replay_path.empty()) {
            gateway = std::make_shared<cf::Gateway>(nullptr, std::make_shared<cf::ReplayStore>(replay_path),
                                                    cf::GatewayMode::replay, options);
        } else if (needs_teacher) {
            auto backend = make_backend(loaded.config);
            if (!backend) {
                std::cerr << "error: set " << cf::kEndpointEnvVar << " (or \"sim://\"), or pass --replay\n";
                return kOther;
            }
            if (!record_path.empty()) {
                gateway = std::make_shared<cf::Gateway>(backend, std::make_shared<cf::ReplayStore>(record_path),
                                                        cf::GatewayMode::record, options);
            } else {
                gateway = std::make_shared<cf::Gateway>(backend, nullptr, cf::GatewayMode::live, options);
            }
        }

        std::shared_ptr<cf::VerifierExecutor> executor;
        if (!loaded.config.sandbox_command.empty()) {
            executor = std::make_shared<cf::SubprocessExecutor>(loaded.config.sandbox_command);
        } else {
            executor = std::make_shared<cf::NullExecutor>();
        }

        cf::Pipeline pipeline(loaded, gateway, executor, &std::cerr);
        std::size_t warnings = 0, failures = 0;
        for (const auto& report : pipeline.run(stage, force)) {
            warnings += report.warnings;
            failures += report.failures;
        }
        if (gateway) {
            const auto m = gateway->metrics();
            std::cerr << "teacher: requests=" << m.requests << " completions=" << m.completions_requested
                      << " upstream_calls=" << m.upstream_calls << " replay_hits=" << m.replay_hits
                      << " failures=" << m.failures << "\n";
        }
        std::cerr << "done: warnings=" << warnings << " failures=" << failures << " (see "
                  << (pipeline.out_dir() / "diagnostics").string() << ")\n";
        return kOk;
    } catch (const cf::ReplayMiss& e) {
        std::cerr << "replay miss: " << e.what() << "\n";
        return kReplayMiss;
    } catch (const cf::UpstreamMissing& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUpstream;
    } catch (const cf::ConfigError& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return kBadConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kOther;
    }
}
