#include "checklist_forge/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "checklist_forge/checklist_eval.hpp"
#include "checklist_forge/checklist_gen.hpp"
#include "checklist_forge/pair_miner.hpp"
#include "checklist_forge/parallel.hpp"
#include "checklist_forge/prompts.hpp"
#include "checklist_forge/scoring.hpp"
#include "checklist_forge/serialize.hpp"
#include "checklist_forge/text_util.hpp"
#include "checklist_forge/verifier_gen.hpp"

namespace checklist_forge {

namespace fs = std::filesystem;

std::string_view to_string(Stage stage) {
    switch (stage) {
        case Stage::ingest: return "ingest";
        case Stage::checklists: return "checklists";
        case Stage::verifiers: return "verifiers";
        case Stage::responses: return "responses";
        case Stage::score: return "score";
        case Stage::mine: return "mine";
        case Stage::eval_checklists: return "eval-checklists";
        case Stage::all: return "all";
    }
    return "all";
}

Stage stage_from_string(std::string_view s) {
    for (Stage st : {Stage::ingest, Stage::checklists, Stage::verifiers, Stage::responses, Stage::score,
                     Stage::mine, Stage::eval_checklists, Stage::all}) {
        if (to_string(st) == s) return st;
    }
    throw std::invalid_argument("unknown stage '" + std::string(s) + "'");
}

const std::vector<Stage>& pipeline_order() {
    static const std::vector<Stage> kOrder = {Stage::ingest,    Stage::checklists, Stage::verifiers,
                                              Stage::responses, Stage::score,      Stage::mine};
    return kOrder;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("failed to write " + tmp.string());
    }
    fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Ingestion

std::vector<IngestFilter> default_ingest_filters(const IngestFilters& config) {
    std::vector<IngestFilter> filters;
    if (config.language) {
        const std::string want = to_lower_ascii(*config.language);
        filters.push_back([want](const RawRecord& r, std::string& reason) {
            if (r.language && to_lower_ascii(*r.language) != want) {
                reason = "language";
                return false;
            }
            return true;
        });
    }
    const int max_turns = config.max_turns;
    filters.push_back([max_turns](const RawRecord& r, std::string& reason) {
        if (r.turn_count > max_turns) {
            reason = "turns";
            return false;
        }
        return true;
    });
    if (config.drop_toxic) {
        filters.push_back([](const RawRecord& r, std::string& reason) {
            if (r.toxic) {
                reason = "toxic";
                return false;
            }
            return true;
        });
    }
    return filters;
}

namespace {

std::optional<RawRecord> parse_raw(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception&) {
        return std::nullopt;
    }
    if (!j.is_object() || !j.contains("id")) return std::nullopt;
    RawRecord r;
    try {
        r.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
        if (j.contains("conversation")) {
            int user_turns = 0;
            for (const auto& turn : j.at("conversation")) {
                if (turn.at("role").get<std::string>() != "user") continue;
                if (user_turns == 0) r.text = turn.at("content").get<std::string>();
                ++user_turns;
            }
            r.turn_count = user_turns;
        } else {
            r.text = j.at("text").get<std::string>();
            r.turn_count = j.value("turn_count", 1);
        }
        r.source = j.value("source", std::string{});
        if (j.contains("language") && j.at("language").is_string()) r.language = j.at("language").get<std::string>();
        r.toxic = j.value("toxic", false);
    } catch (const json::exception&) {
        return std::nullopt;
    }
    if (r.id.empty() || trim(r.text).empty() || r.turn_count < 1) return std::nullopt;
    return r;
}

}  // namespace

IngestResult ingest(std::istream& corpus, const std::vector<IngestFilter>& filters) {
    IngestResult out;
    auto& c = out.counts;
    for (const char* k : {"lines", "malformed", "duplicates", "kept"}) c[k] = 0;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(corpus, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        ++c["lines"];
        auto rec = parse_raw(line);
        if (!rec) {
            ++c["malformed"];
            continue;
        }
        bool keep = true;
        for (const auto& f : filters) {
            std::string reason;
            if (!f(*rec, reason)) {
                ++c["filtered_" + reason];
                keep = false;
                break;
            }
        }
        if (!keep) continue;
        if (!seen.insert(rec->id).second) {
            ++c["duplicates"];
            out.warnings.push_back("line " + std::to_string(lineno) + ": duplicate instruction id '" + rec->id +
                                   "' dropped");
            continue;
        }
        out.instructions.push_back(Instruction{rec->id, rec->text, rec->source, rec->turn_count});
    }
    if (c["lines"] == 0) out.warnings.push_back("empty corpus");
    std::sort(out.instructions.begin(), out.instructions.end(),
              [](const Instruction& a, const Instruction& b) { return a.id < b.id; });
    c["kept"] = out.instructions.size();
    return out;
}

// ---------------------------------------------------------------------------
// Stage implementations

namespace {

struct Diagnostic {
    std::string instruction_id;
    std::string level;  // "warning" or "failure"
    std::string message;

    bool operator<(const Diagnostic& o) const {
        return std::tie(instruction_id, level, message) < std::tie(o.instruction_id, o.level, o.message);
    }
};

struct StageOutput {
    std::map<std::string, std::size_t> counts;
    std::vector<Diagnostic> diagnostics;
    json extra = json::object();  // stage-specific manifest fields
};

template <class T>
std::vector<T> read_records(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UpstreamMissing("missing stage file " + path.string());
    std::vector<T> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(deserialize<T>(line));
        } catch (const SerializationError& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

template <class T>
std::string join_lines(const std::vector<T>& records) {
    std::string out;
    for (const auto& r : records) out += canonical_serialize(r);
    return out;
}

void add_warnings(std::vector<Diagnostic>& diags, const std::string& id, const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) diags.push_back({id, "warning", w});
}

std::vector<std::string> stage_inputs(Stage stage) {
    using namespace stage_files;
    switch (stage) {
        case Stage::ingest: return {};
        case Stage::checklists: return {instructions};
        case Stage::verifiers: return {instructions, checklists};
        case Stage::responses: return {instructions, checklists};
        case Stage::score: return {instructions, checklists, responses};
        case Stage::mine: return {instructions, checklists, responses, scores};
        case Stage::eval_checklists: return {instructions};
        case Stage::all: return {};
    }
    return {};
}

std::vector<std::string> stage_outputs(Stage stage, const PipelineConfig& config) {
    using namespace stage_files;
    switch (stage) {
        case Stage::ingest: return {instructions};
        case Stage::checklists:
            if (config.checklist_method == ChecklistMethod::candidate_based) return {checklists, candidates};
            return {checklists};
        case Stage::verifiers: return {checklists};
        case Stage::responses: return {responses};
        case Stage::score: return {scores};
        case Stage::mine: return {pairs, preferences, mine_summary};
        case Stage::eval_checklists: return {eval_checklists, eval_report, eval_table};
        case Stage::all: return {};
    }
    return {};
}

class StageRunner {
public:
    StageRunner(const LoadedConfig& loaded, Gateway* gateway, VerifierExecutor* executor)
        : loaded_(loaded), cfg_(loaded.config), gateway_(gateway), executor_(executor) {}

    fs::path out(const char* name) const { return loaded_.resolve(cfg_.output_dir) / name; }

    Gateway& gateway() const {
        if (!gateway_) throw std::logic_error("stage requires a teacher gateway");
        return *gateway_;
    }

    StageOutput run(Stage stage) {
        switch (stage) {
            case Stage::ingest: return run_ingest();
            case Stage::checklists: return run_checklists();
            case Stage::verifiers: return run_verifiers();
            case Stage::responses: return run_responses();
            case Stage::score: return run_score();
            case Stage::mine: return run_mine();
            case Stage::eval_checklists: return run_eval();
            case Stage::all: break;
        }
        throw std::logic_error("run(all) must be expanded by the caller");
    }

private:
    StageOutput run_ingest() {
        const fs::path corpus = loaded_.resolve(cfg_.corpus_path);
        std::ifstream in(corpus);
        if (!in) throw UpstreamMissing("cannot read corpus " + corpus.string());
        auto result = ingest(in, default_ingest_filters(cfg_.ingest));
        write_file_atomic(out(stage_files::instructions), join_lines(result.instructions));
        StageOutput o;
        o.counts = result.counts;
        add_warnings(o.diagnostics, "", result.warnings);
        return o;
    }

    StageOutput run_checklists() {
        auto instructions = read_records<Instruction>(out(stage_files::instructions));
        ChecklistGenerator gen(gateway(), cfg_);
        const bool candidate_based = cfg_.checklist_method == ChecklistMethod::candidate_based;

        std::vector<std::optional<Checklist>> results(instructions.size());
        std::vector<std::optional<CandidateSet>> candidate_sets(instructions.size());
        std::vector<std::vector<Diagnostic>> diags(instructions.size());
        parallel_for(instructions.size(), cfg_.concurrency, [&](std::size_t i) {
            const auto& inst = instructions[i];
            Outcome<Checklist> outcome;
            if (candidate_based) {
                auto cands = gen.generate_candidates(inst);
                add_warnings(diags[i], inst.id, cands.warnings);
                if (!cands.ok()) {
                    diags[i].push_back({inst.id, "failure", cands.failure});
                    return;
                }
                candidate_sets[i] = cands.value;
                outcome = gen.generate_candidate_based(inst, *cands.value);
            } else {
                outcome = gen.generate_direct(inst);
            }
            add_warnings(diags[i], inst.id, outcome.warnings);
            if (!outcome.ok()) {
                diags[i].push_back({inst.id, "failure", outcome.failure});
                return;
            }
            results[i] = std::move(outcome.value);
        });

        StageOutput o;
        std::string checklist_lines, candidate_lines;
        std::size_t ok = 0, items = 0;
        for (std::size_t i = 0; i < instructions.size(); ++i) {
            for (auto& d : diags[i]) o.diagnostics.push_back(std::move(d));
            if (candidate_sets[i]) {
                json cands = json::array();
                for (const auto& c : candidate_sets[i]->candidates) cands.push_back({{"model", c.model}, {"text", c.text}});
                candidate_lines += canonical_line({{"instruction_id", candidate_sets[i]->instruction_id},
                                                   {"candidates", std::move(cands)}});
            }
            if (!results[i]) continue;
            ++ok;
            items += results[i]->requirements.size();
            checklist_lines += canonical_serialize(*results[i]);
        }
        write_file_atomic(out(stage_files::checklists), checklist_lines);
        if (candidate_based) write_file_atomic(out(stage_files::candidates), candidate_lines);
        o.counts = {{"instructions", instructions.size()}, {"checklists", ok},
                    {"skipped", instructions.size() - ok}, {"requirements", items}};
        o.extra["checklist_method"] = std::string(to_string(cfg_.checklist_method));
        return o;
    }

    StageOutput run_verifiers() {
        auto instructions = index_by_id(read_records<Instruction>(out(stage_files::instructions)));
        auto checklists = read_records<Checklist>(out(stage_files::checklists));
        VerifierGenerator gen(gateway(), cfg_);

        struct Task {
            std::size_t checklist;
            std::size_t requirement;
        };
        std::vector<Task> tasks;
        for (std::size_t c = 0; c < checklists.size(); ++c) {
            if (!instructions.count(checklists[c].instruction_id)) {
                throw UpstreamMissing("checklist references unknown instruction " + checklists[c].instruction_id);
            }
            for (std::size_t r = 0; r < checklists[c].requirements.size(); ++r) {
                if (checklists[c].requirements[r].kind == RequirementKind::generated) tasks.push_back({c, r});
            }
        }
        std::vector<VerifierResult> results(tasks.size());
        parallel_for(tasks.size(), cfg_.concurrency, [&](std::size_t t) {
            const auto& cl = checklists[tasks[t].checklist];
            results[t] = gen.generate_verifier(instructions.at(cl.instruction_id), cl.requirements[tasks[t].requirement]);
        });

        StageOutput o;
        VerifierBatchStats stats;
        for (std::size_t t = 0; t < tasks.size(); ++t) {
            auto& req = checklists[tasks[t].checklist].requirements[tasks[t].requirement];
            req.verifier_source = results[t].source;
            tally(stats, results[t]);
            add_warnings(o.diagnostics, checklists[tasks[t].checklist].instruction_id, results[t].warnings);
        }
        write_file_atomic(out(stage_files::checklists), join_lines(checklists));
        o.counts = {{"requirements", stats.requirements}, {"with_program", stats.with_program},
                    {"deferred", stats.deferred},         {"screened_out", stats.screened_out},
                    {"malformed", stats.malformed},       {"teacher_failures", stats.failures}};
        o.extra["program_fraction"] = json_number(stats.program_fraction(), "program_fraction");
        return o;
    }

    StageOutput run_responses() {
        auto instructions = read_records<Instruction>(out(stage_files::instructions));
        std::set<std::string> with_checklist;
        for (const auto& c : read_records<Checklist>(out(stage_files::checklists))) with_checklist.insert(c.instruction_id);

        std::vector<const Instruction*> todo;
        for (const auto& inst : instructions) {
            if (with_checklist.count(inst.id)) todo.push_back(&inst);
        }
        std::vector<std::vector<Response>> results(todo.size());
        std::vector<std::string> failures(todo.size());
        parallel_for(todo.size(), cfg_.concurrency, [&](std::size_t i) {
            TeacherRequest req;
            req.model = cfg_.policy_model;
            req.messages = {{"user", todo[i]->text}};
            req.temperature = cfg_.response_temperature;
            req.top_p = cfg_.response_top_p;
            req.n = 2;
            req.max_tokens = cfg_.response_max_tokens;
            req.seed = cfg_.seed;
            try {
                auto completions = gateway().complete(req);
                const SamplerParams sampler{cfg_.response_temperature, cfg_.response_top_p};
                results[i].push_back(Response{todo[i]->id, Slot::A, completions[0], sampler});
                results[i].push_back(Response{todo[i]->id, Slot::B, completions[1], sampler});
            } catch (const EndpointFailure& e) {
                failures[i] = std::string("response sampling failed: ") + e.what();
            }
        });

        StageOutput o;
        std::string lines;
        std::size_t ok = 0;
        for (std::size_t i = 0; i < todo.size(); ++i) {
            if (!failures[i].empty()) o.diagnostics.push_back({todo[i]->id, "failure", failures[i]});
            if (results[i].empty()) continue;
            ++ok;
            for (const auto& r : results[i]) lines += canonical_serialize(r);
        }
        write_file_atomic(out(stage_files::responses), lines);
        o.counts = {{"instructions", todo.size()}, {"response_pairs", ok}, {"failed", todo.size() - ok}};
        return o;
    }

    StageOutput run_score() {
        auto instructions = index_by_id(read_records<Instruction>(out(stage_files::instructions)));
        auto checklists = read_records<Checklist>(out(stage_files::checklists));
        auto responses = index_responses(read_records<Response>(out(stage_files::responses)));
        Scorer scorer(gateway(), cfg_);
        const SandboxLimits limits{cfg_.sandbox_timeout_ms, cfg_.sandbox_memory_limit_mb};

        StageOutput o;
        std::vector<const Checklist*> scorable;
        for (const auto& cl : checklists) {
            auto it = responses.find(cl.instruction_id);
            if (!instructions.count(cl.instruction_id) || it == responses.end() || it->second.size() != 2) {
                o.diagnostics.push_back({cl.instruction_id, "failure", "missing instruction or response pair"});
                continue;
            }
            scorable.push_back(&cl);
        }

        struct Cell {
            std::size_t checklist;
            Slot slot;
            std::size_t requirement;
        };
        std::vector<Cell> cells;
        std::vector<std::pair<std::size_t, std::size_t>> programs;  // (checklist, requirement)
        for (std::size_t c = 0; c < scorable.size(); ++c) {
            for (std::size_t r = 0; r < scorable[c]->requirements.size(); ++r) {
                cells.push_back({c, Slot::A, r});
                cells.push_back({c, Slot::B, r});
                if (scorable[c]->requirements[r].verifier_source) programs.emplace_back(c, r);
            }
        }

        const auto before = gateway().metrics();
        std::vector<ScoreCell> judged(cells.size());
        parallel_for(cells.size(), cfg_.concurrency, [&](std::size_t i) {
            const auto& cl = *scorable[cells[i].checklist];
            judged[i] = scorer.judge_item(instructions.at(cl.instruction_id),
                                          responses.at(cl.instruction_id).at(cells[i].slot),
                                          cl.requirements[cells[i].requirement], cfg_.judge_sample_count);
        });
        const auto after = gateway().metrics();

        std::map<std::pair<std::size_t, std::size_t>, std::vector<std::optional<SandboxVerdict>>> verdicts;
        std::vector<std::vector<std::optional<SandboxVerdict>>> program_out(programs.size());
        std::vector<std::string> program_errors(programs.size());
        parallel_for(programs.size(), cfg_.concurrency, [&](std::size_t p) {
            const auto& cl = *scorable[programs[p].first];
            const auto& req = cl.requirements[programs[p].second];
            const auto& rs = responses.at(cl.instruction_id);
            const std::vector<std::string> texts = {rs.at(Slot::A).text, rs.at(Slot::B).text};
            try {
                program_out[p] = executor_->execute(make_program_spec(*req.verifier_source), texts, limits);
            } catch (const std::invalid_argument& e) {
                program_errors[p] = e.what();
                program_out[p].assign(2, std::nullopt);
            }
        });
        for (std::size_t p = 0; p < programs.size(); ++p) {
            if (!program_errors[p].empty()) {
                o.diagnostics.push_back({scorable[programs[p].first]->instruction_id, "warning",
                                         "req " + std::to_string(programs[p].second) + ": " + program_errors[p]});
            }
            verdicts[programs[p]] = std::move(program_out[p]);
        }

        std::map<std::string, std::size_t> program_counts = {{"pass", 0}, {"fail", 0}, {"error", 0}, {"absent", 0}};
        std::size_t missing_cells = 0;
        std::string lines;
        std::size_t ci = 0;
        for (std::size_t c = 0; c < scorable.size(); ++c) {
            const auto& cl = *scorable[c];
            std::vector<ScoreCell> a, b;
            for (std::size_t r = 0; r < cl.requirements.size(); ++r) {
                for (Slot slot : {Slot::A, Slot::B}) {
                    std::optional<SandboxVerdict> verdict;
                    auto v = verdicts.find({c, r});
                    if (v != verdicts.end()) verdict = v->second[slot == Slot::A ? 0 : 1];
                    ScoreCell cell = fuse(std::move(judged[ci++]), verdict);
                    ++program_counts[std::string(to_string(cell.program_result))];
                    if (!cell.combined) ++missing_cells;
                    (slot == Slot::A ? a : b).push_back(std::move(cell));
                }
            }
            lines += canonical_serialize(assemble_matrix(cl, std::move(a), std::move(b)));
        }
        write_file_atomic(out(stage_files::scores), lines);

        o.counts = {{"score_matrices", scorable.size()},
                    {"cells", cells.size()},
                    {"missing_cells", missing_cells},
                    {"judge_requests", after.requests - before.requests},
                    {"judge_samples_requested", after.completions_requested - before.completions_requested},
                    {"programs_run", programs.size()}};
        for (const auto& [k, v] : program_counts) o.counts["program_" + k] = v;
        o.extra["judge_sample_count"] = cfg_.judge_sample_count;
        return o;
    }

    StageOutput run_mine() {
        auto matrices = read_records<ScoreMatrix>(out(stage_files::scores));
        ExportInputs inputs;
        inputs.instructions = index_by_id(read_records<Instruction>(out(stage_files::instructions)));
        inputs.responses = index_responses(read_records<Response>(out(stage_files::responses)));
        for (auto& cl : read_records<Checklist>(out(stage_files::checklists))) {
            auto id = cl.instruction_id;
            inputs.checklists.emplace(std::move(id), std::move(cl));
        }

        StageOutput o;
        MiningDiagnostics diag;
        diag.matrices = matrices.size();
        std::vector<PreferencePair> formed;
        for (const auto& m : matrices) {
            auto outcome = form_pair(m);
            if (!outcome.pair) {
                ++diag.dropped[outcome.reason];
                o.diagnostics.push_back({m.instruction_id, "warning",
                                         "no preference pair: " + std::string(to_string(outcome.reason))});
                continue;
            }
            formed.push_back(*outcome.pair);
        }
        auto ranked = filter_pairs(formed, cfg_.filter_strategy, cfg_.retention_fraction);

        auto by_id = ranked;
        std::sort(by_id.begin(), by_id.end(),
                  [](const PreferencePair& a, const PreferencePair& b) { return a.instruction_id < b.instruction_id; });
        std::string prefs;
        try {
            prefs = export_preferences(ranked, inputs);
        } catch (const ExportError& e) {
            throw UpstreamMissing(std::string("export aborted: ") + e.what());
        }
        write_file_atomic(out(stage_files::pairs), join_lines(by_id));
        write_file_atomic(out(stage_files::preferences), prefs);
        auto summary = mining_summary(ranked, cfg_.filter_strategy, cfg_.retention_fraction, diag);
        write_file_atomic(out(stage_files::mine_summary), summary.dump(2) + "\n");

        std::size_t retained = 0;
        for (const auto& p : ranked) retained += p.retained ? 1 : 0;
        o.counts = {{"score_matrices", matrices.size()}, {"pairs_formed", formed.size()}, {"pairs_retained", retained}};
        return o;
    }

    StageOutput run_eval() {
        auto instructions = read_records<Instruction>(out(stage_files::instructions));
        ChecklistGenerator gen(gateway(), cfg_);
        ChecklistEvaluator eval(gateway(), cfg_);

        std::vector<std::optional<ChecklistEvalRow>> rows(instructions.size());
        std::vector<std::optional<std::pair<Checklist, Checklist>>> lists(instructions.size());
        std::vector<std::vector<Diagnostic>> diags(instructions.size());
        parallel_for(instructions.size(), cfg_.concurrency, [&](std::size_t i) {
            const auto& inst = instructions[i];
            auto direct = gen.generate(inst, ChecklistMethod::direct);
            auto cand = gen.generate(inst, ChecklistMethod::candidate_based);
            add_warnings(diags[i], inst.id, direct.warnings);
            add_warnings(diags[i], inst.id, cand.warnings);
            if (!direct.ok() || !cand.ok()) {
                diags[i].push_back({inst.id, "failure", "checklist generation failed: " +
                                                            (direct.ok() ? cand.failure : direct.failure)});
                return;
            }
            ChecklistEvalRow row;
            row.instruction_id = inst.id;
            row.direct = eval.score_checklist_quality(inst, *direct.value);
            row.candidate_based = eval.score_checklist_quality(inst, *cand.value);
            row.comparison = eval.compare_checklists(inst, *direct.value, *cand.value);
            rows[i] = std::move(row);
            lists[i] = std::make_pair(std::move(*direct.value), std::move(*cand.value));
        });

        StageOutput o;
        std::vector<ChecklistEvalRow> done;
        std::string lines;
        for (std::size_t i = 0; i < instructions.size(); ++i) {
            for (auto& d : diags[i]) o.diagnostics.push_back(std::move(d));
            if (!rows[i]) continue;
            done.push_back(*rows[i]);
            lines += canonical_line({{"instruction_id", instructions[i].id},
                                     {"direct", lists[i]->first},
                                     {"candidate_based", lists[i]->second}});
        }
        auto report = checklist_eval_report(done);
        report["position_debiasing"] = "swap";
        write_file_atomic(out(stage_files::eval_checklists), lines);
        write_file_atomic(out(stage_files::eval_report), report.dump(2) + "\n");
        write_file_atomic(out(stage_files::eval_table), format_eval_table(report));
        o.counts = {{"instructions", instructions.size()}, {"evaluated", done.size()}};
        return o;
    }

    static std::map<std::string, Instruction> index_by_id(std::vector<Instruction> v) {
        std::map<std::string, Instruction> m;
        for (auto& i : v) {
            auto id = i.id;
            m.emplace(std::move(id), std::move(i));
        }
        return m;
    }

    static std::map<std::string, std::map<Slot, Response>> index_responses(std::vector<Response> v) {
        std::map<std::string, std::map<Slot, Response>> m;
        for (auto& r : v) {
            auto id = r.instruction_id;
            auto slot = r.slot;
            m[id][slot] = std::move(r);
        }
        return m;
    }

    const LoadedConfig& loaded_;
    const PipelineConfig& cfg_;
    Gateway* gateway_;
    VerifierExecutor* executor_;
};

json read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) return json::object();
    try {
        return json::parse(in);
    } catch (const json::exception&) {
        return json::object();
    }
}

}  // namespace

// ---------------------------------------------------------------------------

Pipeline::Pipeline(LoadedConfig config, std::shared_ptr<Gateway> gateway,
                   std::shared_ptr<VerifierExecutor> executor, std::ostream* log)
    : loaded_(std::move(config)),
      gateway_(std::move(gateway)),
      executor_(executor ? std::move(executor) : std::make_shared<NullExecutor>()),
      log_(log),
      config_hash_(config_hash(loaded_.config)) {}

fs::path Pipeline::out_dir() const { return loaded_.resolve(loaded_.config.output_dir); }

std::vector<StageReport> Pipeline::run(Stage stage, bool force) {
    std::vector<StageReport> reports;
    if (stage == Stage::all) {
        for (Stage s : pipeline_order()) reports.push_back(run_one(s, force));
    } else {
        reports.push_back(run_one(stage, force));
    }
    return reports;
}

StageReport Pipeline::run_one(Stage stage, bool force) {
    const fs::path dir = out_dir();
    const fs::path manifest_path = dir / stage_files::manifest;
    json manifest = read_manifest(manifest_path);
    const std::string name(to_string(stage));

    StageReport report;
    report.stage = stage;

    auto outputs = stage_outputs(stage, loaded_.config);
    const bool outputs_present = std::all_of(outputs.begin(), outputs.end(),
                                             [&](const std::string& f) { return fs::exists(dir / f); });
    if (!force && outputs_present && manifest.contains("stages") && manifest["stages"].contains(name) &&
        manifest["stages"][name].value("config_hash", "") == config_hash_) {
        report.skipped = true;
        if (log_) *log_ << "[" << name << "] already complete for config " << config_hash_.substr(0, 12) << ", skipping\n";
        return report;
    }
    for (const auto& f : stage_inputs(stage)) {
        if (!fs::exists(dir / f)) {
            throw UpstreamMissing("stage '" + name + "' needs " + (dir / f).string() + "; run the upstream stage first");
        }
    }

    fs::create_directories(dir);
    StageRunner runner(loaded_, gateway_.get(), executor_.get());
    StageOutput result = runner.run(stage);

    std::sort(result.diagnostics.begin(), result.diagnostics.end());
    std::string diag_lines;
    for (const auto& d : result.diagnostics) {
        diag_lines += canonical_line({{"instruction_id", d.instruction_id}, {"level", d.level}, {"message", d.message}});
        (d.level == "failure" ? report.failures : report.warnings) += 1;
    }
    write_file_atomic(dir / "diagnostics" / (name + ".jsonl"), diag_lines);
    report.counts = result.counts;

    json stage_entry{{"config_hash", config_hash_},
                     {"records", result.counts},
                     {"warnings", report.warnings},
                     {"failures", report.failures}};
    for (auto& [k, v] : result.extra.items()) stage_entry[k] = v;
    manifest["config_hash"] = config_hash_;
    manifest["config"] = config_to_json(loaded_.config);
    manifest["prompt_templates"] = prompt_hashes();
    manifest["stages"][name] = std::move(stage_entry);
    // Fresh outputs invalidate everything downstream.
    const auto& order = pipeline_order();
    auto pos = std::find(order.begin(), order.end(), stage);
    if (pos != order.end()) {
        for (auto it = pos + 1; it != order.end(); ++it) manifest["stages"].erase(std::string(to_string(*it)));
        if (stage == Stage::ingest) manifest["stages"].erase(std::string(to_string(Stage::eval_checklists)));
    }
    write_file_atomic(manifest_path, manifest.dump(2) + "\n");

    if (log_) {
        *log_ << "[" << name << "]";
        for (const auto& [k, v] : report.counts) *log_ << " " << k << "=" << v;
        *log_ << " warnings=" << report.warnings << " failures=" << report.failures << "\n";
    }
    return report;
}

}  // namespace checklist_forge
