#include "sqlsynth/cot/synth.hpp"

#include <cctype>
#include <sstream>

#include "sqlsynth/exec/vote.hpp"
#include "sqlsynth/query/synth.hpp"
#include "sqlsynth/util.hpp"

namespace sqlsynth::cot {

bool DataSample::operator==(const DataSample& other) const {
    return db_name == other.db_name && db_path == other.db_path &&
           question == other.question && external_knowledge == other.external_knowledge &&
           style == other.style && sql == other.sql && cot == other.cot &&
           complexity == other.complexity && provenance == other.provenance;
}

nlohmann::json DataSample::to_json() const {
    return nlohmann::json{{"db_name", db_name},
                          {"db_path", db_path},
                          {"question", question},
                          {"external_knowledge", external_knowledge},
                          {"style", style},
                          {"sql", sql},
                          {"cot", cot},
                          {"complexity", complexity},
                          {"provenance", provenance}};
}

DataSample DataSample::from_json(const nlohmann::json& j) {
    DataSample s;
    s.db_name = j.at("db_name").get<std::string>();
    s.db_path = j.at("db_path").get<std::string>();
    s.question = j.at("question").get<std::string>();
    s.external_knowledge = j.value("external_knowledge", std::string());
    s.style = j.at("style").get<std::string>();
    s.sql = j.at("sql").get<std::string>();
    s.cot = j.at("cot").get<std::string>();
    s.complexity = j.at("complexity").get<std::string>();
    s.provenance = j.value("provenance", nlohmann::json::object());
    return s;
}

std::vector<DataSample> load_data_samples(const std::filesystem::path& path) {
    std::vector<DataSample> rows;
    for (const auto& line : util::read_lines(path)) {
        if (util::trim(line).empty()) continue;
        rows.push_back(DataSample::from_json(nlohmann::json::parse(line)));
    }
    return rows;
}

void write_data_samples(const std::vector<DataSample>& rows,
                        const std::filesystem::path& path) {
    std::string body;
    for (const auto& row : rows) {
        body += row.to_json().dump();
        body += '\n';
    }
    util::write_file_atomic(path, body);
}

llm::ChatRequest build_cot_prompt(const schema::SchemaDef& schema,
                                  const question::StylizedQuestion& q,
                                  const std::string& sql) {
    question::validate_question(q);
    if (util::trim(sql).empty()) throw PreconditionError("cot prompt needs a SQL query");

    std::ostringstream body;
    body << "## Task Instruction\n"
         << "Write a step-by-step reasoning solution that derives the SQL query below "
            "from the natural language question. Start by analyzing the question to "
            "identify the key information required, determine the relevant tables, "
            "columns, and filtering criteria, then construct the query step by step, "
            "covering joins, filters, aggregations, groupings, and ordering as needed. "
            "Finish with the complete SQL query in a ```sql fenced block as the final "
            "answer.\n\n";

    body << "## Database Schema\n\n" << schema::ddl_of(schema, true) << "\n";

    body << "## Question and SQL Query\n\nQuestion: " << q.text << "\n";
    if (q.external_knowledge) body << "External knowledge: " << *q.external_knowledge << "\n";
    body << "\n```sql\n" << sql << "\n```\n";

    llm::ChatRequest request;
    request.messages = {
        {"system",
         "You are a meticulous SQL tutor who explains how to derive queries step by step."},
        {"user", body.str()}};
    return request;
}

std::optional<std::string> extract_final_sql(const std::string& cot_text) {
    return query::last_fenced_sql(cot_text);
}

CotResult majority_select(std::vector<CotCandidate>& candidates,
                          const std::filesystem::path& db_path, int64_t timeout_ms,
                          const std::string& original_fingerprint) {
    if (candidates.empty()) throw PreconditionError("vote needs at least one candidate");

    util::parallel_for(candidates.size(), 8, [&](size_t i) {
        auto& candidate = candidates[i];
        if (!candidate.extracted_sql) {
            candidate.exec = exec::ExecOutcome{};
            candidate.exec.status = exec::ExecStatus::Error;
            candidate.exec.error_text = "no final SQL block";
            candidate.exec.error_class = "no_final_sql";
            return;
        }
        candidate.exec = exec::execute(db_path, *candidate.extracted_sql, timeout_ms);
    });

    std::vector<exec::ExecOutcome> outcomes;
    outcomes.reserve(candidates.size());
    for (const auto& candidate : candidates) outcomes.push_back(candidate.exec);

    exec::VoteResult vote;
    try {
        vote = exec::majority_vote(outcomes);
    } catch (const EmptyTally&) {
        throw VoteFailed("every reasoning candidate failed extraction or execution");
    }

    CotResult result;
    result.chosen_index = vote.winner_index;
    result.chosen = candidates[vote.winner_index];
    result.final_sql = *result.chosen.extracted_sql;
    result.result_fingerprint = exec::fingerprint(result.chosen.exec);
    result.group_size = vote.group_size;
    result.valid_count = vote.valid_count;
    if (!original_fingerprint.empty())
        result.corrected = result.result_fingerprint != original_fingerprint;
    return result;
}

DataSample finalize_sample(const question::QuestionedSample& qs,
                           const std::filesystem::path& db_path,
                           const CotResult& vote, int64_t timeout_ms) {
    if (extract_final_sql(vote.chosen.cot_text) !=
        std::optional<std::string>(vote.final_sql)) {
        throw InvariantError("voted SQL is not the final block of its reasoning trace");
    }

    auto outcome = exec::execute(db_path, vote.final_sql, timeout_ms);
    if (!outcome.ok()) {
        throw InvariantError("voted SQL no longer executes on " + db_path.string() + ": " +
                             outcome.error_text);
    }

    bool corrected = vote.corrected;
    if (!qs.sample.result_fingerprint.empty())
        corrected = exec::fingerprint(outcome) != qs.sample.result_fingerprint;

    DataSample sample;
    sample.db_name = qs.sample.db_name;
    sample.db_path = db_path.string();
    sample.question = qs.question.text;
    sample.external_knowledge = qs.question.external_knowledge.value_or("");
    sample.style = qs.question.style;
    sample.sql = vote.final_sql;
    sample.cot = vote.chosen.cot_text;
    sample.complexity = qs.sample.complexity;
    sample.provenance = {{"corrected", corrected},
                         {"group_size", vote.group_size},
                         {"valid_count", vote.valid_count}};
    if (corrected) sample.provenance["original_sql"] = qs.sample.sql_text;
    return sample;
}

std::optional<DataSample> generate_cot(const question::QuestionedSample& qs,
                                       const schema::SchemaDef& schema,
                                       const std::filesystem::path& db_path,
                                       llm::Gateway& gateway, const CotParams& params,
                                       CotStats* stats) {
    auto request = build_cot_prompt(schema, qs.question, qs.sample.sql_text);
    request.model_id = params.model_id;
    request.temperature = params.temperature;
    request.n_samples = params.n_candidates;
    request.max_output_tokens = params.max_output_tokens;

    auto response = gateway.complete(request);

    std::vector<CotCandidate> candidates;
    candidates.reserve(response.texts.size());
    for (const auto& text : response.texts) {
        CotCandidate candidate;
        candidate.cot_text = text;
        candidate.extracted_sql = extract_final_sql(text);
        candidates.push_back(std::move(candidate));
    }
    if (stats) {
        stats->n_candidates += candidates.size();
        for (const auto& candidate : candidates)
            if (!candidate.extracted_sql) ++stats->n_no_final_sql;
    }
    if (candidates.empty()) return std::nullopt;

    CotResult vote;
    try {
        vote = majority_select(candidates, db_path, params.exec_timeout_ms,
                               qs.sample.result_fingerprint);
    } catch (const VoteFailed&) {
        if (stats) {
            for (const auto& candidate : candidates)
                if (candidate.extracted_sql && !candidate.exec.ok()) ++stats->n_exec_failures;
        }
        return std::nullopt;
    }
    if (stats) {
        for (const auto& candidate : candidates)
            if (candidate.extracted_sql && !candidate.exec.ok()) ++stats->n_exec_failures;
    }
    return finalize_sample(qs, db_path, vote, params.exec_timeout_ms);
}

namespace {

// First standalone A/B letter in the judge's reply, or 0 when absent.
char parse_verdict(const std::string& text) {
    auto is_word = [](unsigned char c) { return std::isalnum(c) != 0; };
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c != 'A' && c != 'B') continue;
        bool left_ok = i == 0 || !is_word(static_cast<unsigned char>(text[i - 1]));
        bool right_ok = i + 1 == text.size() || !is_word(static_cast<unsigned char>(text[i + 1]));
        if (left_ok && right_ok) return c;
    }
    return 0;
}

}  // namespace

CorrectionAudit audit_corrections(const std::vector<CorrectionPair>& pairs,
                                  llm::Gateway& gateway, const std::string& model_id) {
    CorrectionAudit audit;
    for (const auto& pair : pairs) {
        std::ostringstream body;
        body << "Given a question and two candidate SQL queries, decide which query "
                "answers the question better.\n\n"
             << "Question: " << pair.question << "\n\n"
             << "Query A:\n```sql\n" << pair.original_sql << "\n```\n\n"
             << "Query B:\n```sql\n" << pair.final_sql << "\n```\n\n"
             << "Answer with a single letter: A or B.";

        llm::ChatRequest request;
        request.model_id = model_id;
        request.messages = {{"system", "You are a careful SQL reviewer."},
                            {"user", body.str()}};

        auto response = gateway.complete(request);
        char verdict = response.texts.empty() ? 0 : parse_verdict(response.texts.front());
        ++audit.n_audited;
        if (verdict == 'B')
            ++audit.n_prefer_final;
        else if (verdict != 'A')
            ++audit.n_unparsable;
    }
    return audit;
}

}  // namespace sqlsynth::cot
