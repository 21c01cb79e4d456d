#include "sqlsynth/question/synth.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "sqlsynth/analysis/tokenizer.hpp"
#include "sqlsynth/errors.hpp"
#include "sqlsynth/util.hpp"

namespace sqlsynth::question {

namespace {

constexpr std::array<const char*, 9> kStyleNames = {
    "Formal",  "Colloquial", "Imperative",   "Interrogative", "Descriptive",
    "Concise", "Vague",      "Metaphorical", "Conversational"};

using analysis::Token;
using analysis::TokenKind;

bool is_name(const Token& tok) {
    return tok.kind == TokenKind::Identifier || tok.kind == TokenKind::QuotedIdent;
}

std::string bare_name(const Token& tok) {
    if (tok.kind == TokenKind::Identifier) return util::to_lower(tok.text);
    std::string t = tok.text;
    if (t.size() >= 2) {
        char open = t.front();
        if (open == '"' || open == '`' || open == '[') t = t.substr(1, t.size() - 2);
    }
    return util::to_lower(t);
}

std::vector<size_t> match_parens(const std::vector<Token>& tokens) {
    std::vector<size_t> match(tokens.size(), std::string::npos);
    std::vector<size_t> stack;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].is("(")) {
            stack.push_back(i);
        } else if (tokens[i].is(")") && !stack.empty()) {
            match[stack.back()] = i;
            stack.pop_back();
        }
    }
    return match;
}

std::string quote_ident(const std::string& name) {
    std::string out = "\"";
    for (char c : name) {
        out += c;
        if (c == '"') out += '"';
    }
    return out + "\"";
}

// Collapses any internal whitespace runs to single spaces.
std::string normalize_line(const std::string& text) {
    return util::join(util::split_whitespace(text), " ");
}

}  // namespace

std::vector<StyleSpec> load_styles(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(util::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad style file " + path.string() + ": " + e.what());
    }
    if (!doc.is_array() || doc.size() != kStyleNames.size()) {
        throw ConfigError("style file must hold exactly nine styles: " + path.string());
    }
    std::vector<StyleSpec> styles;
    for (size_t i = 0; i < doc.size(); ++i) {
        StyleSpec style;
        style.name = doc[i].value("name", "");
        style.description = doc[i].value("description", "");
        style.example = doc[i].value("example", "");
        if (style.name != kStyleNames[i]) {
            throw ConfigError("style " + std::to_string(i) + " must be " +
                              std::string(kStyleNames[i]) + ", got " + style.name);
        }
        if (style.description.empty() || style.example.empty()) {
            throw ConfigError("style " + style.name + " missing description or example");
        }
        styles.push_back(std::move(style));
    }
    return styles;
}

bool style_needs_knowledge(const std::string& style_name) {
    return style_name == "Vague" || style_name == "Metaphorical";
}

bool style_is_dialogue(const std::string& style_name) {
    return style_name == "Conversational";
}

void validate_question(const StylizedQuestion& q) {
    bool known = std::any_of(kStyleNames.begin(), kStyleNames.end(),
                             [&](const char* name) { return q.style == name; });
    if (!known) throw InvariantError("unknown style: " + q.style);
    if (util::trim(q.text).empty()) throw InvariantError("question text is empty");
    if (style_needs_knowledge(q.style) != q.external_knowledge.has_value()) {
        throw InvariantError("external knowledge must be present exactly for vague and "
                             "metaphorical questions");
    }
    if (q.external_knowledge && util::trim(*q.external_knowledge).empty()) {
        throw InvariantError("external knowledge is empty");
    }
    if (style_is_dialogue(q.style) != !q.dialogue.empty()) {
        throw InvariantError("dialogue turns must be present exactly for conversational "
                             "questions");
    }
    if (!q.dialogue.empty()) {
        if (q.dialogue.size() < 2) throw InvariantError("dialogue needs at least two turns");
        bool has_user = false;
        for (const auto& turn : q.dialogue) {
            if (turn.speaker != "User" && turn.speaker != "Assistant") {
                throw InvariantError("dialogue speaker must be User or Assistant");
            }
            if (util::trim(turn.text).empty()) throw InvariantError("empty dialogue turn");
            has_user |= turn.speaker == "User";
        }
        if (!has_user) throw InvariantError("dialogue has no user turn");
    }
}

void to_json(nlohmann::json& j, const StylizedQuestion& q) {
    j = nlohmann::json{{"text", q.text}, {"style", q.style}};
    if (q.external_knowledge) j["external_knowledge"] = *q.external_knowledge;
    if (!q.dialogue.empty()) {
        auto turns = nlohmann::json::array();
        for (const auto& turn : q.dialogue) {
            turns.push_back({{"speaker", turn.speaker}, {"text", turn.text}});
        }
        j["dialogue"] = turns;
    }
}

void from_json(const nlohmann::json& j, StylizedQuestion& q) {
    q.text = j.at("text").get<std::string>();
    q.style = j.at("style").get<std::string>();
    q.external_knowledge.reset();
    if (j.contains("external_knowledge")) {
        q.external_knowledge = j["external_knowledge"].get<std::string>();
    }
    q.dialogue.clear();
    if (j.contains("dialogue")) {
        for (const auto& turn : j["dialogue"]) {
            q.dialogue.push_back({turn.at("speaker").get<std::string>(),
                                  turn.at("text").get<std::string>()});
        }
    }
}

std::vector<ColumnRef> referenced_columns(const std::string& sql,
                                          const schema::SchemaDef& schema) {
    auto tokens = analysis::tokenize(sql);
    while (!tokens.empty() && tokens.back().is(";")) tokens.pop_back();
    const size_t n = tokens.size();
    const auto match = match_parens(tokens);
    constexpr size_t npos = std::string::npos;

    std::unordered_map<std::string, size_t> table_index;
    std::vector<std::unordered_map<std::string, size_t>> columns_of(schema.tables.size());
    for (size_t t = 0; t < schema.tables.size(); ++t) {
        table_index[util::to_lower(schema.tables[t].name)] = t;
        for (size_t c = 0; c < schema.tables[t].columns.size(); ++c) {
            columns_of[t][util::to_lower(schema.tables[t].columns[c].name)] = c;
        }
    }

    std::vector<char> skip(n, 0);

    // CTE definitions: names and declared column lists are not column mentions.
    std::unordered_set<std::string> cte_names;
    for (size_t i = 0; i < n; ++i) {
        if (!tokens[i].is_keyword("WITH")) continue;
        size_t j = i + 1;
        if (j < n && tokens[j].is_keyword("RECURSIVE")) ++j;
        for (;;) {
            if (j >= n || !is_name(tokens[j])) break;
            cte_names.insert(bare_name(tokens[j]));
            skip[j] = 1;
            ++j;
            if (j < n && tokens[j].is("(")) {
                if (match[j] == npos) break;
                for (size_t k = j; k <= match[j]; ++k) skip[k] = 1;
                j = match[j] + 1;
            }
            if (j >= n || !tokens[j].is_keyword("AS")) break;
            ++j;
            if (j < n && tokens[j].is_keyword("MATERIALIZED")) ++j;
            if (j + 1 < n && tokens[j].is_keyword("NOT") &&
                tokens[j + 1].is_keyword("MATERIALIZED")) {
                j += 2;
            }
            if (j >= n || !tokens[j].is("(") || match[j] == npos) break;
            j = match[j] + 1;  // body tokens are scanned by the main pass
            if (j < n && tokens[j].is(",")) {
                ++j;
                continue;
            }
            break;
        }
    }

    // FROM/JOIN sources: base tables in scope plus the alias map.
    std::unordered_map<std::string, std::optional<size_t>> alias_to_table;
    std::set<size_t> source_tables;
    for (size_t i = 0; i < n; ++i) {
        if (!(tokens[i].is_keyword("FROM") || tokens[i].is_keyword("JOIN"))) continue;
        size_t j = i + 1;
        bool list_allowed = tokens[i].is_keyword("FROM");
        for (;;) {
            std::optional<size_t> source;
            if (j >= n) break;
            if (tokens[j].is("(")) {  // derived table or nested join
                if (match[j] == npos) break;
                j = match[j] + 1;
            } else if (is_name(tokens[j])) {
                if (j + 1 < n && tokens[j + 1].is("(")) {  // table-valued function
                    j = (match[j + 1] == npos) ? n : match[j + 1] + 1;
                } else {
                    std::string name = bare_name(tokens[j]);
                    skip[j] = 1;
                    if (!cte_names.count(name)) {
                        auto it = table_index.find(name);
                        if (it != table_index.end()) {
                            source = it->second;
                            source_tables.insert(it->second);
                        }
                    }
                    ++j;
                }
            } else {
                break;
            }
            if (j < n && tokens[j].is_keyword("AS")) ++j;
            if (j < n && is_name(tokens[j])) {
                alias_to_table[bare_name(tokens[j])] = source;
                skip[j] = 1;
                ++j;
            }
            if (list_allowed && j < n && tokens[j].is(",")) {
                ++j;
                continue;
            }
            break;
        }
    }

    // Output aliases (AS anywhere outside the source lists), CAST target
    // types, collation and window names: identifiers, but never columns.
    std::unordered_set<std::string> output_aliases;
    for (size_t i = 0; i + 1 < n; ++i) {
        bool alias_site = tokens[i].is_keyword("AS") || tokens[i].is_keyword("COLLATE") ||
                          tokens[i].is_keyword("WINDOW") || tokens[i].is_keyword("OVER");
        if (alias_site && is_name(tokens[i + 1]) && !skip[i + 1]) {
            output_aliases.insert(bare_name(tokens[i + 1]));
            skip[i + 1] = 1;
        }
    }

    std::set<std::pair<size_t, size_t>> found;
    auto add_table = [&](size_t t) {
        for (size_t c = 0; c < schema.tables[t].columns.size(); ++c) found.insert({t, c});
    };
    auto resolve_bare = [&](const std::string& name) -> std::optional<std::pair<size_t, size_t>> {
        for (size_t t : source_tables) {
            auto it = columns_of[t].find(name);
            if (it != columns_of[t].end()) return std::pair{t, it->second};
        }
        for (size_t t = 0; t < schema.tables.size(); ++t) {
            auto it = columns_of[t].find(name);
            if (it != columns_of[t].end()) return std::pair{t, it->second};
        }
        return std::nullopt;
    };
    auto table_of_qualifier = [&](const std::string& qual) -> std::optional<size_t> {
        auto ait = alias_to_table.find(qual);
        if (ait != alias_to_table.end()) return ait->second;
        auto tit = table_index.find(qual);
        if (tit != table_index.end()) return tit->second;
        return std::nullopt;
    };

    for (size_t i = 0; i < n; ++i) {
        const Token& tok = tokens[i];
        if (tok.is("*")) {
            if (i > 0 && (tokens[i - 1].is_keyword("SELECT") || tokens[i - 1].is(","))) {
                for (size_t t : source_tables) add_table(t);  // SELECT *
            } else if (i >= 2 && tokens[i - 1].is(".") && is_name(tokens[i - 2])) {
                if (auto t = table_of_qualifier(bare_name(tokens[i - 2]))) add_table(*t);
            }
            continue;
        }
        if (!is_name(tok) || skip[i]) continue;
        if (i + 1 < n && (tokens[i + 1].is("(") || tokens[i + 1].is("."))) continue;

        std::string name = bare_name(tok);
        if (i > 0 && tokens[i - 1].is(".")) {
            std::string qual = (i >= 2 && is_name(tokens[i - 2])) ? bare_name(tokens[i - 2]) : "";
            if (auto t = table_of_qualifier(qual)) {
                auto cit = columns_of[*t].find(name);
                if (cit == columns_of[*t].end()) {
                    throw ColumnResolutionError("no column " + tok.text + " in table " +
                                                schema.tables[*t].name);
                }
                found.insert({*t, cit->second});
                continue;
            }
            // unknown qualifier (subquery alias, CTE): fall through to bare rules
        }
        if (output_aliases.count(name) || cte_names.count(name) ||
            alias_to_table.count(name) || table_index.count(name)) {
            continue;
        }
        auto hit = resolve_bare(name);
        if (!hit) throw ColumnResolutionError("cannot resolve column mention: " + tok.text);
        found.insert(*hit);
    }

    std::vector<ColumnRef> refs;
    for (auto [t, c] : found) {
        refs.push_back({schema.tables[t].name, schema.tables[t].columns[c].name});
    }
    return refs;
}

llm::ChatRequest build_question_prompt(const query::SqlSample& sample,
                                       const schema::SchemaDef& schema,
                                       const StyleSpec& style) {
    auto refs = referenced_columns(sample.sql_text, schema);

    std::ostringstream body;
    body << "## Task Instruction\n\n"
         << "First generate an explanation of the provided SQL query: describe what it "
         << "computes in plain language. Then translate the query into a natural language "
         << "question in the requested style. The question must ask exactly for what the "
         << "query returns.\n\n";

    if (style_is_dialogue(style.name)) {
        body << "Respond in exactly this format:\n\n"
             << "[EXPLANATION]\n<what the query computes>\n"
             << "[DIALOGUE]\nUser: <opening request>\nAssistant: <clarifying reply>\n"
             << "User: <refined request>\n\n"
             << "The dialogue must contain at least two turns and end with the user's final "
             << "intent.\n\n";
    } else if (style_needs_knowledge(style.name)) {
        body << "Respond in exactly this format:\n\n"
             << "[EXPLANATION]\n<what the query computes>\n"
             << "[EXTERNAL KNOWLEDGE]\n<the literal meaning behind the indirect wording>\n"
             << "[QUESTION]\n<the question>\n\n"
             << "The external knowledge section is required: it must spell out how to read "
             << "the question literally.\n\n";
    } else {
        body << "Respond in exactly this format:\n\n"
             << "[EXPLANATION]\n<what the query computes>\n"
             << "[QUESTION]\n<the question>\n\n";
    }

    body << "## SQL Query\n\n```sql\n" << sample.sql_text << "\n```\n\n";

    body << "## SQL-related Column Information\n\n";
    if (refs.empty()) {
        body << "The query references no named columns.\n";
    } else {
        for (const auto& ref : refs) {
            const auto* table = schema.find_table(ref.table);
            const auto* column = table ? table->find_column(ref.column) : nullptr;
            body << "- " << quote_ident(ref.table) << "." << quote_ident(ref.column);
            if (column && !column->description.empty()) body << ": " << column->description;
            body << "\n";
        }
    }
    body << "\n";

    body << "## Desired Language Style\n\n"
         << "Style: " << style.name << ". " << style.description << "\n\n"
         << "Example: " << style.example << "\n";

    llm::ChatRequest request;
    request.messages = {
        {"system", "You are a precise technical writer who turns SQL queries into natural "
                   "language questions real users would ask."},
        {"user", body.str()}};
    request.temperature = 0.8;
    request.n_samples = 1;
    return request;
}

namespace {

// Splits marker-delimited sections; a repeated marker restarts its section.
std::map<std::string, std::string> split_sections(const std::string& text) {
    static const std::array<const char*, 4> kMarkers = {"[EXPLANATION]", "[EXTERNAL KNOWLEDGE]",
                                                        "[QUESTION]", "[DIALOGUE]"};
    std::map<std::string, std::string> sections;
    std::istringstream in(text);
    std::string line, current;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string upper = util::to_upper(util::trim(line));
        auto marker = std::find(kMarkers.begin(), kMarkers.end(), upper);
        if (marker != kMarkers.end()) {
            current = upper;
            sections[current].clear();
            continue;
        }
        if (!current.empty()) {
            sections[current] += line;
            sections[current] += '\n';
        }
    }
    return sections;
}

std::vector<DialogueTurn> parse_turns(const std::string& body) {
    std::vector<DialogueTurn> turns;
    std::istringstream in(body);
    std::string line;
    while (std::getline(in, line)) {
        std::string stripped = util::trim(line);
        if (stripped.empty()) continue;
        bool matched = false;
        for (const char* speaker : {"User", "Assistant"}) {
            for (const std::string& prefix :
                 {std::string(speaker) + ":", "<" + std::string(speaker) + ">:"}) {
                if (util::starts_with_ci(stripped, prefix)) {
                    turns.push_back({speaker, util::trim(stripped.substr(prefix.size()))});
                    matched = true;
                    break;
                }
            }
            if (matched) break;
        }
        if (!matched && !turns.empty()) {  // continuation of the previous turn
            turns.back().text += " " + stripped;
        }
    }
    return turns;
}

}  // namespace

StylizedQuestion parse_question(const std::string& llm_text, const StyleSpec& style) {
    auto sections = split_sections(llm_text);
    StylizedQuestion q;
    q.style = style.name;

    if (style_is_dialogue(style.name)) {
        if (!sections.count("[DIALOGUE]")) throw ParseError("missing [DIALOGUE] section");
        q.dialogue = parse_turns(sections["[DIALOGUE]"]);
        if (q.dialogue.size() < 2) throw ParseError("dialogue needs at least two turns");
        std::vector<std::string> lines;
        for (const auto& turn : q.dialogue) lines.push_back(turn.speaker + ": " + turn.text);
        q.text = util::join(lines, "\n");
    } else {
        if (sections.count("[DIALOGUE]")) {
            throw ParseError("unexpected [DIALOGUE] for style " + style.name);
        }
        if (!sections.count("[QUESTION]")) throw ParseError("missing [QUESTION] section");
        q.text = normalize_line(sections["[QUESTION]"]);
        if (style_needs_knowledge(style.name)) {
            if (!sections.count("[EXTERNAL KNOWLEDGE]")) {
                throw ParseError("missing [EXTERNAL KNOWLEDGE] section");
            }
            std::string knowledge = normalize_line(sections["[EXTERNAL KNOWLEDGE]"]);
            if (knowledge.empty()) throw ParseError("empty external knowledge");
            q.external_knowledge = knowledge;
        } else if (sections.count("[EXTERNAL KNOWLEDGE]")) {
            throw ParseError("unexpected [EXTERNAL KNOWLEDGE] for style " + style.name);
        }
    }
    if (q.text.empty()) throw ParseError("empty question");

    try {
        validate_question(q);
    } catch (const InvariantError& e) {
        throw ParseError(e.what());  // discard the candidate, never repair it
    }
    return q;
}

size_t select_consistent(const std::vector<StylizedQuestion>& candidates,
                         llm::Gateway& gateway, const std::string& embed_model_id) {
    if (candidates.empty()) throw PreconditionError("no candidates to select from");
    if (candidates.size() == 1) return 0;

    std::vector<std::string> texts;
    texts.reserve(candidates.size());
    for (const auto& candidate : candidates) texts.push_back(candidate.text);
    auto embeddings = gateway.embed(texts, embed_model_id);

    size_t best = 0;
    double best_score = -2.0;
    for (size_t i = 0; i < embeddings.size(); ++i) {
        double sum = 0.0;
        for (size_t j = 0; j < embeddings.size(); ++j) {
            if (j != i) sum += llm::cosine_similarity(embeddings[i], embeddings[j]);
        }
        double score = sum / static_cast<double>(embeddings.size() - 1);
        if (score > best_score) {  // ties keep the lowest index
            best_score = score;
            best = i;
        }
    }
    return best;
}

std::optional<CandidateSet> generate_question(const query::SqlSample& sample,
                                              const schema::SchemaDef& schema,
                                              llm::Gateway& gateway,
                                              const StyleSpec& style,
                                              const QuestionParams& params,
                                              QuestionStats* stats) {
    auto request = build_question_prompt(sample, schema, style);
    request.model_id = params.model_id;
    request.temperature = params.temperature;
    request.n_samples = params.n_candidates;
    request.max_output_tokens = params.max_output_tokens;

    auto response = gateway.complete(request);
    QuestionStats local;
    local.n_candidates = response.texts.size();

    CandidateSet set;
    for (const auto& text : response.texts) {
        try {
            set.candidates.push_back(parse_question(text, style));
        } catch (const ParseError&) {
            ++local.n_parse_failures;
        }
    }
    if (stats) *stats = local;
    if (set.candidates.empty()) return std::nullopt;
    set.selected_index = select_consistent(set.candidates, gateway, params.embed_model_id);
    return set;
}

void to_json(nlohmann::json& j, const QuestionedSample& s) {
    j = nlohmann::json{{"sample", s.sample}, {"question", s.question}};
}

void from_json(const nlohmann::json& j, QuestionedSample& s) {
    j.at("sample").get_to(s.sample);
    j.at("question").get_to(s.question);
}

std::vector<QuestionedSample> load_questioned(const std::filesystem::path& path) {
    std::vector<QuestionedSample> rows;
    for (const auto& line : util::read_lines(path)) {
        if (util::trim(line).empty()) continue;
        try {
            rows.push_back(nlohmann::json::parse(line).get<QuestionedSample>());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("bad question line in " + path.string() + ": " + e.what());
        }
    }
    return rows;
}

void write_questioned(const std::vector<QuestionedSample>& rows,
                      const std::filesystem::path& path) {
    std::string body;
    for (const auto& row : rows) {
        body += nlohmann::json(row).dump();
        body += '\n';
    }
    util::write_file_atomic(path, body);
}

}  // namespace sqlsynth::question
