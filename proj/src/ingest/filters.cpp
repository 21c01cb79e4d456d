#include "sqlsynth/ingest/filters.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "sqlsynth/util.hpp"

namespace sqlsynth::ingest {

using nlohmann::json;

void to_json(json& j, const FilterReport& r) {
    json verdicts = json::array();
    for (const auto& [id, stage] : r.per_table_verdicts) {
        verdicts.push_back({{"table_id", id}, {"verdict", stage}});
    }
    j = json{{"input_count", r.input_count},
             {"kept_count", r.kept_count},
             {"rejections", r.rejections},
             {"per_table_verdicts", verdicts}};
}

namespace {

const std::unordered_set<std::string>& stopwords() {
    static const std::unordered_set<std::string> words = {
        "the",  "of",   "and",  "a",    "an",    "to",   "in",   "is",    "it",   "you",
        "that", "he",   "she",  "was",  "for",   "on",   "are",  "as",    "with", "his",
        "her",  "they", "at",   "be",   "this",  "have", "from", "or",    "had",  "by",
        "not",  "but",  "what", "all",  "were",  "we",   "when", "your",  "can",  "said",
        "there", "use", "each", "which", "do",   "how",  "their", "if",   "will", "up",
        "other", "about", "out", "many", "then", "them", "these", "so",   "some", "would",
        "into", "has",  "more", "no",   "than",  "its",  "who",  "total", "name", "date",
        "year", "number", "type", "time", "per",
    };
    return words;
}

// Sample text for classification: all headers plus the first data row.
std::string sample_text(const WebTable& table) {
    std::string text = util::join(table.headers, " ");
    if (!table.rows.empty()) {
        text += " ";
        text += util::join(table.rows.front(), " ");
    }
    return text;
}

}  // namespace

double english_score(const WebTable& table) {
    std::string text = sample_text(table);

    // Latin ratio over letter-ish characters; each multi-byte UTF-8 sequence
    // counts as one non-Latin character.
    size_t latin = 0, non_latin = 0;
    for (size_t i = 0; i < text.size();) {
        unsigned char c = text[i];
        if (c < 0x80) {
            if (std::isalpha(c)) ++latin;
            ++i;
        } else {
            ++non_latin;
            size_t len = c >= 0xF0 ? 4 : c >= 0xE0 ? 3 : 2;
            i += len;
        }
    }
    double latin_ratio =
        latin + non_latin == 0 ? 0.0 : double(latin) / double(latin + non_latin);

    auto tokens = util::split_whitespace(text);
    size_t hits = 0;
    for (auto& tok : tokens) {
        std::string word;
        for (char c : tok) {
            if (std::isalpha(static_cast<unsigned char>(c))) word += char(std::tolower(c));
        }
        if (!word.empty() && stopwords().count(word)) ++hits;
    }
    double stopword_rate = tokens.empty() ? 0.0 : double(hits) / double(tokens.size());

    return 0.5 * latin_ratio + 0.5 * stopword_rate;
}

bool filter_language(const WebTable& table) { return english_score(table) >= 0.3; }

bool filter_size(const WebTable& table) {
    return table.headers.size() >= 5 && table.rows.size() >= 5;
}

std::string header_key(const WebTable& table) {
    std::vector<std::string> normalized;
    normalized.reserve(table.headers.size());
    for (const auto& h : table.headers) {
        normalized.push_back(util::join(util::split_whitespace(util::to_lower(h)), " "));
    }
    std::sort(normalized.begin(), normalized.end());
    return util::join(normalized, "\x1f");
}

std::vector<WebTable> dedup_headers(const std::vector<WebTable>& tables) {
    std::unordered_set<std::string> seen;
    std::vector<WebTable> kept;
    for (const auto& t : tables) {
        if (seen.insert(header_key(t)).second) kept.push_back(t);
    }
    return kept;
}

llm::ChatRequest build_judge_prompt(const WebTable& table, const std::string& model_id) {
    llm::ChatRequest request;
    request.model_id = model_id;
    request.temperature = 0.0;
    request.n_samples = 1;
    request.messages = {
        {"system",
         "You assess whether a web table is semantically rich enough to seed the design of a "
         "realistic multi-table database."},
        {"user",
         "Consider the table below. Answer YES if its columns describe meaningful, related "
         "real-world attributes that could anchor a database design, or NO if it is noise, "
         "navigation debris, or semantically too thin.\n\n" +
             render_table(table, 3) + "\nAnswer with a single word: YES or NO."},
    };
    return request;
}

bool judge_semantics(const WebTable& table, llm::Gateway& gateway, const std::string& model_id) {
    auto response = gateway.complete(build_judge_prompt(table, model_id));
    if (response.texts.empty()) return false;
    auto words = util::split_whitespace(util::to_upper(response.texts.front()));
    if (words.empty()) return false;
    // strip trailing punctuation from the verdict token
    std::string verdict = words.front();
    while (!verdict.empty() && !std::isalpha(static_cast<unsigned char>(verdict.back()))) {
        verdict.pop_back();
    }
    return verdict == "YES";
}

IngestResult run_ingest(const std::vector<WebTable>& tables, llm::Gateway& gateway,
                        const std::string& model_id, size_t workers) {
    IngestResult result;
    result.report.input_count = tables.size();
    std::vector<std::string> verdicts(tables.size());

    // stage 1+2: per-table language and size checks
    std::vector<size_t> survivors;
    for (size_t i = 0; i < tables.size(); ++i) {
        validate(tables[i]);
        if (!filter_language(tables[i])) {
            verdicts[i] = "language";
        } else if (!filter_size(tables[i])) {
            verdicts[i] = "size";
        } else {
            survivors.push_back(i);
        }
    }

    // stage 3: header dedup among survivors, first occurrence wins
    std::vector<size_t> deduped;
    {
        std::unordered_set<std::string> seen;
        for (size_t i : survivors) {
            if (seen.insert(header_key(tables[i])).second) {
                deduped.push_back(i);
            } else {
                verdicts[i] = "dedup";
            }
        }
    }

    // stage 4: semantic judgment, parallel over tables
    std::vector<char> accepted(deduped.size(), 0);
    util::parallel_for(deduped.size(), workers, [&](size_t k) {
        accepted[k] = judge_semantics(tables[deduped[k]], gateway, model_id) ? 1 : 0;
    });
    for (size_t k = 0; k < deduped.size(); ++k) {
        verdicts[deduped[k]] = accepted[k] ? "kept" : "semantic";
    }

    // accounting and output, in input order
    for (size_t i = 0; i < tables.size(); ++i) {
        result.report.per_table_verdicts.emplace_back(tables[i].table_id, verdicts[i]);
        if (verdicts[i] == "kept") {
            ++result.report.kept_count;
            result.kept.push_back(tables[i]);
        } else {
            ++result.report.rejections[verdicts[i]];
        }
    }
    return result;
}

}  // namespace sqlsynth::ingest
