#include "provtrace/config.hpp"

#include "provtrace/errors.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace provtrace {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Strips a trailing comment that is not inside quotes.
std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

struct RawValue {
    std::string text; // unparsed value text
};

using SectionMap = std::map<std::string, std::map<std::string, RawValue>>;

SectionMap parse_sections(const std::string& text) {
    SectionMap out;
    std::string section;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(strip_comment(line));
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw ConfigError("line " + std::to_string(line_no) +
                                  ": malformed section header");
            }
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) +
                              ": expected key = value");
        }
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        }
        out[section][key] = RawValue{value};
    }
    return out;
}

std::string unquote(const std::string& v, const std::string& key) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
        return v.substr(1, v.size() - 2);
    }
    throw ConfigError("value for " + key + " must be a quoted string: " + v);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("value for " + key + " must be true or false: " + v);
}

int parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        int out = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("value for " + key + " must be an integer: " + v);
    }
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("value for " + key + " must be a number: " + v);
    }
}

std::optional<int> parse_limit(const std::string& v, const std::string& key) {
    if (v == "\"inf\"" || v == "inf") return std::nullopt;
    int i = parse_int(v, key);
    if (i < 1) throw ConfigError(key + " must be >= 1 or \"inf\"");
    return i;
}

std::vector<std::string> parse_string_array(const std::string& v,
                                            const std::string& key) {
    std::string t = trim(v);
    if (t.size() < 2 || t.front() != '[' || t.back() != ']') {
        throw ConfigError("value for " + key + " must be an array: " + v);
    }
    std::vector<std::string> out;
    std::string body = t.substr(1, t.size() - 2);
    std::size_t i = 0;
    while (i < body.size()) {
        while (i < body.size() &&
               (std::isspace(static_cast<unsigned char>(body[i])) ||
                body[i] == ','))
            ++i;
        if (i >= body.size()) break;
        if (body[i] != '"') {
            throw ConfigError("array elements of " + key + " must be quoted");
        }
        std::size_t end = body.find('"', i + 1);
        if (end == std::string::npos) {
            throw ConfigError("unterminated string in " + key);
        }
        out.push_back(body.substr(i + 1, end - i - 1));
        i = end + 1;
    }
    return out;
}

std::string quote(const std::string& s) { return "\"" + s + "\""; }

std::string dump_array(const std::vector<std::string>& values) {
    std::string out = "[";
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out += ", ";
        out += quote(values[i]);
    }
    out += "]";
    return out;
}

std::string dump_limit(const std::optional<int>& v) {
    return v ? std::to_string(*v) : "\"inf\"";
}

} // namespace

Config Config::parse(const std::string& text) {
    SectionMap sections = parse_sections(text);
    Config cfg;

    auto take = [&sections](const std::string& section, const std::string& key,
                            auto parse_fn, auto& target) {
        auto sit = sections.find(section);
        if (sit == sections.end()) return;
        auto kit = sit->second.find(key);
        if (kit == sit->second.end()) return;
        target = parse_fn(kit->second.text, section + "." + key);
        sit->second.erase(kit);
    };

    take("source", "log_dir", unquote, cfg.log_dir);
    take("source", "checkpoint", unquote, cfg.checkpoint_path);
    take("source", "state", unquote, cfg.state_path);
    take("source", "staleness_hours", parse_double, cfg.staleness_hours);
    take("source", "period_hours", parse_int, cfg.period_hours);
    take("source", "fig6_strict_subtree", parse_bool, cfg.fig6_strict_subtree);

    take("filters", "loop_iters_admitted", parse_limit, cfg.loop_iters_admitted);
    take("filters", "sp_runs_admitted", parse_limit, cfg.sp_runs_admitted);
    take("filters", "keep_context", parse_bool, cfg.keep_context);
    take("filters", "builtin_patterns", parse_bool, cfg.use_builtin_patterns);
    take("filters", "patterns", parse_string_array, cfg.extra_patterns);
    take("filters", "drop_activity_if", parse_string_array, cfg.drop_activity_if);
    take("filters", "emit_levels", parse_string_array, cfg.emit_levels);

    take("binding", "mode", unquote, cfg.binding_mode);
    take("binding", "include_control_columns", parse_bool,
         cfg.include_control_columns);

    take("uploader", "sink", unquote, cfg.sink);
    take("uploader", "batch_size", parse_int, cfg.batch_size);
    take("uploader", "target_format", unquote, cfg.target_format);
    take("uploader", "upload_checkpoint", unquote, cfg.upload_checkpoint_path);
    take("uploader", "retry_base_ms", parse_int, cfg.retry_base_ms);
    take("uploader", "retry_max_attempts", parse_int, cfg.retry_max_attempts);
    take("uploader", "retry_factor", parse_double, cfg.retry_factor);

    for (const auto& [section, keys] : sections) {
        for (const auto& [key, _] : keys) {
            throw ConfigError("unknown config key: [" + section + "] " + key);
        }
    }

    if (cfg.batch_size < 1) throw ConfigError("uploader.batch_size must be >= 1");
    if (cfg.emit_levels.empty()) {
        throw ConfigError("filters.emit_levels must not be empty");
    }
    cfg.mode();           // validates
    cfg.filter_config();  // validates patterns and predicates
    return cfg;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string Config::dump() const {
    std::ostringstream out;
    out << "[source]\n";
    out << "log_dir = " << quote(log_dir) << "\n";
    out << "checkpoint = " << quote(checkpoint_path) << "\n";
    out << "state = " << quote(state_path) << "\n";
    out << "staleness_hours = " << staleness_hours << "\n";
    out << "period_hours = " << period_hours << "\n";
    out << "fig6_strict_subtree = " << (fig6_strict_subtree ? "true" : "false")
        << "\n";
    out << "\n[filters]\n";
    out << "loop_iters_admitted = " << dump_limit(loop_iters_admitted) << "\n";
    out << "sp_runs_admitted = " << dump_limit(sp_runs_admitted) << "\n";
    out << "keep_context = " << (keep_context ? "true" : "false") << "\n";
    out << "builtin_patterns = " << (use_builtin_patterns ? "true" : "false")
        << "\n";
    out << "patterns = " << dump_array(extra_patterns) << "\n";
    out << "drop_activity_if = " << dump_array(drop_activity_if) << "\n";
    out << "emit_levels = " << dump_array(emit_levels) << "\n";
    out << "\n[binding]\n";
    out << "mode = " << quote(binding_mode) << "\n";
    out << "include_control_columns = "
        << (include_control_columns ? "true" : "false") << "\n";
    out << "\n[uploader]\n";
    out << "sink = " << quote(sink) << "\n";
    out << "batch_size = " << batch_size << "\n";
    out << "target_format = " << quote(target_format) << "\n";
    out << "upload_checkpoint = " << quote(upload_checkpoint_path) << "\n";
    out << "retry_base_ms = " << retry_base_ms << "\n";
    out << "retry_max_attempts = " << retry_max_attempts << "\n";
    out << "retry_factor = " << retry_factor << "\n";
    return out.str();
}

FilterConfig Config::filter_config() const {
    FilterConfig fc;
    fc.loop_iters_admitted = loop_iters_admitted;
    fc.sp_runs_admitted = sp_runs_admitted;
    fc.keep_context = keep_context;

    if (use_builtin_patterns) fc.patterns = builtin_patterns();
    for (const auto& line : extra_patterns) {
        for (auto& p : parse_pattern_lines(line)) fc.patterns.push_back(std::move(p));
    }

    for (const auto& entry : drop_activity_if) {
        MetadataPredicate pred;
        std::string expr = entry;
        auto colon = entry.find(':');
        if (colon != std::string::npos) {
            const std::string prefix = trim(entry.substr(0, colon));
            if (prefix == "any") {
                pred.quantifier = PredicateQuantifier::Any;
                expr = entry.substr(colon + 1);
            } else if (prefix == "all") {
                pred.quantifier = PredicateQuantifier::All;
                expr = entry.substr(colon + 1);
            }
        }
        pred.expr = MetadataExpr::parse(trim(expr));
        fc.drop_activity_predicates.push_back(std::move(pred));
    }

    fc.emit_levels.clear();
    for (const auto& level : emit_levels) {
        if (level == "statement") fc.emit_levels.insert(EmitLevel::Statement);
        else if (level == "batch") fc.emit_levels.insert(EmitLevel::Batch);
        else if (level == "procedure") fc.emit_levels.insert(EmitLevel::Procedure);
        else throw ConfigError("unknown emit level: " + level);
    }
    return fc;
}

sql::BindingMode Config::mode() const {
    if (binding_mode == "pre_bound") return sql::BindingMode::PreBound;
    if (binding_mode == "state_based") return sql::BindingMode::StateBased;
    if (binding_mode == "best_effort") return sql::BindingMode::BestEffort;
    throw ConfigError("unknown binding mode: " + binding_mode);
}

sql::AnalyzerOptions Config::analyzer_options() const {
    sql::AnalyzerOptions opts;
    opts.include_control_columns = include_control_columns;
    return opts;
}

} // namespace provtrace
