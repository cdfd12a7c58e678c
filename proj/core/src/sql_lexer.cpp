#include "provtrace/sql_lexer.hpp"

#include <cctype>

namespace provtrace::sql {

namespace {

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '#';
}

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$' ||
           c == '#';
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

} // namespace

std::vector<Token> lex(std::string_view sql) {
    std::vector<Token> out;
    std::size_t i = 0;
    const std::size_t n = sql.size();

    while (i < n) {
        char c = sql[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        // comments
        if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
            while (i < n && sql[i] != '\n') ++i;
            continue;
        }
        if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
            i += 2;
            while (i + 1 < n && !(sql[i] == '*' && sql[i + 1] == '/')) ++i;
            i = i + 2 <= n ? i + 2 : n;
            continue;
        }

        Token tok;
        tok.pos = i;

        if (c == '\'') { // string literal, '' escapes
            ++i;
            std::string body;
            while (i < n) {
                if (sql[i] == '\'') {
                    if (i + 1 < n && sql[i + 1] == '\'') {
                        body.push_back('\'');
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                body.push_back(sql[i++]);
            }
            tok.kind = TokenKind::String;
            tok.text = std::move(body);
            tok.lower = to_lower(tok.text);
            out.push_back(std::move(tok));
            continue;
        }
        if (c == '[') { // bracket-quoted identifier
            ++i;
            std::string body;
            while (i < n && sql[i] != ']') body.push_back(sql[i++]);
            if (i < n) ++i;
            tok.kind = TokenKind::Identifier;
            tok.text = std::move(body);
            tok.lower = to_lower(tok.text);
            out.push_back(std::move(tok));
            continue;
        }
        if (c == '"') { // ANSI quoted identifier
            ++i;
            std::string body;
            while (i < n && sql[i] != '"') body.push_back(sql[i++]);
            if (i < n) ++i;
            tok.kind = TokenKind::Identifier;
            tok.text = std::move(body);
            tok.lower = to_lower(tok.text);
            out.push_back(std::move(tok));
            continue;
        }
        if (c == '@') {
            std::size_t j = i + 1;
            while (j < n && (sql[j] == '@' || is_ident_char(sql[j]))) ++j;
            tok.kind = TokenKind::Variable;
            tok.text = std::string(sql.substr(i, j - i));
            tok.lower = to_lower(tok.text);
            i = j;
            out.push_back(std::move(tok));
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < n &&
             std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
            std::size_t j = i;
            while (j < n && (std::isalnum(static_cast<unsigned char>(sql[j])) ||
                             sql[j] == '.'))
                ++j;
            tok.kind = TokenKind::Number;
            tok.text = std::string(sql.substr(i, j - i));
            tok.lower = to_lower(tok.text);
            i = j;
            out.push_back(std::move(tok));
            continue;
        }
        if (is_ident_start(c)) {
            std::size_t j = i;
            while (j < n && is_ident_char(sql[j])) ++j;
            tok.kind = TokenKind::Identifier;
            tok.text = std::string(sql.substr(i, j - i));
            tok.lower = to_lower(tok.text);
            i = j;
            out.push_back(std::move(tok));
            continue;
        }

        tok.kind = TokenKind::Punct;
        tok.text = std::string(1, c);
        tok.lower = tok.text;
        ++i;
        out.push_back(std::move(tok));
    }

    Token end;
    end.kind = TokenKind::End;
    end.pos = n;
    out.push_back(std::move(end));
    return out;
}

namespace {

const char* const kStatementStartWords[] = {
    "select", "insert",   "update",  "delete",  "merge",   "bulk",
    "exec",   "execute",  "create",  "drop",    "alter",   "truncate",
    "begin",  "set",      "print",   "declare", "return",  "break",
    "continue", "waitfor", "if",     "while",   "else",    "end",
    "commit", "rollback", "use",     "grant",   "revoke",  "deny",
    "backup", "restore",  "dbcc",    "kill",    "checkpoint", "goto",
    "open",   "close",    "fetch",   "deallocate",
};

bool starts_statement(const Token& t) {
    if (t.kind != TokenKind::Identifier) return false;
    for (const char* w : kStatementStartWords) {
        if (t.lower == w) return true;
    }
    return false;
}

} // namespace

std::size_t statement_start_index(const std::vector<Token>& tokens) {
    std::size_t i = 0;
    auto at = [&tokens](std::size_t k) -> const Token& {
        return tokens[std::min(k, tokens.size() - 1)];
    };
    while (i < tokens.size()) {
        const Token& t = at(i);
        if (t.is("begin")) {
            // BEGIN TRAN / BEGIN TRY are statements of their own.
            if (at(i + 1).is("tran") || at(i + 1).is("transaction") ||
                at(i + 1).is("try") || at(i + 1).is("catch"))
                return i;
            ++i;
            continue;
        }
        if (t.is("else")) {
            ++i;
            continue;
        }
        if (t.is("if") || t.is("while")) {
            // Skip the condition: everything up to the first depth-0
            // statement-start token.
            ++i;
            int depth = 0;
            while (i < tokens.size() && at(i).kind != TokenKind::End) {
                const Token& c = at(i);
                if (c.is_punct('(')) ++depth;
                else if (c.is_punct(')')) --depth;
                else if (depth == 0 && starts_statement(c)) break;
                ++i;
            }
            continue;
        }
        break;
    }
    return i;
}

std::string normalize_sql(std::string_view sql, bool mask_literals) {
    std::vector<Token> tokens = lex(sql);
    std::string out;
    out.reserve(sql.size());
    for (const Token& t : tokens) {
        if (t.kind == TokenKind::End) break;
        if (!out.empty()) out.push_back(' ');
        switch (t.kind) {
        case TokenKind::Number:
            out += mask_literals ? "?" : t.lower;
            break;
        case TokenKind::String:
            if (mask_literals) {
                out += "?";
            } else {
                out.push_back('\'');
                out += t.lower;
                out.push_back('\'');
            }
            break;
        case TokenKind::Variable:
            out += mask_literals ? "?" : t.lower;
            break;
        default:
            out += t.lower;
        }
    }
    return out;
}

} // namespace provtrace::sql
