#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace provtrace::sql {

enum class TokenKind {
    Identifier, // possibly quoted; text holds the unquoted form
    Variable,   // @name
    Number,
    String,     // 'literal', text holds the unescaped body
    Punct,      // single punctuation / operator character
    End,
};

struct Token {
    TokenKind kind{TokenKind::End};
    std::string text;  // original case
    std::string lower; // lowercase, for keyword comparison
    std::size_t pos{}; // byte offset in the statement

    bool is(std::string_view keyword) const {
        return kind == TokenKind::Identifier && lower == keyword;
    }
    bool is_punct(char c) const {
        return kind == TokenKind::Punct && text.size() == 1 && text[0] == c;
    }
};

// Tokenizes one T-SQL statement. Strips -- and /* */ comments. Quoted
// identifiers ([x], "x") are unquoted; string literals keep their body
// with '' collapsed. Never throws: unexpected bytes become punct tokens.
std::vector<Token> lex(std::string_view sql);

// Case/whitespace normalization for query identity. With mask_literals,
// numbers and string literals become '?' so repeated loop iterations that
// differ only in constants compare equal.
std::string normalize_sql(std::string_view sql, bool mask_literals);

// Index of the first token after IF/WHILE/ELSE/BEGIN control prefixes.
// The wrapped statement is what carries lineage; branch bodies arrive as
// their own events.
std::size_t statement_start_index(const std::vector<Token>& tokens);

} // namespace provtrace::sql
