#include "provtrace/filters.hpp"

#include "builtin_patterns.inc"

namespace provtrace {

const std::vector<QueryPattern>& builtin_patterns() {
    static const std::vector<QueryPattern> patterns =
        parse_pattern_lines(kBuiltinPatternsText);
    return patterns;
}

} // namespace provtrace
