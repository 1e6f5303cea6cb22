#pragma once

#include <optional>
#include <string>
#include <vector>

namespace orchestron {

// Minimal warehouse query grammar:
//
//   SELECT col [, col]* FROM table WHERE col = ? [AND col = ?]*
//
// Keywords are case-insensitive; identifiers are [A-Za-z_][A-Za-z0-9_]*.
// Every ? is tied to the column it is compared against, which is how
// positional parameters get bound by name.
struct ParsedQuery {
    std::vector<std::string> select_columns;
    std::string table;
    std::vector<std::string> where_columns;   // one entry per '?', in order
    bool operator==(const ParsedQuery&) const = default;
};

// Returns nullopt for anything outside the grammar (SELECT *, joins,
// non-equality predicates, literals in predicates, ...).
std::optional<ParsedQuery> parse_query(const std::string& query);

}  // namespace orchestron
