#include "orchestron/query.hpp"

#include <algorithm>
#include <cctype>

namespace orchestron {

namespace {

struct Tokenizer {
    const std::string& text;
    size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    // Next token: identifier, keyword or one of ", = ?".
    std::string next() {
        skip_ws();
        if (pos >= text.size()) return {};
        char c = text[pos];
        if (c == ',' || c == '=' || c == '?' || c == '*') {
            ++pos;
            return std::string(1, c);
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = pos;
            while (pos < text.size() &&
                   (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
                ++pos;
            return text.substr(start, pos - start);
        }
        ++pos;
        return std::string(1, c);  // unknown char, rejected by the grammar
    }

    bool done() {
        skip_ws();
        return pos >= text.size();
    }
};

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::toupper(c); });
    return s;
}

bool is_identifier(const std::string& s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isalnum(c) || c == '_'; });
}

}  // namespace

std::optional<ParsedQuery> parse_query(const std::string& query) {
    Tokenizer tok{query};
    ParsedQuery out;

    if (upper(tok.next()) != "SELECT") return std::nullopt;

    // column list
    while (true) {
        std::string col = tok.next();
        if (upper(col) == "FROM" || !is_identifier(col)) return std::nullopt;
        out.select_columns.push_back(col);
        std::string sep = tok.next();
        if (sep == ",") continue;
        if (upper(sep) == "FROM") break;
        return std::nullopt;
    }

    out.table = tok.next();
    if (!is_identifier(out.table) || upper(out.table) == "WHERE") return std::nullopt;

    if (tok.done()) return out;  // no predicate is fine

    if (upper(tok.next()) != "WHERE") return std::nullopt;
    while (true) {
        std::string col = tok.next();
        if (!is_identifier(col) || upper(col) == "AND") return std::nullopt;
        if (tok.next() != "=") return std::nullopt;
        if (tok.next() != "?") return std::nullopt;
        out.where_columns.push_back(col);
        if (tok.done()) break;
        if (upper(tok.next()) != "AND") return std::nullopt;
    }
    return out;
}

}  // namespace orchestron
