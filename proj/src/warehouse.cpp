#include "orchestron/warehouse.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace orchestron {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

bool parse_number(const std::string& s, double& out) {
    if (s.empty()) return false;
    try {
        size_t pos = 0;
        out = std::stod(s, &pos);
        return pos == s.size();
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace

WarehouseStore::Table parse_csv(const std::string& text) {
    WarehouseStore::Table table;
    std::istringstream in(text);
    std::string line;
    std::vector<std::vector<std::string>> raw_rows;
    bool header_done = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (!header_done) {
            table.columns = fields;
            header_done = true;
        } else {
            raw_rows.push_back(fields);
        }
    }

    // Column is numeric when every non-empty value parses as a number.
    std::vector<bool> numeric(table.columns.size(), true);
    for (const auto& row : raw_rows) {
        for (size_t c = 0; c < table.columns.size() && c < row.size(); ++c) {
            double unused;
            if (!row[c].empty() && !parse_number(row[c], unused)) numeric[c] = false;
        }
    }
    for (const auto& row : raw_rows) {
        std::vector<Json> typed;
        for (size_t c = 0; c < table.columns.size(); ++c) {
            std::string value = c < row.size() ? row[c] : "";
            double num;
            if (numeric[c] && parse_number(value, num)) {
                if (num == static_cast<long long>(num))
                    typed.emplace_back(static_cast<long long>(num));
                else
                    typed.emplace_back(num);
            } else {
                typed.emplace_back(value);
            }
        }
        table.rows.push_back(std::move(typed));
    }
    return table;
}

WarehouseStore WarehouseStore::load_directory(const fs::path& dir) {
    WarehouseStore store;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
        std::ifstream in(entry.path());
        std::stringstream buf;
        buf << in.rdbuf();
        store.add_table(entry.path().stem().string(), parse_csv(buf.str()));
    }
    return store;
}

void WarehouseStore::add_table(const std::string& name, Table table) {
    tables_[name] = std::move(table);
}

const WarehouseStore::Table* WarehouseStore::find_table(const std::string& name) const {
    auto it = tables_.find(name);
    return it == tables_.end() ? nullptr : &it->second;
}

namespace {

// Loose equality: numeric columns compare numerically even when the bound
// parameter arrived as a string (request params are often strings).
bool values_equal(const Json& cell, const Json& param) {
    if (cell.is_number() && param.is_string()) {
        double num;
        if (parse_number(param.get<std::string>(), num))
            return cell.get<double>() == num;
        return false;
    }
    if (cell.is_string() && param.is_number())
        return values_equal(param, cell);
    if (cell.is_number() && param.is_number())
        return cell.get<double>() == param.get<double>();
    return cell == param;
}

}  // namespace

InvokeResult invoke_warehouse(const WarehouseStore& store, const ParsedQuery& query,
                              const std::vector<Json>& params,
                              std::chrono::milliseconds timeout,
                              const CancellationToken& cancel) {
    if (store.simulated_delay_ms() > 0) {
        auto delay = std::chrono::milliseconds(store.simulated_delay_ms());
        if (delay >= timeout) {
            cancel.wait_for(timeout);
            return InvokeResult::failure(
                StepError::timeout("warehouse query exceeded " +
                                   std::to_string(timeout.count()) + " ms"));
        }
        if (cancel.wait_for(delay))
            return InvokeResult::failure(StepError::transport("cancelled"));
    }

    const auto* table = store.find_table(query.table);
    if (!table)
        return InvokeResult::failure(StepError::transform("unknown table '" + query.table + "'"));
    if (params.size() != query.where_columns.size())
        return InvokeResult::failure(StepError::transform("parameter count mismatch"));

    auto column_index = [&](const std::string& name) -> std::optional<size_t> {
        auto it = std::find(table->columns.begin(), table->columns.end(), name);
        if (it == table->columns.end()) return std::nullopt;
        return static_cast<size_t>(it - table->columns.begin());
    };

    std::vector<size_t> select_idx;
    for (const auto& col : query.select_columns) {
        auto idx = column_index(col);
        if (!idx)
            return InvokeResult::failure(StepError::transform("unknown column '" + col + "'"));
        select_idx.push_back(*idx);
    }
    std::vector<size_t> where_idx;
    for (const auto& col : query.where_columns) {
        auto idx = column_index(col);
        if (!idx)
            return InvokeResult::failure(StepError::transform("unknown column '" + col + "'"));
        where_idx.push_back(*idx);
    }

    Json rows = Json::array();
    for (const auto& row : table->rows) {
        bool match = true;
        for (size_t p = 0; p < where_idx.size(); ++p) {
            if (!values_equal(row[where_idx[p]], params[p])) {
                match = false;
                break;
            }
        }
        if (!match) continue;
        Json out = Json::object();
        for (size_t s = 0; s < select_idx.size(); ++s)
            out[query.select_columns[s]] = row[select_idx[s]];
        rows.push_back(std::move(out));
    }
    return InvokeResult::success(Json{{"rows", rows}, {"row_count", rows.size()}});
}

}  // namespace orchestron
