#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "orchestron/invoker.hpp"
#include "orchestron/query.hpp"

namespace orchestron {

// File-backed analytical snapshot: one CSV per table, header row first,
// column typed numeric when every non-empty value parses as a number.
// Read-only after load; safe for concurrent queries.
class WarehouseStore {
public:
    struct Table {
        std::vector<std::string> columns;
        std::vector<std::vector<Json>> rows;
    };

    // Loads every *.csv in the directory; table name = file stem.
    static WarehouseStore load_directory(const std::filesystem::path& dir);

    void add_table(const std::string& name, Table table);
    bool has_table(const std::string& name) const { return tables_.count(name) > 0; }
    const Table* find_table(const std::string& name) const;

    // Simulates a slow analytical backend; queries block (cancellably) for
    // this long before returning, so timeouts can be exercised.
    void set_simulated_delay_ms(int delay_ms) { simulated_delay_ms_ = delay_ms; }
    int simulated_delay_ms() const { return simulated_delay_ms_; }

private:
    std::map<std::string, Table> tables_;
    int simulated_delay_ms_ = 0;
};

// Parses one CSV document (header row + data rows, double-quote quoting).
WarehouseStore::Table parse_csv(const std::string& text);

// Equality-filtered projection per the supported grammar. Payload shape:
// {rows: [{col: value}...], row_count: n}.
InvokeResult invoke_warehouse(const WarehouseStore& store, const ParsedQuery& query,
                              const std::vector<Json>& params,
                              std::chrono::milliseconds timeout,
                              const CancellationToken& cancel);

}  // namespace orchestron
