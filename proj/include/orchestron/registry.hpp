#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "orchestron/spec_model.hpp"

namespace orchestron {

struct ReloadReport {
    std::vector<std::string> loaded;    // "name@vN" or "name@tenant@vN"
    std::vector<std::pair<std::string, std::vector<ValidationIssue>>> rejected;
    Json to_json() const;
};

// Keyed store of validated operation specs. Lookups are tenant-aware:
// (name, tenant) beats (name, ""). Reload builds a complete replacement
// snapshot and swaps it in atomically, so concurrent readers see either
// the old registry or the new one, never a mix. Invalid documents never
// enter a snapshot; a rejected file leaves the prior version of that
// operation in place.
class SpecRegistry {
public:
    using Key = std::pair<std::string, std::string>;  // (operation, tenant or "")

    struct Snapshot {
        std::map<Key, std::shared_ptr<const OperationSpec>> entries;
        uint64_t generation = 0;
    };

    // Tenant-aware lookup; nullptr when nothing matches the name.
    std::shared_ptr<const OperationSpec> resolve(const std::string& name,
                                                 const ResolutionContext& context) const;

    std::shared_ptr<const Snapshot> snapshot() const;
    uint64_t generation() const;

    // Parses and validates every *.yaml/*.yml/*.json file in the directory.
    // File stems may carry an "@tenant" suffix; the operation field is
    // authoritative for the name.
    ReloadReport load_directory(const std::filesystem::path& dir);

    // Same contract, for in-memory documents (source name, text).
    ReloadReport load_documents(const std::vector<std::pair<std::string, std::string>>& docs);

    // Registers one already-built spec (validated here as well).
    // Returns the validation report; invalid specs are not stored.
    ValidationReport insert(OperationSpec spec, const std::string& tenant = "");

private:
    ReloadReport load_parsed(
        std::vector<std::tuple<std::string, std::string, std::string>> sources);

    mutable std::mutex mutex_;
    std::shared_ptr<const Snapshot> snapshot_ = std::make_shared<Snapshot>();
    std::map<Key, int> version_counters_;
};

// Tenant-specific spec when registered, else the tenant-agnostic one;
// nullptr for an unknown operation.
std::shared_ptr<const OperationSpec> resolve_configuration(const std::string& name,
                                                           const ResolutionContext& context,
                                                           const SpecRegistry& registry);

}  // namespace orchestron
