#include "orchestron/registry.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <tuple>

namespace orchestron {

namespace fs = std::filesystem;

Json ReloadReport::to_json() const {
    Json rej = Json::array();
    for (const auto& [file, errors] : rejected) {
        Json errs = Json::array();
        for (const auto& e : errors)
            errs.push_back(Json{{"code", e.code}, {"step", e.step_name}, {"message", e.message}});
        rej.push_back(Json{{"file", file}, {"errors", errs}});
    }
    return Json{{"loaded", loaded}, {"rejected", rej}};
}

std::shared_ptr<const OperationSpec> SpecRegistry::resolve(const std::string& name,
                                                           const ResolutionContext& context) const {
    auto snap = snapshot();
    if (context.tenant) {
        auto it = snap->entries.find({name, *context.tenant});
        if (it != snap->entries.end()) return it->second;
    }
    auto it = snap->entries.find({name, ""});
    if (it != snap->entries.end()) return it->second;
    return nullptr;
}

std::shared_ptr<const SpecRegistry::Snapshot> SpecRegistry::snapshot() const {
    std::lock_guard lock(mutex_);
    return snapshot_;
}

uint64_t SpecRegistry::generation() const { return snapshot()->generation; }

namespace {

// "customer360@tenantA" -> ("customer360", "tenantA")
std::pair<std::string, std::string> split_tenant(const std::string& stem) {
    auto at = stem.find('@');
    if (at == std::string::npos) return {stem, ""};
    return {stem.substr(0, at), stem.substr(at + 1)};
}

}  // namespace

ReloadReport SpecRegistry::load_directory(const fs::path& dir) {
    std::vector<std::tuple<std::string, std::string, std::string>> sources;
    std::vector<fs::path> files;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        if (ext == ".yaml" || ext == ".yml" || ext == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        std::ifstream in(path);
        std::stringstream buf;
        buf << in.rdbuf();
        sources.emplace_back(path.filename().string(), split_tenant(path.stem().string()).second,
                             buf.str());
    }
    return load_parsed(std::move(sources));
}

ReloadReport SpecRegistry::load_documents(
    const std::vector<std::pair<std::string, std::string>>& docs) {
    std::vector<std::tuple<std::string, std::string, std::string>> sources;
    for (const auto& [name, text] : docs) {
        auto stem = name.substr(0, name.find_last_of('.') == std::string::npos
                                       ? name.size()
                                       : name.find_last_of('.'));
        sources.emplace_back(name, split_tenant(stem).second, text);
    }
    return load_parsed(std::move(sources));
}

ReloadReport SpecRegistry::load_parsed(
    std::vector<std::tuple<std::string, std::string, std::string>> sources) {
    ReloadReport report;
    std::map<Key, OperationSpec> accepted;

    for (auto& [file, tenant, text] : sources) {
        try {
            OperationSpec spec = parse_spec(text);
            ValidationReport vr = validate_spec(spec);
            if (!vr.valid) {
                report.rejected.emplace_back(file, vr.errors);
                continue;
            }
            accepted[{spec.operation_name, tenant}] = std::move(spec);
        } catch (const ParseError& e) {
            std::string msg = e.what();
            if (e.line() >= 0) msg += " (line " + std::to_string(e.line()) + ")";
            report.rejected.emplace_back(
                file, std::vector<ValidationIssue>{{e.code(), "", msg}});
        }
    }

    std::lock_guard lock(mutex_);
    auto next = std::make_shared<Snapshot>();
    next->generation = snapshot_->generation + 1;
    // Replacement semantics: the new snapshot holds exactly the accepted
    // set, plus prior entries for operations whose replacement file was
    // rejected this round.
    std::map<Key, std::shared_ptr<const OperationSpec>> entries;
    for (auto& [key, spec] : accepted) {
        int version = ++version_counters_[key];
        spec.version = "v" + std::to_string(version);
        std::string label = key.first;
        if (!key.second.empty()) label += "@" + key.second;
        report.loaded.push_back(label + "@" + spec.version);
        entries[key] = std::make_shared<const OperationSpec>(std::move(spec));
    }
    for (const auto& [file, errors] : report.rejected) {
        auto stem = file.substr(0, file.find_last_of('.') == std::string::npos
                                       ? file.size()
                                       : file.find_last_of('.'));
        auto [name, tenant] = split_tenant(stem);
        Key key{name, tenant};
        auto prior = snapshot_->entries.find(key);
        if (prior != snapshot_->entries.end() && !entries.count(key))
            entries[key] = prior->second;
    }
    next->entries = std::move(entries);
    snapshot_ = std::move(next);
    return report;
}

ValidationReport SpecRegistry::insert(OperationSpec spec, const std::string& tenant) {
    ValidationReport vr = validate_spec(spec);
    if (!vr.valid) return vr;

    std::lock_guard lock(mutex_);
    Key key{spec.operation_name, tenant};
    spec.version = "v" + std::to_string(++version_counters_[key]);
    auto next = std::make_shared<Snapshot>(*snapshot_);
    next->generation = snapshot_->generation + 1;
    next->entries[key] = std::make_shared<const OperationSpec>(std::move(spec));
    snapshot_ = std::move(next);
    return vr;
}

std::shared_ptr<const OperationSpec> resolve_configuration(const std::string& name,
                                                           const ResolutionContext& context,
                                                           const SpecRegistry& registry) {
    return registry.resolve(name, context);
}

}  // namespace orchestron
