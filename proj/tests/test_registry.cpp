#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "orchestron/registry.hpp"

#include "fixtures.hpp"

using namespace orchestron;
namespace fs = std::filesystem;

namespace {

ResolutionContext context_for(const std::string& name,
                              std::optional<std::string> tenant = std::nullopt) {
    ResolutionContext ctx;
    ctx.operation_name = name;
    ctx.tenant = std::move(tenant);
    return ctx;
}

std::string five_step_variant() {
    std::string doc = fixtures::kCustomer360Yaml;
    auto pos = doc.find("aggregation:");
    doc.insert(pos, R"(  - name: recentCases
    type: api
    method: GET
    endpoint: /cases/recent/{customer_id}
    timeout_ms: 600
    role: optional
    depends_on: [accountService]

)");
    return doc;
}

}  // namespace

TEST_CASE("resolve returns the registered spec and assigns versions") {
    SpecRegistry registry;
    auto report = registry.load_documents({{"customer360.yaml", fixtures::kCustomer360Yaml}});
    CHECK(report.loaded == std::vector<std::string>{"customer360@v1"});
    CHECK(report.rejected.empty());

    auto spec = resolve_configuration("customer360", context_for("customer360"), registry);
    REQUIRE(spec != nullptr);
    CHECK(spec->operation_name == "customer360");
    CHECK(spec->version == "v1");
    CHECK(spec->steps.size() == 4);
}

TEST_CASE("resolve misses unknown operations") {
    SpecRegistry registry;
    CHECK(resolve_configuration("unknownOp", context_for("unknownOp"), registry) == nullptr);
}

TEST_CASE("tenant-specific spec wins over the base spec") {
    SpecRegistry registry;
    auto report = registry.load_documents({
        {"customer360.yaml", fixtures::kCustomer360Yaml},
        {"customer360@tenantA.yaml", five_step_variant()},
    });
    CHECK(report.rejected.empty());

    auto base = resolve_configuration("customer360", context_for("customer360"), registry);
    REQUIRE(base != nullptr);
    CHECK(base->steps.size() == 4);

    auto tenant =
        resolve_configuration("customer360", context_for("customer360", "tenantA"), registry);
    REQUIRE(tenant != nullptr);
    CHECK(tenant->steps.size() == 5);

    // Unregistered tenants fall back to the base spec.
    auto other =
        resolve_configuration("customer360", context_for("customer360", "tenantB"), registry);
    REQUIRE(other != nullptr);
    CHECK(other->steps.size() == 4);
}

TEST_CASE("registry refuses invalid specs and keeps the prior version") {
    SpecRegistry registry;
    registry.load_documents({{"customer360.yaml", fixtures::kCustomer360Yaml}});

    auto report = registry.load_documents({{"customer360.yaml", fixtures::kCyclicYaml}});
    REQUIRE(report.rejected.size() == 1);
    CHECK(report.rejected[0].first == "customer360.yaml");
    CHECK_FALSE(report.rejected[0].second.empty());

    // The cyclic replacement never went live; the v1 spec still resolves.
    auto spec = resolve_configuration("customer360", context_for("customer360"), registry);
    REQUIRE(spec != nullptr);
    CHECK(spec->version == "v1");
    CHECK(spec->steps.size() == 4);
}

TEST_CASE("every resolvable spec passed validation") {
    SpecRegistry registry;
    registry.load_documents({
        {"customer360.yaml", fixtures::kCustomer360Yaml},
        {"cyclic.yaml", fixtures::kCyclicYaml},  // rejected
    });
    auto snap = registry.snapshot();
    CHECK(snap->entries.size() == 1);
    for (const auto& [key, spec] : snap->entries) CHECK(validate_spec(*spec).valid);
    CHECK(resolve_configuration("cyclicOp", context_for("cyclicOp"), registry) == nullptr);
}

TEST_CASE("load_directory reads files, tenant from stem, version bumps per load") {
    fs::path dir = fs::temp_directory_path() / "orchestron_registry_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "customer360.yaml") << fixtures::kCustomer360Yaml;
    std::ofstream(dir / "customer360@tenantA.yaml") << five_step_variant();

    SpecRegistry registry;
    auto first = registry.load_directory(dir);
    CHECK(first.loaded == std::vector<std::string>{"customer360@v1", "customer360@tenantA@v1"});

    auto second = registry.load_directory(dir);
    CHECK(second.loaded == std::vector<std::string>{"customer360@v2", "customer360@tenantA@v2"});

    auto spec = resolve_configuration("customer360", context_for("customer360"), registry);
    REQUIRE(spec != nullptr);
    CHECK(spec->version == "v2");
    fs::remove_all(dir);
}
