#pragma once

#include <map>
#include <memory>
#include <string>

#include "orchestron/invoker.hpp"
#include "orchestron/warehouse.hpp"

namespace orchestron {

// Names every upstream a spec may reference: HTTP base URLs by base_url_key
// and warehouse stores by source_key.
struct UpstreamDirectory {
    std::map<std::string, std::string> base_urls;
    std::map<std::string, std::shared_ptr<const WarehouseStore>> stores;
};

// HTTP/1.1 call with the per-attempt timeout covering connect through
// response completion. 2xx bodies parse as JSON; non-JSON bodies wrap as
// {"raw": text}. Non-2xx returns upstream_status with the body in detail.
InvokeResult invoke_api(const PreparedApi& call, const UpstreamDirectory& directory,
                        std::chrono::milliseconds timeout, const CancellationToken& cancel);

// Named pure built-ins over completed step payloads: pick, merge_inputs,
// count. Never observes the clock or environment.
InvokeResult invoke_transform(const PreparedTransform& call);

// Production invoker: routes each prepared target variant to its connector.
// Safe for concurrent calls; the directory is read-only after construction.
class DispatchInvoker : public Invoker {
public:
    explicit DispatchInvoker(UpstreamDirectory directory)
        : directory_(std::move(directory)) {}

    InvokeResult invoke(const StepCall& call, std::chrono::milliseconds attempt_timeout,
                        const CancellationToken& cancel) override;

private:
    UpstreamDirectory directory_;
};

}  // namespace orchestron
