// Shared inline spec documents for tests.
#pragma once

#include <string>

namespace fixtures {

// The canonical four-step composite retrieval config, dependency-free form.
inline const std::string kCustomer360Yaml = R"(operation: customer360
steps:
  - name: accountService
    type: api
    method: GET
    endpoint: /accounts/{customer_id}
    timeout_ms: 500

  - name: transactionService
    type: api
    method: GET
    endpoint: /transactions/{customer_id}
    timeout_ms: 800

  - name: fraudSignals
    type: api
    method: GET
    endpoint: /fraud/signals/{customer_id}
    timeout_ms: 400

  - name: riskProfile
    type: warehouse
    query: SELECT score, segment FROM risk_profiles WHERE customer_id = ?
    timeout_ms: 1200

aggregation:
  strategy: merge
  required_steps: [accountService, transactionService]
)";

inline const std::string kCyclicYaml = R"(operation: cyclicOp
steps:
  - name: A
    type: api
    method: GET
    endpoint: /a
    timeout_ms: 100
    depends_on: [B]
  - name: B
    type: api
    method: GET
    endpoint: /b
    timeout_ms: 100
    depends_on: [A]
)";

}  // namespace fixtures
