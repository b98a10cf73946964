// SPDX-License-Identifier: Apache-2.0
#include "copaug/error.hpp"

namespace copaug {

std::string_view to_string(ErrorCategory c) noexcept {
  switch (c) {
    case ErrorCategory::io: return "io";
    case ErrorCategory::schema: return "schema";
    case ErrorCategory::invariant: return "invariant";
    case ErrorCategory::domain: return "domain";
    case ErrorCategory::fit: return "fit";
    case ErrorCategory::convergence: return "convergence";
    case ErrorCategory::config: return "config";
  }
  return "unknown";
}

}  // namespace copaug
