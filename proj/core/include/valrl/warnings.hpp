#pragma once

#include <functional>
#include <string>

namespace valrl {

// Non-fatal diagnostics (unknown config bindings, checkpoint fallbacks,
// truncated run groups). Defaults to stderr; tests install a capturing sink.
using WarningSink = std::function<void(const std::string&)>;

void warn(const std::string& message);

// Returns the previous sink.
WarningSink set_warning_sink(WarningSink sink);

}  // namespace valrl
