#pragma once

#include <string>

namespace omt::app {

/// JSON Schema (draft 2020-12) of the run config, pretty-printed.
[[nodiscard]] std::string config_schema();

}  // namespace omt::app
