#pragma once

#include <spdlog/spdlog.h>

namespace qaspr {

// stderr logger; level taken from QASPR_LOG={error,info,debug} (default info).
spdlog::logger& log();

}  // namespace qaspr
