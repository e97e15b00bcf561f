#include "qaspr/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>

#include <cstdlib>
#include <string_view>

namespace qaspr {

spdlog::logger& log() {
    static std::shared_ptr<spdlog::logger> logger = [] {
        auto l = spdlog::stderr_color_mt("qaspr");
        l->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
        spdlog::level::level_enum level = spdlog::level::info;
        if (const char* env = std::getenv("QASPR_LOG")) {
            std::string_view v{env};
            if (v == "error") level = spdlog::level::err;
            else if (v == "debug") level = spdlog::level::debug;
        }
        l->set_level(level);
        return l;
    }();
    return *logger;
}

}  // namespace qaspr
