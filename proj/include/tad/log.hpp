#ifndef TAD_LOG_HPP
#define TAD_LOG_HPP

#include <string>

namespace tad {

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

// Read once from TAD_LOG (quiet|info|debug); unknown values mean info.
LogLevel log_level();

void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace tad

#endif  // TAD_LOG_HPP
