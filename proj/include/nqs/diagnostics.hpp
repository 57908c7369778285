#pragma once

#include <string>

namespace nqs {

/// Emits "warning: <msg>" on stderr unless warnings are silenced.
void warn(const std::string& message);
void set_warnings_enabled(bool enabled);
/// Number of warnings emitted (or suppressed) so far in this process.
long warning_count();

}  // namespace nqs
