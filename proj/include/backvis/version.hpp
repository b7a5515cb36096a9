#pragma once

namespace backvis {

inline const char* engine_version() { return "backvis 0.1.0"; }

}  // namespace backvis
