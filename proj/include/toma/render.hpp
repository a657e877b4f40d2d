#pragma once

#include <string>

#include "toma/replay.hpp"

namespace toma {

// One SVG frame per replay step plus an index file; returns the frame count.
// Communication arrows appear only in frames whose step carried messages.
int render_replay(const Replay& replay, const std::string& out_dir);

}  // namespace toma
