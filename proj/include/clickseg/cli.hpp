#pragma once

#include <string>

#include "clickseg/segmenter.hpp"

namespace clickseg {

/// Parses "u,v,l;u,v,l;...". Whitespace around entries is ignored; an empty string yields no clicks.
[[nodiscard]] ClickSequence parse_clicks(const std::string& text);

/// "toy" (shipped parameters), "toy:<params file>", "external:<shell command>", "oracle" or "empty".
[[nodiscard]] SegmenterFactory segmenter_factory(const std::string& selector);

/// Runs the command line. Returns 0 on success, 1 on a runtime failure and 2 on a usage error.
int dispatch(int argc, const char* const* argv);

}  // namespace clickseg
