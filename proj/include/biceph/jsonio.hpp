#pragma once

#include <string>
#include <vector>

namespace biceph {

// Decimal with 17 significant digits: round-trips any IEEE double exactly
// and keeps serialized files diff-able.
std::string format_double_17(double v);

void append_double_array(std::string& out, const std::vector<double>& values);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace biceph
