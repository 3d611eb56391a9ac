#pragma once

// Flat-file plumbing: float formatting, key-value configs, list parsing.

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace droplet::io {

/// 17-significant-digit scientific notation; round-trips every double.
std::string fmt(double x);

/// Flat `key = value` configuration.  `#` starts a comment; `:` is accepted
/// in place of `=`.  Duplicate keys are an error.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(std::string_view text);
KeyValues read_key_values(const std::string& path);

std::vector<double> parse_double_list(std::string_view text);
std::vector<int> parse_int_list(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace droplet::io
