#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace dmba::csv {

// RFC 4180 dialect: comma separator, double-quote quoting, LF line endings on
// output, CRLF and LF both accepted on input. Fields containing comma, quote
// or newline are quoted; quotes are doubled.

std::string escape(std::string_view field);

std::string join_row(const std::vector<std::string>& fields);

// Parses a whole document. Quoted fields may contain embedded newlines.
// Throws a parse error on an unterminated quoted field.
std::vector<std::vector<std::string>> parse(std::string_view text);

std::vector<std::vector<std::string>> read_file(const std::string& path);

void write_file(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows);

}  // namespace dmba::csv
