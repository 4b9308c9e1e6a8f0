#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pmesh {

struct PowerMatrix;

/// Plain comma-separated table. Cells never contain commas, quotes or newlines.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Fixed three-decimal text; negative zero prints as 0.000 and infinities as
/// "inf" / "-inf".
std::string format_fixed3(double v);

std::string to_csv(const CsvTable& table);
/// Throws ParseError on an empty text or a row whose width differs from the header.
CsvTable parse_csv(std::string_view text);
void write_csv(const CsvTable& table, const std::filesystem::path& path);
CsvTable read_csv(const std::filesystem::path& path);

/// Documented result tables.
///  SwitchMatrix:    input,<output port>...   one row per input, dB values
///  MulticastFunnel: port,<N>...              one row per port, dB or empty when
///                                            the port is not among the first N
///  Feasibility:     permutation,solved,iterations,total_weight
///                   permutation as dash-joined output indices, solved 0/1,
///                   total_weight empty when unsolved
///  PortMatrix:      input,<output port>...   dB or empty on the diagonal
enum class CsvSchema { SwitchMatrix, MulticastFunnel, Feasibility, PortMatrix };

/// Throws ParseError naming the first cell that breaks the schema.
void check_schema(const CsvTable& table, CsvSchema schema);

CsvTable matrix_table(const PowerMatrix& matrix);

}  // namespace pmesh
