#pragma once

#include "dytb/accretive.hpp"
#include "dytb/forest.hpp"
#include "dytb/lattice.hpp"
#include "dytb/measure.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

namespace dytb {

using Json = nlohmann::json;

/// Shortest round-trip decimal form; independent of the C locale.
std::string format_double(double value);
double parse_double(std::string_view text, const std::string& what);
std::int64_t parse_int(std::string_view text, const std::string& what);

/// 64-bit FNV-1a of a string, as 16 hex digits.
std::string fnv1a_hex(std::string_view text);
/// Hash of the canonical (sorted-key, compact) dump of a JSON document.
std::string config_hash(const Json& config);

Json to_json(const Grid& grid);
Grid grid_from_json(const Json& j, int id = 0);

Json to_json(const CellSpace& space);
CellSpace cell_space_from_json(const Json& j);

/// Dense matrix as comma-separated rows.
Matrix read_matrix_csv(const std::string& path);
void write_matrix_csv(const Matrix& m, std::ostream& out);

/// "# {space json}" then "i0,...,weight" and one row per cell with positive
/// weight (global cell coordinates).
void write_measure_csv(const AtomicMeasure& mu, std::ostream& out);
AtomicMeasure read_measure_csv(std::istream& in);
AtomicMeasure read_measure_csv(const std::string& path);

/// "# {mode, C, s, generator, grid}" then "family,cube_id,cell_index,value"
/// with cell_index the Morton leaf index in the grid.
void write_system_csv(const AccretiveSystem& system, std::ostream& out);
AccretiveSystem read_system_csv(std::istream& in);

Json to_json(const StoppingForest& forest);
StoppingForest forest_from_json(const Json& j);

}  // namespace dytb
