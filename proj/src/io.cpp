#include "dytb/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace dytb {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, const std::string& what) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error("invalid " + what + ": '" + std::string(text) + "'");
  }
  return value;
}

std::int64_t parse_int(std::string_view text, const std::string& what) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  std::int64_t value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error("invalid " + what + ": '" + std::string(text) + "'");
  }
  return value;
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const Json& config) { return fnv1a_hex(config.dump()); }

namespace {

std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::ifstream open(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return in;
}

Json header_line(std::istream& in, const std::string& what) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw Error(what + " file must start with '# {json}'");
  try {
    return Json::parse(line.substr(2));
  } catch (const Json::exception& e) {
    throw Error(what + " header is not valid JSON: " + e.what());
  }
}

Json vector_json(const Point& p) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < p.size(); ++i) a.push_back(p(i));
  return a;
}

Json int_vector_json(const IntVector& p) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < p.size(); ++i) a.push_back(p(i));
  return a;
}

}  // namespace

Json to_json(const Grid& grid) {
  return Json{{"shift", vector_json(grid.shift())},
              {"top_scale", grid.top_scale()},
              {"depth", grid.depth()},
              {"dimension", grid.dimension()}};
}

Grid grid_from_json(const Json& j, int id) {
  try {
    const int dimension = j.at("dimension").get<int>();
    const auto shift = j.at("shift").get<std::vector<double>>();
    require(static_cast<int>(shift.size()) == dimension, "grid shift must have one coordinate per dimension");
    Point w(dimension);
    for (int i = 0; i < dimension; ++i) w(i) = shift[static_cast<std::size_t>(i)];
    return Grid(w, j.at("top_scale").get<int>(), j.at("depth").get<int>(), dimension, id);
  } catch (const Json::exception& e) {
    throw Error(std::string("invalid grid description: ") + e.what());
  }
}

Json to_json(const CellSpace& space) {
  return Json{{"dimension", space.dimension()},
              {"finest_side", space.finest_side()},
              {"lo", int_vector_json(space.lo())},
              {"extent", int_vector_json(space.extent())}};
}

CellSpace cell_space_from_json(const Json& j) {
  try {
    const int n = j.at("dimension").get<int>();
    const auto lo = j.at("lo").get<std::vector<std::int64_t>>();
    const auto extent = j.at("extent").get<std::vector<std::int64_t>>();
    require(static_cast<int>(lo.size()) == n && static_cast<int>(extent.size()) == n, "cell box has wrong arity");
    IntVector l(n), e(n);
    for (int i = 0; i < n; ++i) {
      l(i) = lo[static_cast<std::size_t>(i)];
      e(i) = extent[static_cast<std::size_t>(i)];
    }
    return CellSpace(n, j.at("finest_side").get<double>(), l, e);
  } catch (const Json::exception& e) {
    throw Error(std::string("invalid cell space description: ") + e.what());
  }
}

Matrix read_matrix_csv(const std::string& path) {
  auto in = open(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    for (auto field : split(line)) row.push_back(parse_double(field, "matrix entry in '" + path + "'"));
    if (!rows.empty() && row.size() != rows[0].size()) throw Error("ragged matrix in '" + path + "'");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error("empty matrix in '" + path + "'");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

void write_matrix_csv(const Matrix& m, std::ostream& out) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
}

void write_measure_csv(const AtomicMeasure& mu, std::ostream& out) {
  const CellSpace& s = mu.space();
  out << "# " << to_json(s).dump() << '\n';
  for (int i = 0; i < s.dimension(); ++i) out << 'i' << i << ',';
  out << "weight\n";
  for (std::size_t c = 0; c < s.size(); ++c) {
    if (mu.weight(c) == 0.0) continue;
    const IntVector cell = s.cell(c);
    for (int i = 0; i < s.dimension(); ++i) out << cell(i) << ',';
    out << format_double(mu.weight(c)) << '\n';
  }
}

AtomicMeasure read_measure_csv(std::istream& in) {
  const CellSpace space = cell_space_from_json(header_line(in, "measure"));
  std::string line;
  std::getline(in, line);
  Vector w = Vector::Zero(static_cast<Eigen::Index>(space.size()));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split(line);
    if (static_cast<int>(fields.size()) != space.dimension() + 1) throw Error("measure row has wrong arity: " + line);
    IntVector cell(space.dimension());
    for (int i = 0; i < space.dimension(); ++i) cell(i) = parse_int(fields[static_cast<std::size_t>(i)], "cell index");
    const auto c = space.linear(cell);
    if (!c) throw Error("measure row outside the cell box: " + line);
    w(static_cast<Eigen::Index>(*c)) = parse_double(fields.back(), "weight");
  }
  return AtomicMeasure(space, w);
}

AtomicMeasure read_measure_csv(const std::string& path) {
  auto in = open(path);
  return read_measure_csv(in);
}

void write_system_csv(const AccretiveSystem& system, std::ostream& out) {
  const Json header{{"mode", to_string(system.mode)},
                    {"C", system.C},
                    {"s", system.s},
                    {"generator", system.generator},
                    {"grid", to_json(system.grid)}};
  out << "# " << header.dump() << '\n' << "family,cube_id,cell_index,value\n";
  for (int family = 1; family <= 2; ++family) {
    const auto& bs = family == 1 ? system.b1 : system.b2;
    for (std::size_t id = 0; id < bs.size(); ++id) {
      const auto first = system.grid.first_leaf(system.grid.cube(id));
      for (Eigen::Index i = 0; i < bs[id].size(); ++i) {
        out << family << ',' << id << ',' << first + static_cast<std::uint64_t>(i) << ',' << format_double(bs[id](i))
            << '\n';
      }
    }
  }
}

AccretiveSystem read_system_csv(std::istream& in) {
  const Json header = header_line(in, "system");
  AccretiveSystem sys;
  try {
    sys.grid = grid_from_json(header.at("grid"));
    sys.mode = accretive_mode_from_string(header.at("mode").get<std::string>());
    sys.C = header.at("C").get<double>();
    sys.s = header.at("s").get<double>();
    sys.generator = header.value("generator", std::string("file"));
  } catch (const Json::exception& e) {
    throw Error(std::string("invalid system header: ") + e.what());
  }
  const Grid& g = sys.grid;
  sys.b1.resize(g.cube_count());
  sys.b2.resize(g.cube_count());
  for (std::size_t id = 0; id < g.cube_count(); ++id) {
    sys.b1[id] = Vector::Zero(static_cast<Eigen::Index>(g.leaf_span(g.cube(id))));
    sys.b2[id] = sys.b1[id];
  }
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 4) throw Error("system row has wrong arity: " + line);
    const auto family = parse_int(f[0], "family");
    const auto id = static_cast<std::size_t>(parse_int(f[1], "cube id"));
    const auto leaf = static_cast<std::uint64_t>(parse_int(f[2], "cell index"));
    require((family == 1 || family == 2) && id < g.cube_count(), "system row out of range: " + line);
    const Cube q = g.cube(id);
    const auto first = g.first_leaf(q);
    require(leaf >= first && leaf < first + g.leaf_span(q), "system value outside its cube: " + line);
    (family == 1 ? sys.b1 : sys.b2)[id](static_cast<Eigen::Index>(leaf - first)) = parse_double(f[3], "value");
  }
  return sys;
}

Json to_json(const StoppingForest& forest) {
  const auto& p = forest.params();
  Json params{{"mode", p.mode}, {"delta", p.delta}, {"s", p.s}};
  params["tau_measured"] = std::isnan(p.tau_measured) ? Json(nullptr) : Json(p.tau_measured);
  return Json{{"grid", to_json(forest.grid())}, {"generations", forest.generations()}, {"params", params}};
}

StoppingForest forest_from_json(const Json& j) {
  try {
    StoppingForest::Params p;
    const Json& params = j.at("params");
    p.mode = params.at("mode").get<std::string>();
    p.delta = params.at("delta").get<double>();
    p.s = params.at("s").get<double>();
    if (!params.at("tau_measured").is_null()) p.tau_measured = params.at("tau_measured").get<double>();
    return StoppingForest(grid_from_json(j.at("grid")), j.at("generations").get<std::vector<std::vector<std::size_t>>>(),
                          p);
  } catch (const Json::exception& e) {
    throw Error(std::string("invalid forest description: ") + e.what());
  }
}

}  // namespace dytb
