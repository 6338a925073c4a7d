#include "pdedev/tasks/vtk.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <utility>

#include <fmt/format.h>

#include "pdedev/error.hpp"

namespace pdedev::tasks {

namespace {

constexpr std::string_view kMagic = "# vtk DataFile Version 3.0";

class Tokens {
 public:
  explicit Tokens(std::string_view text) : text_(text) {}

  bool done() {
    skip();
    return pos_ >= text_.size();
  }
  std::string_view next() {
    skip();
    if (pos_ >= text_.size()) throw IoError("VTK: unexpected end of file");
    const auto start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    return text_.substr(start, pos_ - start);
  }
  void expect(std::string_view word) {
    const auto t = next();
    if (t != word) throw IoError(fmt::format("VTK: expected '{}', found '{}'", word, t));
  }
  double number() {
    const auto t = next();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
      throw IoError(fmt::format("VTK: bad number '{}'", t));
    }
    return v;
  }
  long integer() {
    const auto t = next();
    long v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
      throw IoError(fmt::format("VTK: bad integer '{}'", t));
    }
    return v;
  }

 private:
  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  std::string_view text_;
  std::size_t pos_ = 0;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string attribute(const std::string& tag, const std::string& name) {
  const std::regex re(name + "\\s*=\\s*\"([^\"]*)\"");
  std::smatch m;
  if (std::regex_search(tag, m, re)) return m[1].str();
  return {};
}

}  // namespace

const VtkArray* VtkDataset::find(std::string_view name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

std::vector<std::string> VtkDataset::names() const {
  std::vector<std::string> out;
  for (const auto& a : arrays) out.push_back(a.name);
  return out;
}

lbm::ScalarField VtkDataset::scalar(std::string_view name) const {
  const VtkArray* a = find(name);
  if (!a || a->components != 1) throw IoError(fmt::format("VTK: no scalar array '{}'", name));
  lbm::ScalarField out(nx, ny);
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) out(x, y) = a->values[static_cast<std::size_t>(y) * nx + x];
  }
  return out;
}

lbm::VectorField VtkDataset::vector(std::string_view name) const {
  const VtkArray* a = find(name);
  if (!a || a->components != 3) throw IoError(fmt::format("VTK: no vector array '{}'", name));
  lbm::VectorField out(nx, ny);
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) {
      const std::size_t k = (static_cast<std::size_t>(y) * nx + x) * 3;
      out(x, y, 0) = a->values[k];
      out(x, y, 1) = a->values[k + 1];
    }
  }
  return out;
}

VtkDataset make_dataset(const lbm::ScalarField& scalar, std::string_view scalar_name,
                        const lbm::VectorField& vector, std::string_view vector_name) {
  lbm::require_same_shape(scalar, vector, "make_dataset");
  VtkDataset d;
  d.nx = scalar.nx();
  d.ny = scalar.ny();
  VtkArray s{std::string(scalar_name), 1, {}};
  VtkArray v{std::string(vector_name), 3, {}};
  s.values.reserve(scalar.nodes());
  v.values.reserve(3 * scalar.nodes());
  for (int y = 0; y < d.ny; ++y) {
    for (int x = 0; x < d.nx; ++x) {
      s.values.push_back(scalar(x, y));
      v.values.push_back(vector(x, y, 0));
      v.values.push_back(vector(x, y, 1));
      v.values.push_back(0.0);
    }
  }
  d.arrays.push_back(std::move(s));
  d.arrays.push_back(std::move(v));
  return d;
}

std::string render_vtk(const VtkDataset& d, std::string_view title) {
  fmt::memory_buffer out;
  std::string clean(title.substr(0, 255));
  std::replace(clean.begin(), clean.end(), '\n', ' ');
  fmt::format_to(std::back_inserter(out), "{}\n{}\nASCII\nDATASET STRUCTURED_POINTS\n", kMagic,
                 clean.empty() ? "pdedev" : clean);
  fmt::format_to(std::back_inserter(out), "DIMENSIONS {} {} 1\nSPACING 1 1 1\nORIGIN 0 0 0\n",
                 d.nx, d.ny);
  const std::size_t n = static_cast<std::size_t>(d.nx) * d.ny;
  fmt::format_to(std::back_inserter(out), "POINT_DATA {}\n", n);
  for (const auto& a : d.arrays) {
    if (a.values.size() != n * a.components) {
      throw ShapeError(fmt::format("VTK array '{}' has {} values, expected {}", a.name,
                                   a.values.size(), n * a.components));
    }
    if (a.components == 1) {
      fmt::format_to(std::back_inserter(out), "SCALARS {} double 1\nLOOKUP_TABLE default\n", a.name);
      for (double v : a.values) fmt::format_to(std::back_inserter(out), "{:.15g}\n", v);
    } else if (a.components == 3) {
      fmt::format_to(std::back_inserter(out), "VECTORS {} double\n", a.name);
      for (std::size_t k = 0; k < n; ++k) {
        fmt::format_to(std::back_inserter(out), "{:.15g} {:.15g} {:.15g}\n", a.values[3 * k],
                       a.values[3 * k + 1], a.values[3 * k + 2]);
      }
    } else {
      throw ShapeError("VTK arrays must have 1 or 3 components");
    }
  }
  return fmt::to_string(out);
}

void write_vtk(const std::string& path, const VtkDataset& data, std::string_view title) {
  const std::string text = render_vtk(data, title);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for " + path);
}

VtkDataset parse_vtk(std::string_view text) {
  if (!text.starts_with(kMagic)) throw IoError("VTK: missing legacy header");
  // Skip the magic and title lines; everything after is whitespace separated.
  std::size_t pos = text.find('\n');
  if (pos != std::string_view::npos) pos = text.find('\n', pos + 1);
  if (pos == std::string_view::npos) throw IoError("VTK: truncated header");
  Tokens tok(text.substr(pos + 1));
  tok.expect("ASCII");
  tok.expect("DATASET");
  tok.expect("STRUCTURED_POINTS");
  VtkDataset d;
  long points = -1;
  while (points < 0) {
    const auto key = tok.next();
    if (key == "DIMENSIONS") {
      d.nx = static_cast<int>(tok.integer());
      d.ny = static_cast<int>(tok.integer());
      if (tok.integer() != 1) throw IoError("VTK: only 2-D data (nz = 1) is supported");
    } else if (key == "SPACING" || key == "ORIGIN" || key == "ASPECT_RATIO") {
      tok.number();
      tok.number();
      tok.number();
    } else if (key == "POINT_DATA") {
      points = tok.integer();
    } else {
      throw IoError(fmt::format("VTK: unexpected keyword '{}'", key));
    }
  }
  if (d.nx <= 0 || d.ny <= 0 || points != static_cast<long>(d.nx) * d.ny) {
    throw IoError("VTK: DIMENSIONS and POINT_DATA disagree");
  }
  while (!tok.done()) {
    const auto kind = tok.next();
    VtkArray a;
    a.name = std::string(tok.next());
    const auto type = tok.next();
    if (type != "double" && type != "float") throw IoError("VTK: unsupported data type");
    if (kind == "SCALARS") {
      tok.expect("1");
      tok.expect("LOOKUP_TABLE");
      tok.next();
      a.components = 1;
    } else if (kind == "VECTORS") {
      a.components = 3;
    } else {
      throw IoError(fmt::format("VTK: unsupported attribute '{}'", kind));
    }
    const std::size_t n = static_cast<std::size_t>(points) * a.components;
    a.values.resize(n);
    for (std::size_t k = 0; k < n; ++k) a.values[k] = tok.number();
    if (d.find(a.name)) throw IoError(fmt::format("VTK: duplicate array '{}'", a.name));
    d.arrays.push_back(std::move(a));
  }
  return d;
}

VtkDataset read_vtk(const std::string& path) { return parse_vtk(slurp(path)); }

VtkDataset parse_vtu(std::string_view view) {
  const std::string text(view);
  if (text.find("<VTKFile") == std::string::npos) throw IoError("VTU: not a VTKFile document");
  const std::regex array_re("<DataArray([^>]*)>([^<]*)</DataArray>");
  std::vector<double> points;
  std::vector<VtkArray> arrays;
  auto block = [&](std::string_view open, std::string_view close) {
    const auto a = text.find(open);
    const auto b = a == std::string::npos ? a : text.find(close, a);
    return std::pair{a, b};
  };
  const auto [points_begin, points_end] = block("<Points>", "</Points>");
  const auto [data_begin, data_end] = block("<PointData", "</PointData>");
  auto inside = [](std::size_t at, std::size_t begin, std::size_t end) {
    return begin != std::string::npos && end != std::string::npos && at > begin && at < end;
  };
  for (auto it = std::sregex_iterator(text.begin(), text.end(), array_re);
       it != std::sregex_iterator(); ++it) {
    const std::string attrs = (*it)[1].str();
    const auto at = static_cast<std::size_t>(it->position());
    if (attribute(attrs, "format") != "ascii") throw IoError("VTU: only ascii arrays are supported");
    const std::string comps = attribute(attrs, "NumberOfComponents");
    VtkArray a;
    a.name = attribute(attrs, "Name");
    a.components = comps.empty() ? 1 : std::stoi(comps);
    const std::string body = (*it)[2].str();
    Tokens tok(body);
    while (!tok.done()) a.values.push_back(tok.number());
    if (inside(at, points_begin, points_end)) {
      points = std::move(a.values);
    } else if (inside(at, data_begin, data_end)) {
      if (a.components == 2) {
        std::vector<double> padded;
        for (std::size_t k = 0; k + 1 < a.values.size(); k += 2) {
          padded.insert(padded.end(), {a.values[k], a.values[k + 1], 0.0});
        }
        a.values = std::move(padded);
        a.components = 3;
      }
      arrays.push_back(std::move(a));
    }
  }
  if (points.empty() || points.size() % 3 != 0) throw IoError("VTU: no point coordinates");
  const std::size_t n = points.size() / 3;
  std::map<double, int> xs;
  std::map<double, int> ys;
  for (std::size_t k = 0; k < n; ++k) {
    xs[points[3 * k]] = 0;
    ys[points[3 * k + 1]] = 0;
  }
  VtkDataset d;
  d.nx = static_cast<int>(xs.size());
  d.ny = static_cast<int>(ys.size());
  if (static_cast<std::size_t>(d.nx) * d.ny != n) throw IoError("VTU: points do not form a grid");
  int i = 0;
  for (auto& [_, idx] : xs) idx = i++;
  i = 0;
  for (auto& [_, idx] : ys) idx = i++;
  for (auto& a : arrays) {
    if (a.values.size() != n * a.components) {
      throw IoError(fmt::format("VTU: array '{}' has the wrong length", a.name));
    }
    VtkArray ordered{a.name, a.components, std::vector<double>(a.values.size())};
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t dst =
          static_cast<std::size_t>(ys[points[3 * k + 1]]) * d.nx + xs[points[3 * k]];
      for (int c = 0; c < a.components; ++c) {
        ordered.values[dst * a.components + c] = a.values[k * a.components + c];
      }
    }
    d.arrays.push_back(std::move(ordered));
  }
  return d;
}

VtkDataset read_field_file(const std::string& path) {
  if (path.ends_with(".vtu")) return parse_vtu(slurp(path));
  return read_vtk(path);
}

double vtk_round(double v) {
  const std::string s = fmt::format("{:.15g}", v);
  double out = 0.0;
  std::from_chars(s.data(), s.data() + s.size(), out);
  return out;
}

}  // namespace pdedev::tasks
