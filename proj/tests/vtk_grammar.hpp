// SPDX-License-Identifier: Apache-2.0
//
// Minimal validator for legacy ASCII VTK unstructured grids: checks the
// section grammar, declared counts, index ranges and numeric tokens.
#pragma once

#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

namespace vtk_check {

struct Result {
  bool ok = false;
  std::string error;
  long points = 0;
  long cells = 0;
  std::vector<std::string> point_scalars;
  std::vector<std::string> cell_scalars;
};

namespace detail {

inline bool is_number(const std::string& tok, bool integer) {
  if (tok.empty()) return false;
  char* end = nullptr;
  if (integer) {
    std::strtol(tok.c_str(), &end, 10);
  } else {
    std::strtod(tok.c_str(), &end);
  }
  return *end == '\0';
}

}  // namespace detail

inline Result validate(const std::string& doc) {
  Result r;
  std::istringstream in(doc);
  std::string line;
  auto fail = [&](const std::string& why) {
    r.ok = false;
    r.error = why;
    return r;
  };
  if (!std::getline(in, line) || line.rfind("# vtk DataFile Version ", 0) != 0) {
    return fail("missing version line");
  }
  if (!std::getline(in, line) || line.empty() || line.size() > 256) return fail("bad title line");
  if (!std::getline(in, line) || line != "ASCII") return fail("expected ASCII");
  if (!std::getline(in, line) || line != "DATASET UNSTRUCTURED_GRID") {
    return fail("expected DATASET UNSTRUCTURED_GRID");
  }

  std::string kw;
  std::string type;
  if (!(in >> kw >> r.points >> type) || kw != "POINTS" || r.points < 0) return fail("bad POINTS");
  if (type != "double" && type != "float") return fail("bad POINTS type");
  for (long i = 0; i < 3 * r.points; ++i) {
    std::string tok;
    if (!(in >> tok) || !detail::is_number(tok, false)) return fail("bad point coordinate");
  }

  long size = 0;
  if (!(in >> kw >> r.cells >> size) || kw != "CELLS") return fail("bad CELLS");
  long consumed = 0;
  for (long c = 0; c < r.cells; ++c) {
    long n = 0;
    if (!(in >> n) || n < 1) return fail("bad cell arity");
    consumed += n + 1;
    for (long k = 0; k < n; ++k) {
      long idx = -1;
      if (!(in >> idx) || idx < 0 || idx >= r.points) return fail("cell index out of range");
    }
  }
  if (consumed != size) return fail("CELLS size mismatch");

  long ntypes = 0;
  if (!(in >> kw >> ntypes) || kw != "CELL_TYPES" || ntypes != r.cells) return fail("bad CELL_TYPES");
  for (long c = 0; c < ntypes; ++c) {
    long t = 0;
    if (!(in >> t) || t < 1 || t > 42) return fail("bad cell type");
  }

  while (in >> kw) {
    long count = 0;
    if (kw != "POINT_DATA" && kw != "CELL_DATA") return fail("unexpected keyword " + kw);
    if (!(in >> count)) return fail("bad data count");
    const bool point = kw == "POINT_DATA";
    if (count != (point ? r.points : r.cells)) return fail(kw + " count mismatch");
    std::string scalars, name, dtype, lut, lut_name;
    int ncomp = 0;
    if (!(in >> scalars >> name >> dtype >> ncomp) || scalars != "SCALARS" || ncomp != 1) {
      return fail("bad SCALARS header");
    }
    if (!(in >> lut >> lut_name) || lut != "LOOKUP_TABLE") return fail("missing LOOKUP_TABLE");
    const bool integer = dtype == "int" || dtype == "long" || dtype == "short";
    for (long k = 0; k < count; ++k) {
      std::string tok;
      if (!(in >> tok) || !detail::is_number(tok, integer)) return fail("bad scalar value");
    }
    (point ? r.point_scalars : r.cell_scalars).push_back(name + ":" + dtype);
  }
  r.ok = true;
  return r;
}

}  // namespace vtk_check
