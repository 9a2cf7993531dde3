#pragma once

// Little-endian binary records and a JSON debug form for lattices and
// constraint masks. The binary layout is: magic (8 bytes), version (u32),
// T (u32), U (u32), then row-major payload. Golden-file tests compare the
// binary form bit-exactly.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "nert/errors.hpp"
#include "nert/lattice.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary lattice records assume a little-endian host");

namespace nert {

inline constexpr char kLatticeMagic[8] = {'N', 'R', 'T', 'L', 'A', 'T', 'T', '\0'};
inline constexpr char kMaskMagic[8] = {'N', 'R', 'T', 'M', 'A', 'S', 'K', '\0'};
inline constexpr std::uint32_t kLatticeVersion = 1;

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw ParseError("record truncated");
  return v;
}
inline void write_row_major(std::ostream& os, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double d = m(r, c);
      os.write(reinterpret_cast<const char*>(&d), sizeof d);
    }
}
inline void read_row_major(std::istream& is, Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      double d = 0;
      is.read(reinterpret_cast<char*>(&d), sizeof d);
      if (!is) throw ParseError("record truncated");
      m(r, c) = d;
    }
}

}  // namespace detail

inline void write_lattice(const Lattice& lat, std::ostream& os) {
  lat.validate();
  os.write(kLatticeMagic, 8);
  detail::write_u32(os, kLatticeVersion);
  detail::write_u32(os, static_cast<std::uint32_t>(lat.frames()));
  detail::write_u32(os, static_cast<std::uint32_t>(lat.labels()));
  detail::write_row_major(os, lat.label);
  detail::write_row_major(os, lat.blank);
}

inline Lattice read_lattice(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kLatticeMagic, 8) != 0)
    throw ParseError("bad lattice magic");
  if (detail::read_u32(is) != kLatticeVersion)
    throw ParseError("unsupported lattice version");
  const int T = static_cast<int>(detail::read_u32(is));
  const int U = static_cast<int>(detail::read_u32(is));
  Lattice lat;
  lat.label.resize(T, U);
  lat.blank.resize(T, U + 1);
  detail::read_row_major(is, lat.label);
  detail::read_row_major(is, lat.blank);
  lat.validate();
  return lat;
}

inline void write_mask(const ConstraintMask& m, std::ostream& os) {
  os.write(kMaskMagic, 8);
  detail::write_u32(os, kLatticeVersion);
  detail::write_u32(os, static_cast<std::uint32_t>(m.blank.rows()));
  detail::write_u32(os, static_cast<std::uint32_t>(m.blank.cols() - 1));
  detail::write_u32(os, static_cast<std::uint32_t>(m.delta_t));
  detail::write_u32(os, static_cast<std::uint32_t>(m.delta_u));
  auto dump = [&os](const BoolMatrix& b) {
    for (Eigen::Index r = 0; r < b.rows(); ++r)
      for (Eigen::Index c = 0; c < b.cols(); ++c) {
        const char v = b(r, c) ? 1 : 0;
        os.write(&v, 1);
      }
  };
  dump(m.label);
  dump(m.blank);
}

inline ConstraintMask read_mask(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMaskMagic, 8) != 0)
    throw ParseError("bad mask magic");
  if (detail::read_u32(is) != kLatticeVersion)
    throw ParseError("unsupported mask version");
  const int T = static_cast<int>(detail::read_u32(is));
  const int U = static_cast<int>(detail::read_u32(is));
  ConstraintMask m;
  m.delta_t = static_cast<int>(detail::read_u32(is));
  m.delta_u = static_cast<int>(detail::read_u32(is));
  m.label.resize(T, U);
  m.blank.resize(T, U + 1);
  auto slurp = [&is](BoolMatrix& b) {
    for (Eigen::Index r = 0; r < b.rows(); ++r)
      for (Eigen::Index c = 0; c < b.cols(); ++c) {
        char v = 0;
        is.read(&v, 1);
        if (!is) throw ParseError("record truncated");
        b(r, c) = (v != 0);
      }
  };
  slurp(m.label);
  slurp(m.blank);
  return m;
}

// JSON debug form; -inf is encoded as null (JSON has no infinities).
inline nlohmann::json lattice_to_json(const Lattice& lat) {
  auto rows = [](const Eigen::MatrixXd& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (m(r, c) == kLogZero)
          row.push_back(nullptr);
        else
          row.push_back(m(r, c));
      }
      out.push_back(row);
    }
    return out;
  };
  return {{"type", "lattice"},
          {"version", kLatticeVersion},
          {"T", lat.frames()},
          {"U", lat.labels()},
          {"label", rows(lat.label)},
          {"blank", rows(lat.blank)}};
}

inline Lattice lattice_from_json(const nlohmann::json& j) {
  const int T = j.at("T").get<int>();
  const int U = j.at("U").get<int>();
  Lattice lat;
  lat.label.resize(T, U);
  lat.blank.resize(T, U + 1);
  auto fill = [](const nlohmann::json& rows, Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const auto& v = rows.at(r).at(c);
        m(r, c) = v.is_null() ? kLogZero : v.get<double>();
      }
  };
  fill(j.at("label"), lat.label);
  fill(j.at("blank"), lat.blank);
  lat.validate();
  return lat;
}

inline void save_lattice_file(const Lattice& lat, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParseError("cannot open for write: " + path);
  write_lattice(lat, os);
}

inline Lattice load_lattice_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open: " + path);
  return read_lattice(is);
}

}  // namespace nert
