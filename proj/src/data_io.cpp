#include "sfbd/data_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "sfbd/errors.hpp"
#include "sfbd/rng.hpp"

namespace sfbd {
namespace {

constexpr std::string_view kMagic = "SFBDDATA";
constexpr unsigned char kVersion = 1;

void append_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t read_u64_le(const char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
  return v;
}

std::uint64_t parse_u64(std::string_view s, const char* field) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw MalformedHeaderError(std::string("bad integer in header field ") + field);
  return v;
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string percent_encode(std::string_view s) {
  static constexpr char hex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (c == '%' || c == '\t' || c == '\n' || c == '\r' || c < 0x20) {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 0xF];
    } else {
      out += static_cast<char>(c);
    }
  }
  return out;
}

std::string percent_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%') {
      if (i + 2 >= s.size()) throw MalformedHeaderError("truncated escape");
      unsigned v = 0;
      auto [p, ec] = std::from_chars(s.data() + i + 1, s.data() + i + 3, v, 16);
      if (ec != std::errc{} || p != s.data() + i + 3)
        throw MalformedHeaderError("bad escape");
      out += static_cast<char>(v);
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  ds.validate();
  std::string buf(kMagic);
  buf.push_back(static_cast<char>(kVersion));
  buf += "d=" + std::to_string(ds.dim) + "\tn=" + std::to_string(ds.size()) +
         "\ttag=" + std::string(to_string(ds.tag)) +
         "\torigin=" + percent_encode(ds.origin) + "\tlineage=";
  for (std::size_t i = 0; i < ds.lineage.size(); ++i) {
    if (i) buf += ',';
    buf += std::to_string(ds.lineage[i]);
  }
  buf += '\n';
  for (double v : ds.points) append_u64_le(buf, std::bit_cast<std::uint64_t>(v));
  append_u64_le(buf, fnv1a64(buf));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(f)),
                        std::istreambuf_iterator<char>());

  if (buf.size() < kMagic.size() + 1 ||
      std::string_view(buf).substr(0, kMagic.size()) != kMagic)
    throw MalformedHeaderError("bad magic");
  if (static_cast<unsigned char>(buf[kMagic.size()]) != kVersion)
    throw MalformedHeaderError("unsupported version");
  const std::size_t header_start = kMagic.size() + 1;
  const std::size_t eol = buf.find('\n', header_start);
  if (eol == std::string::npos) throw MalformedHeaderError("missing header line");

  std::map<std::string, std::string, std::less<>> kv;
  std::string_view header(buf.data() + header_start, eol - header_start);
  while (!header.empty()) {
    const auto tab = header.find('\t');
    const auto field = header.substr(0, tab);
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) throw MalformedHeaderError("field without '='");
    kv.emplace(std::string(field.substr(0, eq)), std::string(field.substr(eq + 1)));
    header = tab == std::string_view::npos ? std::string_view{} : header.substr(tab + 1);
  }
  for (const char* key : {"d", "n", "tag", "origin", "lineage"})
    if (!kv.count(key)) throw MalformedHeaderError(std::string("missing field ") + key);

  Dataset ds;
  ds.dim = parse_u64(kv["d"], "d");
  const std::uint64_t n = parse_u64(kv["n"], "n");
  if (ds.dim == 0) throw MalformedHeaderError("d must be positive");
  try {
    ds.tag = parse_tag(kv["tag"]);
  } catch (const ValidationError&) {
    throw MalformedHeaderError("unknown tag");
  }
  ds.origin = percent_decode(kv["origin"]);
  std::string_view lin = kv["lineage"];
  while (!lin.empty()) {
    const auto comma = lin.find(',');
    ds.lineage.push_back(parse_u64(lin.substr(0, comma), "lineage"));
    lin = comma == std::string_view::npos ? std::string_view{} : lin.substr(comma + 1);
  }

  const std::size_t payload_start = eol + 1;
  const std::size_t count = static_cast<std::size_t>(n) * ds.dim;
  if (buf.size() < payload_start + count * 8 + 8)
    throw TruncatedPayloadError("payload shorter than header declares");
  if (buf.size() > payload_start + count * 8 + 8)
    throw MalformedHeaderError("trailing bytes after checksum");
  const std::size_t trailer = payload_start + count * 8;
  if (read_u64_le(buf.data() + trailer) !=
      fnv1a64(std::string_view(buf.data(), trailer)))
    throw ChecksumMismatchError("checksum mismatch in " + path.string());

  ds.points.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    ds.points[i] = std::bit_cast<double>(read_u64_le(buf.data() + payload_start + 8 * i));
  ds.validate();
  return ds;
}

void export_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  for (std::size_t j = 0; j < ds.dim; ++j) f << (j ? "," : "") << "x" << (j + 1);
  f << "\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto r = ds.row(i);
    for (std::size_t j = 0; j < ds.dim; ++j) f << (j ? "," : "") << format_double(r[j]);
    f << "\n";
  }
}

}  // namespace sfbd
