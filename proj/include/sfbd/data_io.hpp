#pragma once

// Binary dataset format (".f64"):
//
//   bytes 0..7   magic "SFBDDATA"
//   byte  8      format version (1)
//   header line  tab-separated key=value pairs terminated by '\n':
//                d=<dim>  n=<count>  tag=<clean|noisy|denoised>
//                origin=<percent-encoded text>  lineage=<comma-separated u64>
//   payload      n*d IEEE-754 float64, little-endian, row-major
//   trailer      FNV-1a 64 of every preceding byte, little-endian u64
//
// Reading distinguishes MalformedHeaderError, TruncatedPayloadError and
// ChecksumMismatchError.

#include <filesystem>
#include <string>
#include <string_view>

#include "sfbd/dataset.hpp"

namespace sfbd {

void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

// Plot export: header x1,...,xd then one row per point.
void export_csv(const Dataset& ds, const std::filesystem::path& path);

// Shortest round-trip text form of a double ("%.17g").
std::string format_double(double v);

std::string percent_encode(std::string_view s);
std::string percent_decode(std::string_view s);

}  // namespace sfbd
