#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>

namespace relu_sparsity::binary {

// Explicit little-endian encoding, independent of host byte order.
void write_u8(std::ostream& os, std::uint8_t v);
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_i64(std::ostream& os, std::int64_t v);
void write_f32(std::ostream& os, float v);
void write_f64(std::ostream& os, double v);
void write_f32s(std::ostream& os, std::span<const float> values);
void write_string(std::ostream& os, const std::string& s);
void write_magic(std::ostream& os, const char (&magic)[5]);

// Readers throw FormatError on truncated input.
std::uint8_t read_u8(std::istream& is);
std::uint32_t read_u32(std::istream& is);
std::uint64_t read_u64(std::istream& is);
std::int64_t read_i64(std::istream& is);
float read_f32(std::istream& is);
double read_f64(std::istream& is);
void read_f32s(std::istream& is, std::span<float> out);
std::string read_string(std::istream& is);
void expect_magic(std::istream& is, const char (&magic)[5]);

}  // namespace relu_sparsity::binary
