#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fgad/model.hpp"

// Flat parameter serialisation shared by the exchange path and checkpoints:
// a list of (group, layer index, kind, shape, row-major values) records.
namespace fgad {

struct ParamRecord {
  std::string group;
  std::uint32_t layer = 0;
  std::string kind;  // "weight", "bias", or Adam moments "m_weight", "v_weight", "m_bias", "v_bias"
  Matrix values;

  friend bool operator==(const ParamRecord&, const ParamRecord&) = default;
};

std::vector<ParamRecord> to_records(const LocalModel& model, std::span<const Group> groups,
                                    bool with_adam_moments = false);
/// Writes records back; every record must match an existing tensor shape.
void apply_records(LocalModel& model, std::span<const ParamRecord> records);

/// Concatenation of the groups' tensors in canonical order.
std::vector<double> flatten(const LocalModel& model, std::span<const Group> groups);
void unflatten(LocalModel& model, std::span<const Group> groups, std::span<const double> values);
std::size_t flat_size(const LocalModel& model, std::span<const Group> groups);

// Little-endian binary encoding; doubles are stored bit-exactly.
namespace wire {
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
void write_string(std::ostream& out, const std::string& s);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);
std::string read_string(std::istream& in);
}  // namespace wire

void write_records(std::ostream& out, std::span<const ParamRecord> records);
std::vector<ParamRecord> read_records(std::istream& in);

}  // namespace fgad
