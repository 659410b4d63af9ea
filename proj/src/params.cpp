#include "fgad/params.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "fgad/error.hpp"

namespace fgad {
namespace {

static_assert(std::endian::native == std::endian::little, "wire format assumes a little-endian host");

Matrix* locate(LocalModel& model, const ParamRecord& r) {
  const Group g = group_from_name(r.group);
  LayerGroup& lg = model.group(g);
  if (r.layer >= lg.layers.size()) {
    throw FormatError("record " + r.group + "[" + std::to_string(r.layer) + "] beyond " +
                      std::to_string(lg.layers.size()) + " layers");
  }
  DenseLayer& l = lg.layers[r.layer];
  AdamMoments& mw = model.adam(g).moments[2 * r.layer];
  AdamMoments& mb = model.adam(g).moments[2 * r.layer + 1];
  if (r.kind == "weight") return &l.weight;
  if (r.kind == "bias") return &l.bias;
  if (r.kind == "m_weight") return &mw.m;
  if (r.kind == "v_weight") return &mw.v;
  if (r.kind == "m_bias") return &mb.m;
  if (r.kind == "v_bias") return &mb.v;
  throw FormatError("unknown record kind '" + r.kind + "'");
}

}  // namespace

std::vector<ParamRecord> to_records(const LocalModel& model, std::span<const Group> groups, bool with_adam_moments) {
  std::vector<ParamRecord> out;
  for (Group g : groups) {
    const LayerGroup& lg = model.group(g);
    const AdamState& st = model.adam(g);
    for (std::uint32_t i = 0; i < lg.layers.size(); ++i) {
      const std::string name(group_name(g));
      out.push_back({name, i, "weight", lg.layers[i].weight});
      out.push_back({name, i, "bias", lg.layers[i].bias});
      if (with_adam_moments) {
        out.push_back({name, i, "m_weight", st.moments[2 * i].m});
        out.push_back({name, i, "v_weight", st.moments[2 * i].v});
        out.push_back({name, i, "m_bias", st.moments[2 * i + 1].m});
        out.push_back({name, i, "v_bias", st.moments[2 * i + 1].v});
      }
    }
  }
  return out;
}

void apply_records(LocalModel& model, std::span<const ParamRecord> records) {
  for (const ParamRecord& r : records) {
    Matrix* dst = locate(model, r);
    if (!dst->same_shape(r.values)) {
      throw FormatError("record " + r.group + "[" + std::to_string(r.layer) + "]." + r.kind + " has shape " +
                        r.values.shape_string() + ", model expects " + dst->shape_string());
    }
    *dst = r.values;
  }
}

std::size_t flat_size(const LocalModel& model, std::span<const Group> groups) {
  std::size_t n = 0;
  for (Group g : groups) n += model.parameter_count(g);
  return n;
}

std::vector<double> flatten(const LocalModel& model, std::span<const Group> groups) {
  std::vector<double> out;
  out.reserve(flat_size(model, groups));
  for (Group g : groups)
    for (const Matrix* t : model.group(g).tensors()) out.insert(out.end(), t->values().begin(), t->values().end());
  return out;
}

void unflatten(LocalModel& model, std::span<const Group> groups, std::span<const double> values) {
  if (values.size() != flat_size(model, groups)) {
    throw ProtocolError("parameter vector has " + std::to_string(values.size()) + " scalars, expected " +
                        std::to_string(flat_size(model, groups)));
  }
  std::size_t offset = 0;
  for (Group g : groups) {
    for (Matrix* t : model.group(g).tensors()) {
      auto dst = t->values();
      std::copy(values.begin() + static_cast<std::ptrdiff_t>(offset),
                values.begin() + static_cast<std::ptrdiff_t>(offset + dst.size()), dst.begin());
      offset += dst.size();
    }
  }
}

namespace wire {

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void write_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

namespace {
template <class T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw FormatError("truncated parameter stream");
  return v;
}
}  // namespace

std::uint32_t read_u32(std::istream& in) { return read_pod<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return read_pod<std::uint64_t>(in); }
double read_f64(std::istream& in) { return read_pod<double>(in); }
std::string read_string(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  if (n > (std::uint64_t{1} << 32)) throw FormatError("implausible string length in parameter stream");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw FormatError("truncated parameter stream");
  return s;
}

}  // namespace wire

void write_records(std::ostream& out, std::span<const ParamRecord> records) {
  wire::write_u64(out, records.size());
  for (const ParamRecord& r : records) {
    wire::write_string(out, r.group);
    wire::write_u32(out, r.layer);
    wire::write_string(out, r.kind);
    wire::write_u64(out, r.values.rows());
    wire::write_u64(out, r.values.cols());
    out.write(reinterpret_cast<const char*>(r.values.values().data()),
              static_cast<std::streamsize>(r.values.size() * sizeof(double)));
  }
}

std::vector<ParamRecord> read_records(std::istream& in) {
  const std::uint64_t n = wire::read_u64(in);
  std::vector<ParamRecord> out;
  for (std::uint64_t i = 0; i < n; ++i) {
    ParamRecord r;
    r.group = wire::read_string(in);
    r.layer = wire::read_u32(in);
    r.kind = wire::read_string(in);
    const std::uint64_t rows = wire::read_u64(in);
    const std::uint64_t cols = wire::read_u64(in);
    if (rows * cols > (std::uint64_t{1} << 32)) throw FormatError("implausible tensor shape in parameter stream");
    std::vector<double> data(rows * cols);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw FormatError("truncated parameter stream");
    r.values = Matrix(rows, cols, std::move(data));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace fgad
