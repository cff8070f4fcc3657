#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "r2/error.hpp"
#include "r2/net.hpp"

namespace r2::net {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw ParseError("checkpoint truncated", 0, 0);
  }
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const MlpShape& shape, const ParamSet& params) {
  shape.validate();
  put_u64(out, shape.layer_sizes.size());
  for (int s : shape.layer_sizes) put_u64(out, static_cast<std::uint64_t>(s));
  const auto act = static_cast<std::uint8_t>(shape.output);
  out.put(static_cast<char>(act));
  put_u64(out, params.flat.size());
  out.write(reinterpret_cast<const char*>(params.flat.data()),
            static_cast<std::streamsize>(params.flat.size() * sizeof(double)));
}

void read_checkpoint(std::istream& in, MlpShape& shape, ParamSet& params) {
  const std::uint64_t layers = get_u64(in);
  if (layers < 2 || layers > 1024) throw ParseError("checkpoint: bad layer count", 0, 0);
  MlpShape s;
  for (std::uint64_t i = 0; i < layers; ++i) s.layer_sizes.push_back(static_cast<int>(get_u64(in)));
  const int act = in.get();
  if (act < 0 || act > 2) throw ParseError("checkpoint: bad output activation", 0, 0);
  s.output = static_cast<OutputActivation>(act);
  s.validate();
  const std::uint64_t n = get_u64(in);
  if (n != param_count(s)) throw ParseError("checkpoint: parameter count mismatch", 0, 0);
  ParamSet p;
  p.views = layout(s);
  p.flat.resize(n);
  if (!in.read(reinterpret_cast<char*>(p.flat.data()), static_cast<std::streamsize>(n * sizeof(double)))) {
    throw ParseError("checkpoint truncated", 0, 0);
  }
  shape = std::move(s);
  params = std::move(p);
}

}  // namespace r2::net
