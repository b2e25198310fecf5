#include "semtest/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace semtest {

namespace {

static_assert(std::endian::native == std::endian::little, "weights codec assumes a little-endian host");

constexpr char kMagic[4] = {'N', 'N', 'W', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32(const std::string& tensor, const char* what) {
    need(4, tensor, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64(const std::string& tensor) {
    need(8, tensor, "payload");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }

  std::string text(std::size_t n, const std::string& tensor) {
    need(n, tensor, "name");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, const std::string& tensor, const char* what) const {
    if (remaining() < n) {
      throw WeightsError(WeightsError::Kind::Truncated, tensor,
                         std::string("weights file truncated while reading ") + what +
                             (tensor.empty() ? std::string() : " of tensor '" + tensor + "'"));
    }
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_weights(const NamedTensors& tensors) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : tensor.data()) put_f64(out, v);
  }
  return out;
}

NamedTensors decode_weights(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw WeightsError(WeightsError::Kind::BadMagic, "", "weights file does not start with magic \"NNW1\"");
  }
  Reader reader(bytes.subspan(4));
  const std::uint32_t count = reader.u32("", "tensor count");
  NamedTensors tensors;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string placeholder = "#" + std::to_string(t);
    const std::uint32_t name_length = reader.u32(placeholder, "name length");
    const std::string name = reader.text(name_length, placeholder);
    const std::uint32_t rank = reader.u32(name, "rank");
    if (rank == 0) {
      throw WeightsError(WeightsError::Kind::InconsistentShape, name, "tensor '" + name + "' has rank 0");
    }
    Shape shape;
    std::uint64_t numel = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const std::uint32_t d = reader.u32(name, "shape table");
      if (d == 0) {
        throw WeightsError(WeightsError::Kind::InconsistentShape, name, "tensor '" + name + "' has a zero dimension");
      }
      shape.push_back(d);
      numel *= d;
    }
    if (numel > reader.remaining() / 8) {
      throw WeightsError(WeightsError::Kind::Truncated, name,
                         "weights file truncated in payload of tensor '" + name + "': shape " + shape_string(shape) +
                             " needs " + std::to_string(numel * 8) + " bytes, " +
                             std::to_string(reader.remaining()) + " remain");
    }
    std::vector<double> data(numel);
    for (auto& v : data) v = reader.f64(name);
    tensors.emplace_back(name, Tensor(std::move(shape), std::move(data)));
  }
  if (reader.remaining() != 0) {
    throw WeightsError(WeightsError::Kind::TrailingData, "",
                       std::to_string(reader.remaining()) + " unexpected bytes after the last tensor");
  }
  return tensors;
}

void save_weights(const NamedTensors& tensors, const std::filesystem::path& path) {
  const auto bytes = encode_weights(tensors);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WeightsError(WeightsError::Kind::Io, "", "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw WeightsError(WeightsError::Kind::Io, "", "failed writing " + path.string());
}

NamedTensors load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WeightsError(WeightsError::Kind::Io, "", "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_weights(bytes);
}

void save_weights(const GeneratorModel& model, const std::filesystem::path& path) {
  save_weights(model.to_named(), path);
}
void save_weights(const ClassifierModel& model, const std::filesystem::path& path) {
  save_weights(model.to_named(), path);
}
void save_weights(const DiscriminatorModel& model, const std::filesystem::path& path) {
  save_weights(model.to_named(), path);
}

GeneratorModel load_generator(const std::filesystem::path& path) {
  return GeneratorModel::from_named(load_weights(path));
}
ClassifierModel load_classifier(const std::filesystem::path& path) {
  return ClassifierModel::from_named(load_weights(path));
}
DiscriminatorModel load_discriminator(const std::filesystem::path& path) {
  return DiscriminatorModel::from_named(load_weights(path));
}

}  // namespace semtest
