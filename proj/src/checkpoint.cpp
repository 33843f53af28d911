#include "satfusion/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "satfusion/errors.hpp"
#include "satfusion/random.hpp"

namespace satfusion {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'A', 'T', 'F', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void read_doubles(double* dst, std::size_t n) {
    need(n * sizeof(double));
    std::memcpy(dst, bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError("checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Json& header, const ParameterSet& params) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointFormatVersion);
  const std::string head = header.dump();
  put<std::uint64_t>(out, head.size());
  out += head;
  const std::size_t payload_start = out.size();
  put<std::uint64_t>(out, params.size());
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put<std::int64_t>(out, p.value.rows());
    put<std::int64_t>(out, p.value.cols());
    put<std::uint8_t>(out, p.trainable ? 1 : 0);
    out.append(reinterpret_cast<const char*>(p.value.data()),
               static_cast<std::size_t>(p.value.size()) * sizeof(double));
  }
  const std::uint64_t checksum =
      fnv1a(std::string_view(out).substr(0, out.size()).substr(payload_start));
  put<std::uint64_t>(out, checksum);
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw IoError("not a checkpoint (bad magic)");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointFormatVersion) {
    throw IoError("unsupported checkpoint format version " + std::to_string(version) +
                  " (expected " + std::to_string(kCheckpointFormatVersion) + ")");
  }
  const auto head_len = in.get<std::uint64_t>();
  Checkpoint ck;
  try {
    ck.header = Json::parse(in.take(head_len));
  } catch (const Json::exception& e) {
    throw IoError(std::string("corrupted checkpoint header: ") + e.what());
  }
  const std::size_t payload_start = in.pos();
  const auto count = in.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = in.get<std::uint32_t>();
    const std::string name = in.take(name_len);
    const auto rows = in.get<std::int64_t>();
    const auto cols = in.get<std::int64_t>();
    const bool trainable = in.get<std::uint8_t>() != 0;
    if (rows <= 0 || cols <= 0 || rows > (1 << 24) || cols > (1 << 24)) {
      throw IoError("corrupted checkpoint: bad shape for '" + name + "'");
    }
    ParamId id;
    try {
      id = ck.params.add(name, rows, cols, trainable);
    } catch (const std::exception& e) {
      throw IoError(std::string("corrupted checkpoint: ") + e.what());
    }
    in.read_doubles(ck.params[id].value.data(), static_cast<std::size_t>(rows * cols));
  }
  const std::size_t payload_end = in.pos();
  const auto checksum = in.get<std::uint64_t>();
  if (!in.done()) throw IoError("checkpoint has trailing bytes");
  if (checksum != fnv1a(std::string_view(bytes).substr(payload_start, payload_end - payload_start))) {
    throw IoError("checkpoint checksum mismatch");
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Json& header,
                     const ParameterSet& params) {
  write_file_atomic(path, serialize_checkpoint(header, params));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path));
}

}  // namespace satfusion
