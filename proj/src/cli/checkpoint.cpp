#include <cstring>
#include <fstream>

#include "grade/cli.hpp"

namespace grade::cli {

namespace {

constexpr char kMagic[8] = {'G', 'R', 'A', 'D', 'E', 'C', 'K', 'P'};

void put_u64(std::ostream& out, std::uint64_t x) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw Error("checkpoint: truncated file");
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return x;
}

// Row-major, little-endian doubles.
void put_matrix(std::ostream& out, const Mat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::uint64_t bits;
      const double v = m(r, c);
      std::memcpy(&bits, &v, sizeof bits);
      put_u64(out, bits);
    }
  }
}

Mat get_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const std::uint64_t bits = get_u64(in);
      double v;
      std::memcpy(&v, &bits, sizeof v);
      m(r, c) = v;
    }
  }
  return m;
}

json range_json(const StepRange& r) { return json::array({r.first, r.last}); }

StepRange range_from(const nlohmann::json& j) {
  return {j.at(0).get<int>(), j.at(1).get<int>()};
}

struct NamedArray {
  std::string name;
  Mat* value;
};

std::vector<NamedArray> state_arrays(StepState& s) {
  return {{"state.phi", &s.phi},           {"state.beta", &s.beta},
          {"state.phi_mean", &s.phi_mean}, {"state.phi_log_var", &s.phi_log_var},
          {"state.beta_mean", &s.beta_mean}, {"state.beta_log_var", &s.beta_log_var},
          {"state.h_node", &s.h_node},     {"state.h_comm", &s.h_comm},
          {"state.pi", &s.pi}};
}

std::vector<NamedArray> model_arrays(GradeModel& model) {
  std::vector<NamedArray> out;
  for (auto* p : model.parameters()) out.push_back({p->name(), &p->value});
  return out;
}

}  // namespace

void save_checkpoint(const fs::path& path, const GradeModel& model, const TemporalSplit& split) {
  GradeModel copy = model;
  StepState last = mean_trajectory(copy, split.train.last).back();

  auto arrays = model_arrays(copy);
  for (auto& a : state_arrays(last)) arrays.push_back(a);

  json header;
  header["format_version"] = kCheckpointVersion;
  header["num_vertices"] = model.num_vertices();
  header["config"] = train_config_to_json(model.config);
  header["split"] = {{"train", range_json(split.train)},
                     {"val", range_json(split.val)},
                     {"test", range_json(split.test)}};
  header["state_step"] = last.t;
  json shapes = json::array();
  for (const auto& a : arrays) {
    shapes.push_back({{"name", a.name}, {"shape", {a.value->rows(), a.value->cols()}}});
  }
  header["arrays"] = shapes;

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  const std::string text = header.dump();
  out.write(kMagic, sizeof kMagic);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& a : arrays) put_matrix(out, *a.value);
  if (!out) throw Error("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw Error("not a checkpoint file: " + path.string());
  }
  const std::uint64_t length = get_u64(in);
  if (length > (1u << 30)) throw Error("checkpoint: implausible header length");
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) {
    throw Error("checkpoint: truncated header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("checkpoint: malformed header: ") + e.what());
  }
  const int version = header.at("format_version").get<int>();
  if (version != kCheckpointVersion) {
    throw Error("checkpoint format version " + std::to_string(version) +
                " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }

  Checkpoint ckp;
  const TrainConfig config = train_config_from_json(header.at("config"));
  ckp.model = GradeModel(header.at("num_vertices").get<std::size_t>(), config);
  const auto& split = header.at("split");
  ckp.split = {range_from(split.at("train")), range_from(split.at("val")),
               range_from(split.at("test"))};
  ckp.last_state.t = header.at("state_step").get<int>();

  auto expected = model_arrays(ckp.model);
  for (auto& a : state_arrays(ckp.last_state)) expected.push_back(a);
  const auto& listed = header.at("arrays");
  if (listed.size() != expected.size()) throw Error("checkpoint: unexpected array count");
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& entry = listed.at(i);
    const auto name = entry.at("name").get<std::string>();
    if (name != expected[i].name) {
      throw Error("checkpoint: expected array " + expected[i].name + ", found " + name);
    }
    const auto rows = entry.at("shape").at(0).get<Eigen::Index>();
    const auto cols = entry.at("shape").at(1).get<Eigen::Index>();
    Mat* target = expected[i].value;
    const bool is_state = name.rfind("state.", 0) == 0;
    if (!is_state && (rows != target->rows() || cols != target->cols())) {
      throw ShapeError("checkpoint: shape mismatch for " + name);
    }
    *target = get_matrix(in, rows, cols);
  }
  for (auto* p : ckp.model.parameters()) p->zero_grad();
  if (in.peek() != std::char_traits<char>::eof()) throw Error("checkpoint: trailing bytes");
  return ckp;
}

}  // namespace grade::cli
