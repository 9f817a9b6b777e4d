#include "threatlens/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "threatlens/errors.hpp"

namespace threatlens {

namespace {

constexpr char kMagic[8] = {'T', 'L', 'M', 'O', 'D', 'E', 'L', '\n'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

void put_f64(std::ostream& out, double d) {
  put_u64(out, std::bit_cast<std::uint64_t>(d));
}

void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

std::string get_string(std::istream& in) {
  const std::uint64_t len = get_u64(in);
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  return s;
}

void put_tensor(std::ostream& out, const std::string& name, const Mat& m) {
  put_string(out, name);
  put_u64(out, m.rows);
  put_u64(out, m.cols);
  for (double d : m.v) put_f64(out, d);
}

Mat get_tensor(std::istream& in, std::string& name) {
  name = get_string(in);
  const std::uint64_t rows = get_u64(in);
  const std::uint64_t cols = get_u64(in);
  Mat m(rows, cols);
  for (double& d : m.v) d = get_f64(in);
  return m;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write model file '" + path + "'");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read model file '" + path + "'");
  return in;
}

ModelType read_header(std::istream& in, const std::string& path) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw DataError("'" + path + "' is not a model file (bad magic)");
  }
  const std::uint32_t version = get_u32(in);
  if (version != kVersion) {
    throw DataError("unsupported model file version " +
                    std::to_string(version));
  }
  const std::uint32_t type = get_u32(in);
  if (type != 1 && type != 2) {
    throw DataError("unknown model type " + std::to_string(type));
  }
  return static_cast<ModelType>(type);
}

}  // namespace

void save_model(const LinearModel& model, const std::string& path) {
  std::ofstream out = open_out(path);
  out.write(kMagic, 8);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(ModelType::linear));

  nlohmann::json cfg;
  cfg["dimension"] = model.dimension;
  cfg["w_relevant"] = model.trained_with.w_relevant;
  cfg["w_irrelevant"] = model.trained_with.w_irrelevant;
  put_string(out, cfg.dump());

  put_u64(out, 0);  // no vocab

  put_u64(out, 2);
  Mat w(1, model.dimension);
  w.v = model.weights;
  put_tensor(out, "weights", w);
  Mat b(1, 1);
  b.v[0] = model.bias;
  put_tensor(out, "bias", b);
  if (!out) throw DataError("failed writing '" + path + "'");
}

void save_model(const TinyTransformer& model, const std::string& path) {
  std::ofstream out = open_out(path);
  out.write(kMagic, 8);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(ModelType::transformer));

  const TransformerConfig& tc = model.config();
  nlohmann::json cfg;
  cfg["d_model"] = tc.d_model;
  cfg["n_layers"] = tc.n_layers;
  cfg["n_heads"] = tc.n_heads;
  cfg["d_ff"] = tc.d_ff;
  cfg["max_len"] = tc.max_len;
  cfg["stage"] = model.stage();
  cfg["min_freq"] = model.vocab().min_freq();
  cfg["lr_scales"] = model.lr_scales();
  cfg["freeze"] = model.freeze_mask();
  put_string(out, cfg.dump());

  put_u64(out, model.vocab().size());
  for (const auto& token : model.vocab().tokens()) put_string(out, token);

  put_u64(out, model.params().size());
  for (const auto& p : model.params()) put_tensor(out, p.name, p.w);
  if (!out) throw DataError("failed writing '" + path + "'");
}

ModelType peek_model_type(const std::string& path) {
  std::ifstream in = open_in(path);
  return read_header(in, path);
}

LinearModel load_linear_model(const std::string& path) {
  std::ifstream in = open_in(path);
  if (read_header(in, path) != ModelType::linear) {
    throw DataError("'" + path + "' is not a linear model");
  }
  nlohmann::json cfg = nlohmann::json::parse(get_string(in));

  LinearModel model;
  model.dimension = cfg.at("dimension").get<std::uint32_t>();
  model.trained_with.w_relevant = cfg.at("w_relevant").get<double>();
  model.trained_with.w_irrelevant = cfg.at("w_irrelevant").get<double>();

  const std::uint64_t vocab_count = get_u64(in);
  for (std::uint64_t i = 0; i < vocab_count; ++i) get_string(in);

  const std::uint64_t n_tensors = get_u64(in);
  for (std::uint64_t i = 0; i < n_tensors; ++i) {
    std::string name;
    Mat m = get_tensor(in, name);
    if (name == "weights") {
      model.weights = std::move(m.v);
    } else if (name == "bias") {
      model.bias = m.v.at(0);
    }
  }
  if (!in) throw DataError("truncated model file '" + path + "'");
  if (model.weights.size() != model.dimension) {
    throw DataError("corrupt linear model '" + path + "'");
  }
  return model;
}

TinyTransformer load_transformer_model(const std::string& path) {
  std::ifstream in = open_in(path);
  if (read_header(in, path) != ModelType::transformer) {
    throw DataError("'" + path + "' is not a transformer model");
  }
  nlohmann::json cfg = nlohmann::json::parse(get_string(in));

  TransformerConfig tc;
  tc.d_model = cfg.at("d_model").get<std::size_t>();
  tc.n_layers = cfg.at("n_layers").get<std::size_t>();
  tc.n_heads = cfg.at("n_heads").get<std::size_t>();
  tc.d_ff = cfg.at("d_ff").get<std::size_t>();
  tc.max_len = cfg.at("max_len").get<std::size_t>();

  const std::uint64_t vocab_count = get_u64(in);
  std::vector<std::string> tokens;
  tokens.reserve(vocab_count);
  for (std::uint64_t i = 0; i < vocab_count; ++i) tokens.push_back(get_string(in));
  Vocab vocab =
      Vocab::from_tokens(std::move(tokens), cfg.at("min_freq").get<std::size_t>());

  TinyTransformer model(tc, std::move(vocab), /*seed=*/0);
  model.set_stage(cfg.at("stage").get<int>());
  const auto lr_scales = cfg.at("lr_scales").get<std::vector<double>>();
  const auto freeze = cfg.at("freeze").get<std::vector<std::uint8_t>>();
  for (std::size_t g = 0; g < freeze.size() && g <= tc.n_layers; ++g) {
    model.set_frozen(g, freeze[g] != 0);
  }
  for (std::size_t g = 0; g < lr_scales.size() && g <= tc.n_layers; ++g) {
    model.set_lr_scale(g, lr_scales[g]);
  }

  const std::uint64_t n_tensors = get_u64(in);
  for (std::uint64_t i = 0; i < n_tensors; ++i) {
    std::string name;
    Mat m = get_tensor(in, name);
    Param& p = model.param(name);
    if (p.w.rows != m.rows || p.w.cols != m.cols) {
      throw DataError("tensor '" + name + "' has unexpected shape in '" +
                      path + "'");
    }
    p.w = std::move(m);
  }
  if (!in) throw DataError("truncated model file '" + path + "'");
  return model;
}

AnyModel load_any_model(const std::string& path) {
  switch (peek_model_type(path)) {
    case ModelType::linear:
      return load_linear_model(path);
    default:
      return load_transformer_model(path);
  }
}

}  // namespace threatlens
