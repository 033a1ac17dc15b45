#include "corex/persistence.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace corex {

namespace {

constexpr char kMagic[8] = {'C', 'R', 'X', 'M', 'O', 'D', 'E', 'L'};

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T>);
  unsigned char bytes[sizeof(T)];
  for (std::size_t k = 0; k < sizeof(T); ++k) bytes[k] = static_cast<unsigned char>((value >> (8 * k)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw DataError("model file truncated");
  T value = 0;
  for (std::size_t k = 0; k < sizeof(T); ++k) value |= static_cast<T>(bytes[k]) << (8 * k);
  return value;
}

void put_doubles(std::ostream& out, const std::vector<double>& values) {
  for (double v : values) put_le(out, std::bit_cast<std::uint64_t>(v));
}

std::vector<double> get_doubles(std::istream& in, std::size_t count) {
  std::vector<double> values(count);
  for (auto& v : values) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
  return values;
}

}  // namespace

nlohmann::json config_to_json(const FitConfig& c) {
  nlohmann::json anchors = nlohmann::json::array();
  for (const auto& a : c.anchors.entries()) {
    anchors.push_back({{"word", a.word}, {"factor", a.factor}, {"strength", a.strength}});
  }
  nlohmann::json j{
      {"n_factors", c.n_factors},
      {"max_iter", c.max_iter},
      {"tol", c.tol},
      {"patience", c.patience},
      {"seed", c.seed},
      {"damping", c.damping},
      {"smoothing", c.smoothing},
      {"default_strength", c.anchors.default_strength()},
      {"anchors", anchors},
      {"anchored_words_compete", c.anchored_words_compete},
      {"seed_from_anchors", c.seed_from_anchors},
  };
  j["freeze_structure_after"] =
      c.freeze_structure_after ? nlohmann::json(*c.freeze_structure_after) : nlohmann::json(nullptr);
  return j;
}

FitConfig config_from_json(const nlohmann::json& j) {
  try {
    FitConfig c;
    c.n_factors = j.at("n_factors").get<std::size_t>();
    c.max_iter = j.at("max_iter").get<std::size_t>();
    c.tol = j.at("tol").get<double>();
    c.patience = j.at("patience").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.damping = j.at("damping").get<double>();
    c.smoothing = j.at("smoothing").get<double>();
    c.anchored_words_compete = j.at("anchored_words_compete").get<bool>();
    c.seed_from_anchors = j.at("seed_from_anchors").get<bool>();
    if (!j.at("freeze_structure_after").is_null()) {
      c.freeze_structure_after = j.at("freeze_structure_after").get<std::size_t>();
    }
    c.anchors = AnchorSet(j.at("default_strength").get<double>());
    for (const auto& a : j.at("anchors")) {
      c.anchors.add(a.at("word").get<std::size_t>(), a.at("factor").get<std::size_t>(),
                    a.at("strength").get<double>());
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad config record: ") + e.what());
  } catch (const ValidationError& e) {
    throw DataError(std::string("bad config record: ") + e.what());
  }
}

void write_model(std::ostream& out, const LatentFactorModel& model) {
  nlohmann::json header{
      {"format_version", kModelFormatVersion},
      {"n_words", model.n_words},
      {"n_factors", model.n_factors},
      {"config", config_to_json(model.config)},
      {"flipped", model.flipped},
      {"arrays",
       {{{"name", "alpha"}, {"count", model.alpha.data().size()}},
        {{"name", "log_prior"}, {"count", model.log_prior.size()}},
        {{"name", "log_cond"}, {"count", model.log_cond.size()}},
        {{"name", "log_marg"}, {"count", model.log_marg.size()}},
        {{"name", "mi"}, {"count", model.mi.data().size()}}}},
  };
  std::string text = header.dump();
  out.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kModelFormatVersion);
  put_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_doubles(out, model.alpha.data());
  put_doubles(out, model.log_prior);
  put_doubles(out, model.log_cond);
  put_doubles(out, model.log_marg);
  put_doubles(out, model.mi.data());
}

LatentFactorModel read_model(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw DataError("not a model file (bad magic)");
  }
  auto version = get_le<std::uint32_t>(in);
  if (version != kModelFormatVersion) {
    throw DataError("unsupported model format version " + std::to_string(version));
  }
  auto header_len = get_le<std::uint64_t>(in);
  if (header_len > (1ull << 30)) throw DataError("model header too large");
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) throw DataError("model file truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("model header: ") + e.what());
  }

  LatentFactorModel model;
  try {
    model.n_words = header.at("n_words").get<std::size_t>();
    model.n_factors = header.at("n_factors").get<std::size_t>();
    model.flipped = header.at("flipped").get<std::vector<std::uint8_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model header: ") + e.what());
  }
  model.config = config_from_json(header.at("config"));
  const std::size_t n = model.n_words;
  const std::size_t m = model.n_factors;
  if (model.config.n_factors != m || model.flipped.size() != m) {
    throw DataError("model header: inconsistent factor count");
  }
  validate(model.config, n);

  const std::vector<std::pair<std::string, std::size_t>> expected{
      {"alpha", n * m}, {"log_prior", m * 2}, {"log_cond", n * m * 4}, {"log_marg", n * 2}, {"mi", n * m}};
  const auto& arrays = header.at("arrays");
  if (arrays.size() != expected.size()) throw DataError("model header: unexpected array list");
  for (std::size_t k = 0; k < expected.size(); ++k) {
    if (arrays[k].at("name") != expected[k].first || arrays[k].at("count") != expected[k].second) {
      throw DataError("model header: array '" + expected[k].first + "' has unexpected layout");
    }
  }

  model.alpha = DenseMatrix(n, m);
  model.alpha.data() = get_doubles(in, n * m);
  model.log_prior = get_doubles(in, m * 2);
  model.log_cond = get_doubles(in, n * m * 4);
  model.log_marg = get_doubles(in, n * 2);
  model.mi = DenseMatrix(n, m);
  model.mi.data() = get_doubles(in, n * m);
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("model file has trailing bytes");

  model.anchor_mask.assign(n * m, 0);
  for (const auto& a : model.config.anchors.entries()) model.anchor_mask[a.word * m + a.factor] = 1;
  return model;
}

void save_model(const std::filesystem::path& path, const LatentFactorModel& model) {
  std::ostringstream buf(std::ios::binary);
  write_model(buf, model);
  write_file_atomic(path, buf.str());
}

LatentFactorModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model " + path.string());
  return read_model(in);
}

nlohmann::json fit_report_to_json(const FitReport& report) {
  return {
      {"tc_history", report.tc_history},
      {"tc_per_factor", report.tc_per_factor},
      {"tc_total", report.tc_total()},
      {"iterations_run", report.iterations_run},
      {"converged", report.converged},
  };
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw DataError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

}  // namespace corex
