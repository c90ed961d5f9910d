#include <string>

#include "binary_io.hpp"
#include "clothkit/classify.hpp"
#include "clothkit/error.hpp"

namespace clothkit {

namespace {
constexpr std::string_view kModelMagic = "SVMM1";
}

void save_model(const std::filesystem::path& path, const SvmModel& model) {
  if (model.per_class.size() != model.classes.size()) {
    throw Error(ErrorKind::Consistency, "model has " + std::to_string(model.per_class.size()) +
                                            " binary machines for " + std::to_string(model.classes.size()) + " classes");
  }
  detail::BinaryWriter out(path);
  out.bytes(kModelMagic);
  out.u8(static_cast<std::uint8_t>(model.kernel.type));
  out.f64(model.kernel.gamma);
  out.f64(model.c);
  out.u64(model.dimension);
  out.str(model.feature_set);
  out.u64(model.config_hash);
  out.u64(model.seed);
  out.u32(static_cast<std::uint32_t>(model.classes.size()));
  for (std::size_t c = 0; c < model.classes.size(); ++c) {
    const auto& m = model.per_class[c];
    if (m.support.rows != m.coef.size() || (m.support.rows > 0 && m.support.cols != model.dimension)) {
      throw Error(ErrorKind::Dimension, "support vectors do not match the model dimension");
    }
    out.str(model.classes[c]);
    out.f64(m.bias);
    out.u64(m.support.rows);
    for (const double v : m.coef) out.f64(v);
    for (const double v : m.support.data) out.f64(v);
  }
  out.finish();
}

SvmModel load_model(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  in.expect_magic(kModelMagic);
  SvmModel model;
  const auto kernel = in.u8();
  if (kernel > static_cast<std::uint8_t>(KernelType::Rbf)) {
    throw Error(ErrorKind::Format, path.string() + ": unknown kernel type");
  }
  model.kernel.type = static_cast<KernelType>(kernel);
  model.kernel.gamma = in.f64();
  model.c = in.f64();
  model.dimension = in.u64();
  model.feature_set = in.str();
  model.config_hash = in.u64();
  model.seed = in.u64();
  const auto classes = in.u32();
  if (classes > 4096 || model.dimension > (1u << 24)) {
    throw Error(ErrorKind::Format, path.string() + ": implausible model size");
  }
  for (std::uint32_t c = 0; c < classes; ++c) {
    model.classes.push_back(in.str());
    BinarySvm m;
    m.bias = in.f64();
    const auto n = in.u64();
    if (n > (1u << 24)) throw Error(ErrorKind::Format, path.string() + ": implausible support vector count");
    m.coef.resize(n);
    for (double& v : m.coef) v = in.f64();
    m.support = Matrix(n, model.dimension);
    for (double& v : m.support.data) v = in.f64();
    model.per_class.push_back(std::move(m));
  }
  in.expect_end();
  return model;
}

}  // namespace clothkit
