#include "sfbd/net.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "sfbd/data_io.hpp"
#include "sfbd/errors.hpp"
#include "sfbd/rng.hpp"

namespace sfbd {
namespace {

constexpr double kSigmaFloor = 1e-20;

inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

using MatMap = Eigen::Map<Eigen::MatrixXd>;
using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

}  // namespace

std::size_t NetTopology::fan_in(std::size_t layer) const {
  return layer == 0 ? input_dim + time_embed_dim() : hidden[layer - 1];
}

std::size_t NetTopology::fan_out(std::size_t layer) const {
  return layer == hidden.size() ? input_dim : hidden[layer];
}

std::size_t NetTopology::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < layer_count(); ++l) n += (fan_in(l) + 1) * fan_out(l);
  return n;
}

void NetTopology::validate() const {
  if (input_dim == 0) throw ValidationError("net.input_dim", "must be positive");
  if (fourier_pairs == 0) throw ValidationError("net.fourier_pairs", "must be positive");
  for (std::size_t w : hidden)
    if (w == 0) throw ValidationError("net.hidden", "widths must be positive");
  if (!(data_scale > 0.0) || !std::isfinite(data_scale))
    throw ValidationError("net.data_scale", "must be positive");
}

DenoiserNet::DenoiserNet(NetTopology topology, NoiseSchedule schedule)
    : topo_(std::move(topology)), schedule_(schedule) {
  topo_.validate();
  schedule_.validate();
  std::size_t off = 0;
  for (std::size_t l = 0; l < topo_.layer_count(); ++l) {
    offsets_.push_back(off);
    off += (topo_.fan_in(l) + 1) * topo_.fan_out(l);
  }
  params_.assign(off, 0.0);
}

DenoiserNet DenoiserNet::initialized(NetTopology topology, NoiseSchedule schedule,
                                     std::uint64_t seed) {
  DenoiserNet net(std::move(topology), schedule);
  const auto& t = net.topo_;
  for (std::size_t l = 0; l + 1 < t.layer_count(); ++l) {
    Stream rng(seed, "init", l);
    const double bound = 1.0 / std::sqrt(static_cast<double>(t.fan_in(l)));
    const std::size_t count = (t.fan_in(l) + 1) * t.fan_out(l);
    double* p = net.params_.data() + net.offsets_[l];
    for (std::size_t i = 0; i < count; ++i) p[i] = bound * (2.0 * rng.uniform() - 1.0);
  }
  return net;
}

void DenoiserNet::set_params(std::span<const double> p) {
  if (p.size() != params_.size()) throw ShapeError("set_params: parameter count mismatch");
  std::copy(p.begin(), p.end(), params_.begin());
}

void DenoiserNet::embed(const Eigen::MatrixXd& x, const Eigen::VectorXd& sigma,
                        Eigen::MatrixXd& input) const {
  const auto d = static_cast<Eigen::Index>(topo_.input_dim);
  const auto pairs = static_cast<Eigen::Index>(topo_.fourier_pairs);
  const Eigen::Index b = x.cols();
  input.resize(d + 2 * pairs, b);
  const double s2 = topo_.data_scale * topo_.data_scale;
  for (Eigen::Index j = 0; j < b; ++j) {
    const double s = sigma[j];
    input.col(j).head(d) = x.col(j) / std::sqrt(s * s + s2);
    const double c = 0.25 * std::log(std::max(s, kSigmaFloor));
    double f = 1.0;
    for (Eigen::Index k = 0; k < pairs; ++k, f *= 2.0) {
      input(d + 2 * k, j) = std::sin(f * c);
      input(d + 2 * k + 1, j) = std::cos(f * c);
    }
  }
}

void DenoiserNet::forward(const Eigen::MatrixXd& x, const Eigen::VectorXd& t,
                          Eigen::MatrixXd& out, Cache& cache) const {
  if (static_cast<std::size_t>(x.rows()) != topo_.input_dim)
    throw ShapeError("denoise: point dimension does not match the network");
  if (t.size() != x.cols()) throw ShapeError("denoise: one time per column required");
  const Eigen::Index b = x.cols();
  cache.sigma.resize(b);
  for (Eigen::Index j = 0; j < b; ++j) cache.sigma[j] = schedule_.sigma(t[j]);

  const std::size_t hidden = topo_.hidden.size();
  cache.pre.resize(hidden);
  cache.act.resize(hidden + 1);
  embed(x, cache.sigma, cache.act[0]);

  for (std::size_t l = 0; l <= hidden; ++l) {
    const auto in = static_cast<Eigen::Index>(topo_.fan_in(l));
    const auto outw = static_cast<Eigen::Index>(topo_.fan_out(l));
    const double* p = params_.data() + offsets_[l];
    ConstMatMap w(p, outw, in);
    ConstVecMap bias(p + outw * in, outw);
    if (l < hidden) {
      Eigen::MatrixXd& z = cache.pre[l];
      z.noalias() = w * cache.act[l];
      z.colwise() += bias;
      cache.act[l + 1] = z.unaryExpr([](double v) { return softplus(v); });
    } else {
      out.noalias() = w * cache.act[l];
      out.colwise() += bias;
      for (Eigen::Index j = 0; j < b; ++j) out.col(j) = x.col(j) + cache.sigma[j] * out.col(j);
    }
  }
}

void DenoiserNet::backward(const Cache& cache, const Eigen::MatrixXd& d_out,
                           std::span<double> grad) const {
  if (grad.size() != params_.size()) throw ShapeError("backward: gradient size mismatch");
  const std::size_t hidden = topo_.hidden.size();
  Eigen::MatrixXd delta = d_out * cache.sigma.asDiagonal();
  for (std::size_t l = hidden + 1; l-- > 0;) {
    const auto in = static_cast<Eigen::Index>(topo_.fan_in(l));
    const auto outw = static_cast<Eigen::Index>(topo_.fan_out(l));
    const double* p = params_.data() + offsets_[l];
    double* g = grad.data() + offsets_[l];
    MatMap gw(g, outw, in);
    VecMap gb(g + outw * in, outw);
    gw.noalias() += delta * cache.act[l].transpose();
    gb += delta.rowwise().sum();
    if (l == 0) break;
    ConstMatMap w(p, outw, in);
    Eigen::MatrixXd next = w.transpose() * delta;
    delta = next.cwiseProduct(
        cache.pre[l - 1].unaryExpr([](double v) { return logistic(v); }));
  }
}

void DenoiserNet::denoise_batch(const Eigen::MatrixXd& x, const Eigen::VectorXd& t,
                                Eigen::MatrixXd& out) const {
  Cache cache;
  forward(x, t, out, cache);
}

void DenoiserNet::denoise_batch(const Eigen::MatrixXd& x, double t,
                                Eigen::MatrixXd& out) const {
  denoise_batch(x, Eigen::VectorXd::Constant(x.cols(), t), out);
}

std::vector<double> DenoiserNet::denoise(std::span<const double> x, double t) const {
  if (x.size() != topo_.input_dim)
    throw ShapeError("denoise: point dimension does not match the network");
  Eigen::MatrixXd in = Eigen::Map<const Eigen::MatrixXd>(
      x.data(), static_cast<Eigen::Index>(x.size()), 1);
  Eigen::MatrixXd out;
  denoise_batch(in, t, out);
  return {out.data(), out.data() + out.size()};
}

void DenoiserNet::save(const std::filesystem::path& path) const {
  std::ostringstream h;
  h << "SFBDNET v1 input_dim=" << topo_.input_dim << " hidden=";
  for (std::size_t i = 0; i < topo_.hidden.size(); ++i)
    h << (i ? "," : "") << topo_.hidden[i];
  h << " fourier_pairs=" << topo_.fourier_pairs
    << " data_scale=" << format_double(topo_.data_scale)
    << " sigma_min=" << format_double(schedule_.sigma_min)
    << " sigma_max=" << format_double(schedule_.sigma_max)
    << " horizon=" << format_double(schedule_.horizon)
    << " params=" << params_.size() << "\n";
  std::string buf = h.str();
  for (double v : params_) {
    const auto u = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

DenoiserNet DenoiserNet::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(f)),
                        std::istreambuf_iterator<char>());
  const auto eol = buf.find('\n');
  if (eol == std::string::npos || buf.rfind("SFBDNET v1 ", 0) != 0)
    throw MalformedHeaderError("not a network checkpoint");

  std::map<std::string, std::string> kv;
  std::istringstream hs(buf.substr(11, eol - 11));
  for (std::string field; hs >> field;) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw MalformedHeaderError("field without '='");
    kv[field.substr(0, eq)] = field.substr(eq + 1);
  }
  auto need = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw MalformedHeaderError(std::string("missing field ") + key);
    return it->second;
  };
  NetTopology topo;
  NoiseSchedule sched;
  std::size_t count = 0;
  try {
    topo.input_dim = std::stoul(need("input_dim"));
    topo.hidden.clear();
    std::istringstream ws(need("hidden"));
    for (std::string w; std::getline(ws, w, ',');)
      if (!w.empty()) topo.hidden.push_back(std::stoul(w));
    topo.fourier_pairs = std::stoul(need("fourier_pairs"));
    topo.data_scale = std::stod(need("data_scale"));
    sched.sigma_min = std::stod(need("sigma_min"));
    sched.sigma_max = std::stod(need("sigma_max"));
    sched.horizon = std::stod(need("horizon"));
    count = std::stoul(need("params"));
  } catch (const std::logic_error&) {
    throw MalformedHeaderError("bad numeric field in checkpoint header");
  }
  DenoiserNet net(topo, sched);
  if (count != net.params_.size())
    throw MalformedHeaderError("parameter count does not match topology");
  const std::size_t start = eol + 1;
  if (buf.size() < start + 8 * count)
    throw TruncatedPayloadError("checkpoint payload shorter than declared");
  if (buf.size() > start + 8 * count)
    throw MalformedHeaderError("trailing bytes after checkpoint payload");
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t u = 0;
    for (int k = 7; k >= 0; --k)
      u = (u << 8) | static_cast<unsigned char>(buf[start + 8 * i + static_cast<std::size_t>(k)]);
    net.params_[i] = std::bit_cast<double>(u);
  }
  return net;
}

namespace {

double chunk_grad(const DenoiserNet& net, const LossEvaluator& loss,
                  std::size_t g0, std::size_t g1, std::span<double> grad) {
  const auto d = static_cast<Eigen::Index>(net.dim());
  std::vector<Eigen::Index> offset(g1 - g0 + 1, 0);
  for (std::size_t g = g0; g < g1; ++g)
    offset[g - g0 + 1] = offset[g - g0] + static_cast<Eigen::Index>(loss.queries(g));
  const Eigen::Index q = offset.back();
  if (q == 0) return 0.0;

  Eigen::MatrixXd x(d, q), out, d_out(d, q);
  Eigen::VectorXd t(q);
  for (std::size_t g = g0; g < g1; ++g) {
    const Eigen::Index o = offset[g - g0], n = offset[g - g0 + 1] - o;
    loss.fill(g, x.middleCols(o, n), t.segment(o, n));
  }
  DenoiserNet::Cache cache;
  net.forward(x, t, out, cache);
  double value = 0.0;
  for (std::size_t g = g0; g < g1; ++g) {
    const Eigen::Index o = offset[g - g0], n = offset[g - g0 + 1] - o;
    value += loss.loss(g, out.middleCols(o, n), d_out.middleCols(o, n));
  }
  net.backward(cache, d_out, grad);
  return value;
}

LossGrad reduce(const DenoiserNet& net, const LossEvaluator& loss,
                std::vector<double>& values, std::vector<std::vector<double>>& grads) {
  LossGrad r;
  r.grad.assign(net.params().size(), 0.0);
  for (std::size_t c = 0; c < values.size(); ++c) {
    r.value += values[c];
    for (std::size_t i = 0; i < r.grad.size(); ++i) r.grad[i] += grads[c][i];
  }
  r.value += loss.parameter_term(net.params(), r.grad);
  return r;
}

}  // namespace

LossGrad grad_params(const DenoiserNet& net, const LossEvaluator& loss) {
  const std::size_t groups = loss.groups();
  const std::size_t chunks = (groups + kGradChunk - 1) / kGradChunk;
  std::vector<double> values(chunks, 0.0);
  std::vector<std::vector<double>> grads(chunks);
  const auto n = static_cast<std::int64_t>(chunks);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t c = 0; c < n; ++c) {
    const auto k = static_cast<std::size_t>(c);
    grads[k].assign(net.params().size(), 0.0);
    values[k] = chunk_grad(net, loss, k * kGradChunk,
                           std::min(groups, (k + 1) * kGradChunk), grads[k]);
  }
  return reduce(net, loss, values, grads);
}

LossGrad grad_params_serial(const DenoiserNet& net, const LossEvaluator& loss) {
  const std::size_t groups = loss.groups();
  const std::size_t chunks = (groups + kGradChunk - 1) / kGradChunk;
  std::vector<double> values(chunks, 0.0);
  std::vector<std::vector<double>> grads(chunks);
  for (std::size_t k = 0; k < chunks; ++k) {
    grads[k].assign(net.params().size(), 0.0);
    values[k] = chunk_grad(net, loss, k * kGradChunk,
                           std::min(groups, (k + 1) * kGradChunk), grads[k]);
  }
  return reduce(net, loss, values, grads);
}

double loss_value(const DenoiserNet& net, const LossEvaluator& loss) {
  return grad_params(net, loss).value;
}

}  // namespace sfbd
