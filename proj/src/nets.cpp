#include "upright/nets.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace upright {

using kern::table;

int ParamSet::add(const std::string& name, std::vector<int> shape) {
  if (find(name) >= 0) throw std::invalid_argument("duplicate param block: " + name);
  Block b;
  b.name = name;
  b.shape = std::move(shape);
  b.size = 1;
  for (int d : b.shape) b.size *= d;
  b.offset = int64_t(data_.size());
  data_.resize(data_.size() + size_t(b.size), 0.0);
  grad_.resize(data_.size(), 0.0);
  blocks_.push_back(b);
  return int(blocks_.size()) - 1;
}

int ParamSet::find(const std::string& name) const {
  for (size_t i = 0; i < blocks_.size(); ++i)
    if (blocks_[i].name == name) return int(i);
  return -1;
}

void ParamSet::save(std::ostream& os) const {
  const char magic[8] = {'U', 'P', 'R', 'T', 'C', 'K', 'P', 'T'};
  os.write(magic, 8);
  auto w32 = [&](uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
  auto w64 = [&](uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); };
  w32(version);
  w64(config_digest);
  w32(uint32_t(blocks_.size()));
  for (const auto& b : blocks_) {
    w32(uint32_t(b.name.size()));
    os.write(b.name.data(), long(b.name.size()));
    w32(uint32_t(b.shape.size()));
    for (int d : b.shape) w32(uint32_t(d));
    os.write(reinterpret_cast<const char*>(data_.data() + b.offset), long(b.size) * 8);
  }
}

ParamSet ParamSet::load(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "UPRTCKPT", 8) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  ParamSet ps;
  auto r32 = [&]() {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  auto r64 = [&]() {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  ps.version = r32();
  ps.config_digest = r64();
  const uint32_t n = r32();
  for (uint32_t i = 0; i < n; ++i) {
    const uint32_t name_len = r32();
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const uint32_t ndim = r32();
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = int(r32());
    const int id = ps.add(name, shape);
    is.read(reinterpret_cast<char*>(ps.data(id)), long(ps.block(id).size) * 8);
    if (!is) throw std::runtime_error("checkpoint: truncated block " + name);
  }
  return ps;
}

namespace {

// He-style uniform fan-in init, deterministic per block.
void fill_uniform(double* w, int64_t n, double bound, Rng& rng) {
  for (int64_t i = 0; i < n; ++i) w[i] = rng.uniform(-bound, bound);
}

void pgemm_nn(ThreadPool* pool, const double* A, int lda, const double* B, int ldb, double* C,
              int ldc, int m, int k, int n, bool acc) {
  if (!pool || pool->size() == 1 || m < 96) {
    table().gemm_nn(A, lda, B, ldb, C, ldc, m, k, n, acc);
    return;
  }
  pool->parallel_for(0, m, [&](int64_t lo, int64_t hi) {
    table().gemm_nn(A + lo * lda, lda, B, ldb, C + lo * ldc, ldc, int(hi - lo), k, n, acc);
  });
}

void pgemm_nt(ThreadPool* pool, const double* A, int lda, const double* B, int ldb, double* C,
              int ldc, int m, int k, int n, bool acc) {
  if (!pool || pool->size() == 1 || m < 96) {
    table().gemm_nt(A, lda, B, ldb, C, ldc, m, k, n, acc);
    return;
  }
  pool->parallel_for(0, m, [&](int64_t lo, int64_t hi) {
    table().gemm_nt(A + lo * lda, lda, B, ldb, C + lo * ldc, ldc, int(hi - lo), k, n, acc);
  });
}

void pgemm_tn(ThreadPool* pool, const double* A, int lda, const double* B, int ldb, double* C,
              int ldc, int m, int k, int n, bool acc) {
  if (!pool || pool->size() == 1 || m < 96) {
    table().gemm_tn(A, lda, B, ldb, C, ldc, m, k, n, acc);
    return;
  }
  // split output rows; A columns are strided views
  pool->parallel_for(0, m, [&](int64_t lo, int64_t hi) {
    table().gemm_tn(A + lo, lda, B, ldb, C + lo * ldc, ldc, int(hi - lo), k, n, acc);
  });
}

}  // namespace

void Dense::init(ParamSet& ps, const std::string& name, int in_dim, int out_dim, Rng& rng,
                 double gain) {
  in = in_dim;
  out = out_dim;
  const int existing = ps.find(name + ".W");
  if (existing >= 0) {
    W = existing;
    b = ps.find(name + ".b");
    const auto& shape = ps.block(W).shape;
    if (shape[0] != out || shape[1] != in)
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    return;
  }
  W = ps.add(name + ".W", {out, in});
  b = ps.add(name + ".b", {out});
  fill_uniform(ps.data(W), int64_t(in) * out, gain * std::sqrt(3.0 / in), rng);
}

void Dense::forward(const ParamSet& ps, const Mat& X, Mat& Y, ThreadPool* pool) const {
  Y.resize(X.rows, out);
  pgemm_nt(pool, X.v.data(), X.cols, ps.data(W), in, Y.v.data(), Y.cols, X.rows, in, out, false);
  table().add_bias_rows(Y.v.data(), ps.data(b), Y.rows, Y.cols, Y.cols);
}

void Dense::backward(ParamSet& ps, const Mat& X, const Mat& dY, Mat* dX, ThreadPool* pool) const {
  // dW += dY^T X ; db += column sums ; dX = dY W
  pgemm_tn(pool, dY.v.data(), dY.cols, X.v.data(), X.cols, ps.grad(W), in, out, X.rows, in, true);
  std::vector<double> bias_sum(size_t(out));
  table().col_sums(dY.v.data(), bias_sum.data(), dY.rows, out, dY.cols);
  table().axpy(1.0, bias_sum.data(), ps.grad(b), out);
  if (dX) {
    dX->resize(X.rows, in);
    pgemm_nn(pool, dY.v.data(), dY.cols, ps.data(W), in, dX->v.data(), in, X.rows, out, in, false);
  }
}

void elu_forward(const Mat& X, Mat& Y) {
  Y.resize(X.rows, X.cols);
  table().elu(X.v.data(), Y.v.data(), int64_t(X.v.size()));
}

void elu_backward(const Mat& X_pre, const Mat& dY, Mat& dX) {
  dX.resize(X_pre.rows, X_pre.cols);
  table().elu_grad(X_pre.v.data(), dY.v.data(), dX.v.data(), int64_t(X_pre.v.size()));
}

void Mlp::init(ParamSet& ps, const std::string& name, const std::vector<int>& dims, Rng& rng,
               double last_gain) {
  layers.resize(dims.size() - 1);
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    const bool last = i + 2 == dims.size();
    layers[i].init(ps, name + ".l" + std::to_string(i), dims[i], dims[i + 1], rng,
                   last ? last_gain : 1.0);
  }
}

void Mlp::forward(const ParamSet& ps, const Mat& X, Mat& Y, Cache& c, ThreadPool* pool) const {
  const int n = int(layers.size());
  c.pre.resize(n);
  c.act.resize(n);
  c.act[0] = X;
  for (int i = 0; i < n; ++i) {
    Mat& out_pre = (i + 1 == n) ? Y : c.pre[i];
    layers[i].forward(ps, c.act[i], out_pre, pool);
    if (i + 1 < n) elu_forward(out_pre, c.act[i + 1]);
  }
}

void Mlp::backward(ParamSet& ps, const Cache& c, const Mat& dY, Mat* dX, ThreadPool* pool) const {
  const int n = int(layers.size());
  Mat grad = dY, tmp;
  for (int i = n - 1; i >= 0; --i) {
    Mat* dx_out = (i == 0) ? dX : &tmp;
    layers[i].backward(ps, c.act[i], grad, dx_out, pool);
    if (i > 0) {
      elu_backward(c.pre[i - 1], tmp, grad);
    }
  }
}

void Conv1d::init(ParamSet& ps, const std::string& name, int cin, int cout, int kk, int ss,
                  int lin, Rng& rng) {
  c_in = cin;
  c_out = cout;
  k = kk;
  stride = ss;
  len_in = lin;
  const int existing = ps.find(name + ".W");
  if (existing >= 0) {
    W = existing;
    b = ps.find(name + ".b");
    return;
  }
  W = ps.add(name + ".W", {c_out, c_in, k});
  b = ps.add(name + ".b", {c_out});
  fill_uniform(ps.data(W), int64_t(c_out) * c_in * k, std::sqrt(3.0 / (c_in * k)), rng);
}

void Conv1d::forward(const ParamSet& ps, const Mat& X, Mat& Y) const {
  const int lo = len_out();
  Y.resize(X.rows, c_out * lo);
  const double* w = ps.data(W);
  const double* bias = ps.data(b);
  for (int r = 0; r < X.rows; ++r) {
    const double* x = X.row(r);
    double* y = Y.row(r);
    for (int oc = 0; oc < c_out; ++oc) {
      for (int ox = 0; ox < lo; ++ox) {
        double acc = bias[oc];
        const int x0 = ox * stride;
        for (int ic = 0; ic < c_in; ++ic) {
          const double* wrow = w + (size_t(oc) * c_in + ic) * k;
          const double* xrow = x + size_t(ic) * len_in + x0;
          for (int kk = 0; kk < k; ++kk) acc += wrow[kk] * xrow[kk];
        }
        y[size_t(oc) * lo + ox] = acc;
      }
    }
  }
}

void Conv1d::backward(ParamSet& ps, const Mat& X, const Mat& dY, Mat* dX) const {
  const int lo = len_out();
  double* dw = ps.grad(W);
  double* db = ps.grad(b);
  const double* w = ps.data(W);
  if (dX) dX->resize(X.rows, c_in * len_in);
  for (int r = 0; r < X.rows; ++r) {
    const double* x = X.row(r);
    const double* dy = dY.row(r);
    double* dx = dX ? dX->row(r) : nullptr;
    for (int oc = 0; oc < c_out; ++oc) {
      for (int ox = 0; ox < lo; ++ox) {
        const double g = dy[size_t(oc) * lo + ox];
        db[oc] += g;
        const int x0 = ox * stride;
        for (int ic = 0; ic < c_in; ++ic) {
          double* dwrow = dw + (size_t(oc) * c_in + ic) * k;
          const double* xrow = x + size_t(ic) * len_in + x0;
          for (int kk = 0; kk < k; ++kk) dwrow[kk] += g * xrow[kk];
          if (dx) {
            const double* wrow = w + (size_t(oc) * c_in + ic) * k;
            double* dxrow = dx + size_t(ic) * len_in + x0;
            for (int kk = 0; kk < k; ++kk) dxrow[kk] += g * wrow[kk];
          }
        }
      }
    }
  }
}

void InputScale::init(ParamSet& ps, const std::string& name, const Eigen::VectorXd& scales) {
  const int existing = ps.find(name);
  if (existing >= 0) {
    S = existing;
    return;
  }
  S = ps.add(name, {int(scales.size())});
  std::memcpy(ps.data(S), scales.data(), size_t(scales.size()) * 8);
}

void InputScale::forward(const ParamSet& ps, const Mat& X, Mat& Y) const {
  Y.resize(X.rows, X.cols);
  const double* s = ps.data(S);
  for (int r = 0; r < X.rows; ++r) {
    const double* x = X.row(r);
    double* y = Y.row(r);
    for (int j = 0; j < X.cols; ++j) y[j] = x[j] * s[j];
  }
}

void InputScale::backward(const ParamSet& ps, const Mat& dY, Mat& dX) const {
  dX.resize(dY.rows, dY.cols);
  const double* s = ps.data(S);
  for (int r = 0; r < dY.rows; ++r) {
    const double* dy = dY.row(r);
    double* dx = dX.row(r);
    for (int j = 0; j < dY.cols; ++j) dx[j] = dy[j] * s[j];
  }
}

Eigen::VectorXd proprio_scales(const ObsLayout& l) {
  Eigen::VectorXd s(l.proprio());
  s.setOnes();
  s[0] = 0.25;                                   // base angular velocity
  for (int j = 0; j < l.n_joints; ++j) s[3 + l.n_joints + j] = 0.05;  // joint velocities
  return s;
}

Eigen::VectorXd teacher_scales(const ObsLayout& l) {
  Eigen::VectorXd s(l.teacher());
  s.setOnes();
  s.head(l.proprio()) = proprio_scales(l);
  for (int i = 0; i < l.scandots; ++i) s[l.proprio() + i] = 5.0;
  return s;
}

Eigen::VectorXd critic_scales(const ObsLayout& l) {
  Eigen::VectorXd s(l.critic());
  s.setOnes();
  s.head(l.teacher()) = teacher_scales(l);
  s[l.teacher()] = 2.0;  // base linear velocity
  s[l.teacher() + 1] = 2.0;
  return s;
}

double gaussian_log_prob(const Eigen::VectorXd& action, const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& log_std) {
  double lp = 0.0;
  for (int i = 0; i < action.size(); ++i) {
    const double z = (action[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - 0.5 * std::log(2.0 * M_PI);
  }
  return lp;
}

double gaussian_entropy(const Eigen::VectorXd& log_std) {
  double h = 0.0;
  for (int i = 0; i < log_std.size(); ++i) h += 0.5 * std::log(2.0 * M_PI * M_E) + log_std[i];
  return h;
}

std::tuple<Eigen::VectorXd, double, double> sample_and_logprob(const PolicyOutput& out, Rng& rng) {
  Eigen::VectorXd a(out.mean.size());
  for (int i = 0; i < a.size(); ++i) a[i] = out.mean[i] + std::exp(out.log_std[i]) * rng.normal();
  return {a, gaussian_log_prob(a, out.mean, out.log_std), gaussian_entropy(out.log_std)};
}

namespace {

// Architecture metadata rides in the checkpoint so loading rebuilds the
// exact wiring.
Eigen::VectorXd pack_meta(int kind, const ObsLayout& l, const NetConfig& c) {
  std::vector<double> m = {double(kind),
                           double(l.n_joints),
                           double(l.n_links),
                           double(l.scandots),
                           double(l.depth),
                           double(l.proprio_hist),
                           double(l.depth_hist),
                           double(l.future),
                           double(c.latent),
                           double(c.img_feature),
                           double(c.hist_feature),
                           c.log_std_init,
                           c.log_std_min,
                           c.log_std_max,
                           double(c.actor_hidden.size()),
                           double(c.critic_hidden.size()),
                           double(c.goal_hidden.size())};
  for (int d : c.actor_hidden) m.push_back(double(d));
  for (int d : c.critic_hidden) m.push_back(double(d));
  for (int d : c.goal_hidden) m.push_back(double(d));
  return Eigen::Map<Eigen::VectorXd>(m.data(), long(m.size()));
}

void unpack_meta(const ParamSet& ps, int expect_kind, ObsLayout& l, NetConfig& c) {
  const int id = ps.find("meta");
  if (id < 0) throw std::runtime_error("checkpoint: missing meta block");
  const double* m = ps.data(id);
  if (int(m[0]) != expect_kind) throw std::runtime_error("checkpoint: wrong policy kind");
  l.n_joints = int(m[1]);
  l.n_links = int(m[2]);
  l.scandots = int(m[3]);
  l.depth = int(m[4]);
  l.proprio_hist = int(m[5]);
  l.depth_hist = int(m[6]);
  l.future = int(m[7]);
  l.ref_block = 2 * l.n_links + 1;
  c.latent = int(m[8]);
  c.img_feature = int(m[9]);
  c.hist_feature = int(m[10]);
  c.log_std_init = m[11];
  c.log_std_min = m[12];
  c.log_std_max = m[13];
  const int na = int(m[14]), nc = int(m[15]), ng = int(m[16]);
  c.actor_hidden.assign(na, 0);
  c.critic_hidden.assign(nc, 0);
  c.goal_hidden.assign(ng, 0);
  int at = 17;
  for (auto& d : c.actor_hidden) d = int(m[at++]);
  for (auto& d : c.critic_hidden) d = int(m[at++]);
  for (auto& d : c.goal_hidden) d = int(m[at++]);
}

void add_meta(ParamSet& ps, int kind, const ObsLayout& l, const NetConfig& c) {
  if (ps.find("meta") >= 0) return;
  const Eigen::VectorXd m = pack_meta(kind, l, c);
  const int id = ps.add("meta", {int(m.size())});
  std::memcpy(ps.data(id), m.data(), size_t(m.size()) * 8);
}

}  // namespace

TeacherNet::TeacherNet(const ObsLayout& layout, const NetConfig& cfg, uint64_t seed)
    : layout_(layout), cfg_(cfg) {
  wire(seed, true);
}

TeacherNet::TeacherNet(ParamSet params) : ps_(std::move(params)) {
  unpack_meta(ps_, 0, layout_, cfg_);
  wire(0, false);
}

void TeacherNet::wire(uint64_t seed, bool fresh) {
  Rng rng(seed ^ 0x74656163686572ULL);
  if (fresh) add_meta(ps_, 0, layout_, cfg_);
  teacher_scale_.init(ps_, "teacher_scale", teacher_scales(layout_));
  critic_scale_.init(ps_, "critic_scale", critic_scales(layout_));
  std::vector<int> goal_dims{layout_.goal_inputs()};
  for (int d : cfg_.goal_hidden) goal_dims.push_back(d);
  goal_dims.push_back(cfg_.latent);
  goal_.init(ps_, "goal", goal_dims, rng);
  std::vector<int> trunk_dims{cfg_.latent + layout_.proprio()};
  for (int d : cfg_.actor_hidden) trunk_dims.push_back(d);
  trunk_dims.push_back(layout_.n_joints);
  trunk_.init(ps_, "actor", trunk_dims, rng, 0.01);
  std::vector<int> critic_dims{layout_.critic()};
  for (int d : cfg_.critic_hidden) critic_dims.push_back(d);
  critic_dims.push_back(1);
  critic_.init(ps_, "critic", critic_dims, rng);
  if (ps_.find("log_std") >= 0) {
    log_std_block_ = ps_.find("log_std");
  } else {
    log_std_block_ = ps_.add("log_std", {layout_.n_joints});
    for (int i = 0; i < layout_.n_joints; ++i) ps_.data(log_std_block_)[i] = cfg_.log_std_init;
  }
}

void TeacherNet::actor_forward(const Mat& teacher_obs, Cache& c, ThreadPool* pool) const {
  teacher_scale_.forward(ps_, teacher_obs, c.scaled);
  const int B = teacher_obs.rows;
  const int np = layout_.proprio(), ng = layout_.goal_inputs();
  c.proprio.resize(B, np);
  c.goal_in.resize(B, ng);
  for (int r = 0; r < B; ++r) {
    std::memcpy(c.proprio.row(r), c.scaled.row(r), size_t(np) * 8);
    std::memcpy(c.goal_in.row(r), c.scaled.row(r) + np, size_t(ng) * 8);
  }
  goal_.forward(ps_, c.goal_in, c.latent, c.goal_cache, pool);
  c.trunk_in.resize(B, cfg_.latent + np);
  for (int r = 0; r < B; ++r) {
    std::memcpy(c.trunk_in.row(r), c.latent.row(r), size_t(cfg_.latent) * 8);
    std::memcpy(c.trunk_in.row(r) + cfg_.latent, c.proprio.row(r), size_t(np) * 8);
  }
  trunk_.forward(ps_, c.trunk_in, c.mean, c.trunk_cache, pool);
}

void TeacherNet::actor_backward(const Mat& dmean, const Eigen::VectorXd& dlog_std, Cache& c,
                                ThreadPool* pool) {
  Mat dtrunk_in;
  trunk_.backward(ps_, c.trunk_cache, dmean, &dtrunk_in, pool);
  Mat dlatent;
  dlatent.resize(dtrunk_in.rows, cfg_.latent);
  for (int r = 0; r < dtrunk_in.rows; ++r)
    std::memcpy(dlatent.row(r), dtrunk_in.row(r), size_t(cfg_.latent) * 8);
  goal_.backward(ps_, c.goal_cache, dlatent, nullptr, pool);
  const double* raw = ps_.data(log_std_block_);
  double* g = ps_.grad(log_std_block_);
  for (int i = 0; i < dlog_std.size(); ++i)
    if (raw[i] > cfg_.log_std_min && raw[i] < cfg_.log_std_max) g[i] += dlog_std[i];
}

void TeacherNet::goal_latent(const Mat& teacher_obs, Mat& z, ThreadPool* pool) const {
  Cache c;
  teacher_scale_.forward(ps_, teacher_obs, c.scaled);
  const int np = layout_.proprio(), ng = layout_.goal_inputs();
  c.goal_in.resize(teacher_obs.rows, ng);
  for (int r = 0; r < teacher_obs.rows; ++r)
    std::memcpy(c.goal_in.row(r), c.scaled.row(r) + np, size_t(ng) * 8);
  goal_.forward(ps_, c.goal_in, z, c.goal_cache, pool);
}

void TeacherNet::critic_forward(const Mat& critic_obs, CriticCache& c, ThreadPool* pool) const {
  critic_scale_.forward(ps_, critic_obs, c.scaled);
  critic_.forward(ps_, c.scaled, c.values, c.mlp_cache, pool);
}

void TeacherNet::critic_backward(const Mat& dvalues, CriticCache& c, ThreadPool* pool) {
  critic_.backward(ps_, c.mlp_cache, dvalues, nullptr, pool);
}

Eigen::VectorXd TeacherNet::log_std() const {
  Eigen::VectorXd s(layout_.n_joints);
  const double* raw = ps_.data(log_std_block_);
  for (int i = 0; i < s.size(); ++i) s[i] = std::clamp(raw[i], cfg_.log_std_min, cfg_.log_std_max);
  return s;
}

PolicyOutput TeacherNet::policy_output_row(const Cache& c, int row) const {
  PolicyOutput out;
  out.mean = Eigen::Map<const Eigen::VectorXd>(c.mean.row(row), layout_.n_joints);
  out.log_std = log_std();
  return out;
}

StudentNet::StudentNet(const ObsLayout& layout, const NetConfig& cfg, uint64_t seed)
    : layout_(layout), cfg_(cfg) {
  wire(seed, true);
}

StudentNet::StudentNet(ParamSet params) : ps_(std::move(params)) {
  unpack_meta(ps_, 1, layout_, cfg_);
  wire(0, false);
}

void StudentNet::wire(uint64_t seed, bool fresh) {
  Rng rng(seed ^ 0x73747564656e74ULL);
  if (fresh) add_meta(ps_, 1, layout_, cfg_);
  proprio_scale_.init(ps_, "proprio_scale", proprio_scales(layout_));
  depth1_.init(ps_, "depth1", layout_.depth_hist, 16, 5, 2, layout_.depth, rng);
  depth2_.init(ps_, "depth2", 16, 32, 5, 2, depth1_.len_out(), rng);
  img_dense_.init(ps_, "img_dense", 32 * depth2_.len_out(), cfg_.img_feature, rng);
  temp1_.init(ps_, "temp1", layout_.proprio(), 32, 3, 2, layout_.proprio_hist, rng);
  temp2_.init(ps_, "temp2", 32, cfg_.hist_feature, 3, 2, temp1_.len_out(), rng);
  if (temp2_.len_out() != 1)
    throw std::runtime_error("temporal encoder output length must be 1");
  fusion_.init(ps_, "fusion", cfg_.img_feature + cfg_.hist_feature, cfg_.latent, rng);
  std::vector<int> trunk_dims{cfg_.latent + layout_.proprio() + cfg_.img_feature};
  for (int d : cfg_.actor_hidden) trunk_dims.push_back(d);
  trunk_dims.push_back(layout_.n_joints);
  trunk_.init(ps_, "actor", trunk_dims, rng, 0.01);
  if (ps_.find("log_std") >= 0) {
    log_std_block_ = ps_.find("log_std");
  } else {
    log_std_block_ = ps_.add("log_std", {layout_.n_joints});
    for (int i = 0; i < layout_.n_joints; ++i) ps_.data(log_std_block_)[i] = cfg_.log_std_init;
  }
}

void StudentNet::forward(const Mat& student_obs, Cache& c, ThreadPool* pool) const {
  const int B = student_obs.rows;
  const int np = layout_.proprio();
  const int hist_at = np, hist_n = np * layout_.proprio_hist;
  const int depth_at = hist_at + hist_n;

  c.proprio.resize(B, np);
  c.hist.resize(B, hist_n);
  c.depth.resize(B, layout_.depth_hist * layout_.depth);
  for (int r = 0; r < B; ++r) {
    const double* o = student_obs.row(r);
    std::memcpy(c.proprio.row(r), o, size_t(np) * 8);
    std::memcpy(c.hist.row(r), o + hist_at, size_t(hist_n) * 8);
    // depths centered around their 1 m midpoint
    double* d = c.depth.row(r);
    for (int i = 0; i < layout_.depth_hist * layout_.depth; ++i) d[i] = o[depth_at + i] - 1.0;
  }
  proprio_scale_.forward(ps_, c.proprio, c.proprio_scaled);

  // history frames arrive frame-major; the temporal conv wants channel-major
  const double* scale = ps_.data(ps_.find("proprio_scale"));
  c.hist_chmajor.resize(B, np * layout_.proprio_hist);
  for (int r = 0; r < B; ++r) {
    const double* h = c.hist.row(r);
    double* out = c.hist_chmajor.row(r);
    for (int ch = 0; ch < np; ++ch)
      for (int t = 0; t < layout_.proprio_hist; ++t)
        out[size_t(ch) * layout_.proprio_hist + t] = h[size_t(t) * np + ch] * scale[ch];
  }

  depth1_.forward(ps_, c.depth, c.conv1_pre);
  elu_forward(c.conv1_pre, c.conv1);
  depth2_.forward(ps_, c.conv1, c.conv2_pre);
  elu_forward(c.conv2_pre, c.conv2);
  img_dense_.forward(ps_, c.conv2, c.f_img, pool);

  temp1_.forward(ps_, c.hist_chmajor, c.tconv1_pre);
  elu_forward(c.tconv1_pre, c.tconv1);
  temp2_.forward(ps_, c.tconv1, c.tconv2_pre);
  elu_forward(c.tconv2_pre, c.tconv2);  // [B, hist_feature]

  c.fuse_in.resize(B, cfg_.img_feature + cfg_.hist_feature);
  for (int r = 0; r < B; ++r) {
    std::memcpy(c.fuse_in.row(r), c.f_img.row(r), size_t(cfg_.img_feature) * 8);
    std::memcpy(c.fuse_in.row(r) + cfg_.img_feature, c.tconv2.row(r),
                size_t(cfg_.hist_feature) * 8);
  }
  fusion_.forward(ps_, c.fuse_in, c.latent, pool);

  c.trunk_in.resize(B, cfg_.latent + np + cfg_.img_feature);
  for (int r = 0; r < B; ++r) {
    double* t = c.trunk_in.row(r);
    std::memcpy(t, c.latent.row(r), size_t(cfg_.latent) * 8);
    std::memcpy(t + cfg_.latent, c.proprio_scaled.row(r), size_t(np) * 8);
    std::memcpy(t + cfg_.latent + np, c.f_img.row(r), size_t(cfg_.img_feature) * 8);
  }
  trunk_.forward(ps_, c.trunk_in, c.mean, c.trunk_cache, pool);
}

void StudentNet::backward(const Mat& dmean, const Mat* dlatent, const Eigen::VectorXd& dlog_std,
                          Cache& c, ThreadPool* pool) {
  const int B = dmean.rows;
  const int np = layout_.proprio();
  Mat dtrunk_in;
  trunk_.backward(ps_, c.trunk_cache, dmean, &dtrunk_in, pool);

  Mat dz, df_img;
  dz.resize(B, cfg_.latent);
  df_img.resize(B, cfg_.img_feature);
  for (int r = 0; r < B; ++r) {
    const double* t = dtrunk_in.row(r);
    std::memcpy(dz.row(r), t, size_t(cfg_.latent) * 8);
    std::memcpy(df_img.row(r), t + cfg_.latent + np, size_t(cfg_.img_feature) * 8);
  }
  if (dlatent) table().axpy(1.0, dlatent->v.data(), dz.v.data(), int64_t(dz.v.size()));

  Mat dfuse_in;
  fusion_.backward(ps_, c.fuse_in, dz, &dfuse_in, pool);
  Mat df_hist;
  df_hist.resize(B, cfg_.hist_feature);
  for (int r = 0; r < B; ++r) {
    table().axpy(1.0, dfuse_in.row(r), df_img.row(r), cfg_.img_feature);
    std::memcpy(df_hist.row(r), dfuse_in.row(r) + cfg_.img_feature, size_t(cfg_.hist_feature) * 8);
  }

  // image path
  Mat dconv2_out;
  img_dense_.backward(ps_, c.conv2, df_img, &dconv2_out, pool);
  Mat dconv2_pre;
  elu_backward(c.conv2_pre, dconv2_out, dconv2_pre);
  Mat dconv1_out;
  depth2_.backward(ps_, c.conv1, dconv2_pre, &dconv1_out);
  Mat dconv1_pre;
  elu_backward(c.conv1_pre, dconv1_out, dconv1_pre);
  depth1_.backward(ps_, c.depth, dconv1_pre, nullptr);

  // temporal path
  Mat dt2_pre;
  elu_backward(c.tconv2_pre, df_hist, dt2_pre);
  Mat dt1_out;
  temp2_.backward(ps_, c.tconv1, dt2_pre, &dt1_out);
  Mat dt1_pre;
  elu_backward(c.tconv1_pre, dt1_out, dt1_pre);
  temp1_.backward(ps_, c.hist_chmajor, dt1_pre, nullptr);

  const double* raw = ps_.data(log_std_block_);
  double* g = ps_.grad(log_std_block_);
  for (int i = 0; i < dlog_std.size(); ++i)
    if (raw[i] > cfg_.log_std_min && raw[i] < cfg_.log_std_max) g[i] += dlog_std[i];
}

Eigen::VectorXd StudentNet::log_std() const {
  Eigen::VectorXd s(layout_.n_joints);
  const double* raw = ps_.data(log_std_block_);
  for (int i = 0; i < s.size(); ++i) s[i] = std::clamp(raw[i], cfg_.log_std_min, cfg_.log_std_max);
  return s;
}

Adam::Adam(ParamSet& ps, double lr_in, double beta1, double beta2, double eps)
    : lr(lr_in), ps_(ps), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.assign(size_t(ps.total()), 0.0);
  v_.assign(size_t(ps.total()), 0.0);
}

void Adam::step() {
  ++t_;
  const double bc1 = lr / (1.0 - std::pow(beta1_, double(t_)));
  const double bc2 = 1.0 / (1.0 - std::pow(beta2_, double(t_)));
  table().adam_step(ps_.raw_data(), m_.data(), v_.data(), ps_.raw_grad(), ps_.total(), beta1_,
                    beta2_, eps_, bc1, bc2);
}

}  // namespace upright
