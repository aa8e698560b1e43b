#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "upright/env.hpp"
#include "upright/kernels.hpp"
#include "upright/rng.hpp"
#include "upright/threading.hpp"

namespace upright {

// Row-major batch matrix; all network math runs on these through the kernel
// table (scalar or AVX2).
struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> v;
  void resize(int r, int c) {
    rows = r;
    cols = c;
    v.assign(size_t(r) * c, 0.0);
  }
  double* row(int i) { return v.data() + size_t(i) * cols; }
  const double* row(int i) const { return v.data() + size_t(i) * cols; }
  double& at(int i, int j) { return v[size_t(i) * cols + j]; }
  double at(int i, int j) const { return v[size_t(i) * cols + j]; }
};

// Named parameter blocks with matching gradient storage.
class ParamSet {
 public:
  struct Block {
    std::string name;
    std::vector<int> shape;
    int64_t offset = 0;
    int64_t size = 0;
  };

  int add(const std::string& name, std::vector<int> shape);
  int find(const std::string& name) const;  // -1 when missing
  const Block& block(int id) const { return blocks_[size_t(id)]; }
  int n_blocks() const { return int(blocks_.size()); }

  double* data(int id) { return data_.data() + blocks_[size_t(id)].offset; }
  const double* data(int id) const { return data_.data() + blocks_[size_t(id)].offset; }
  double* grad(int id) { return grad_.data() + blocks_[size_t(id)].offset; }

  double* raw_data() { return data_.data(); }
  double* raw_grad() { return grad_.data(); }
  int64_t total() const { return int64_t(data_.size()); }
  void zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

  uint32_t version = 1;
  uint64_t config_digest = 0;

  //

  // Portable binary checkpoint: magic, version, digest, then
  // dimension-prefixed little-endian doubles per named block.
  void save(std::ostream& os) const;
  static ParamSet load(std::istream& is);

 private:
  std::vector<Block> blocks_;
  std::vector<double> data_;
  std::vector<double> grad_;
};

// Affine layer y = x W^T + b with ELU caches handled by the owner.
struct Dense {
  int W = -1, b = -1;
  int in = 0, out = 0;
  void init(ParamSet& ps, const std::string& name, int in_dim, int out_dim, Rng& rng,
            double gain = 1.0);
  void forward(const ParamSet& ps, const Mat& X, Mat& Y, ThreadPool* pool) const;
  // accumulates parameter grads; dX optional
  void backward(ParamSet& ps, const Mat& X, const Mat& dY, Mat* dX, ThreadPool* pool) const;
};

void elu_forward(const Mat& X, Mat& Y);
void elu_backward(const Mat& X_pre, const Mat& dY, Mat& dX);

// Dense-ELU chain; the last layer is linear.
struct Mlp {
  std::vector<Dense> layers;
  void init(ParamSet& ps, const std::string& name, const std::vector<int>& dims, Rng& rng,
            double last_gain = 1.0);
  struct Cache {
    std::vector<Mat> pre;   // pre-activations per layer
    std::vector<Mat> act;   // inputs to each layer (act[0] = X)
  };
  void forward(const ParamSet& ps, const Mat& X, Mat& Y, Cache& c, ThreadPool* pool) const;
  void backward(ParamSet& ps, const Cache& c, const Mat& dY, Mat* dX, ThreadPool* pool) const;
  int in() const { return layers.front().in; }
  int out() const { return layers.back().out; }
};

// 1-D convolution, stride 2, ELU outside. Input per sample is channel-major
// [C][L]; tiny shapes, direct loops.
struct Conv1d {
  int W = -1, b = -1;
  int c_in = 0, c_out = 0, k = 0, stride = 2, len_in = 0;
  int len_out() const { return (len_in - k) / stride + 1; }
  void init(ParamSet& ps, const std::string& name, int cin, int cout, int kk, int ss, int lin,
            Rng& rng);
  void forward(const ParamSet& ps, const Mat& X, Mat& Y) const;  // X: [B, c_in*len_in]
  void backward(ParamSet& ps, const Mat& X, const Mat& dY, Mat* dX) const;
};

// Fixed per-channel input normalization (part of the architecture, saved in
// the checkpoint as a regular block that never receives gradient updates).
struct InputScale {
  int S = -1;
  void init(ParamSet& ps, const std::string& name, const Eigen::VectorXd& scales);
  void forward(const ParamSet& ps, const Mat& X, Mat& Y) const;
  void backward(const ParamSet& ps, const Mat& dY, Mat& dX) const;
};

Eigen::VectorXd proprio_scales(const ObsLayout& l);
Eigen::VectorXd teacher_scales(const ObsLayout& l);
Eigen::VectorXd critic_scales(const ObsLayout& l);

struct PolicyOutput {
  Eigen::VectorXd mean;
  Eigen::VectorXd log_std;  // clamped to [-5, 1]
  double value = 0.0;
};

// Diagonal Gaussian head shared by teacher and student.
double gaussian_log_prob(const Eigen::VectorXd& action, const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& log_std);
double gaussian_entropy(const Eigen::VectorXd& log_std);
std::tuple<Eigen::VectorXd, double, double> sample_and_logprob(const PolicyOutput& out, Rng& rng);

struct NetConfig {
  std::vector<int> actor_hidden{256, 256, 256};
  std::vector<int> critic_hidden{256, 256, 256};
  std::vector<int> goal_hidden{128, 128};
  int latent = 64;
  int img_feature = 64;
  int hist_feature = 64;
  double log_std_init = std::log(0.5);
  double log_std_min = -5.0, log_std_max = 1.0;
};

// Privileged teacher: goal encoder over (scandots, reference block), actor
// trunk on (latent, proprio), critic on the full privileged observation.
class TeacherNet {
 public:
  TeacherNet(const ObsLayout& layout, const NetConfig& cfg, uint64_t seed);
  explicit TeacherNet(ParamSet params);  // from checkpoint

  const ObsLayout& layout() const { return layout_; }
  const NetConfig& net_config() const { return cfg_; }
  ParamSet& params() { return ps_; }
  const ParamSet& params() const { return ps_; }

  struct Cache {
    Mat scaled, goal_in, proprio, latent, trunk_in, mean;
    Mlp::Cache goal_cache, trunk_cache;
  };
  // obs rows -> action means [B, nj]; cache retained for backward
  void actor_forward(const Mat& teacher_obs, Cache& c, ThreadPool* pool) const;
  // d(loss)/d(mean) + d(loss)/d(log_std) -> accumulated parameter grads
  void actor_backward(const Mat& dmean, const Eigen::VectorXd& dlog_std, Cache& c,
                      ThreadPool* pool);
  void goal_latent(const Mat& teacher_obs, Mat& z, ThreadPool* pool) const;  // inference only

  struct CriticCache {
    Mat scaled, values;
    Mlp::Cache mlp_cache;
  };
  void critic_forward(const Mat& critic_obs, CriticCache& c, ThreadPool* pool) const;
  void critic_backward(const Mat& dvalues, CriticCache& c, ThreadPool* pool);

  Eigen::VectorXd log_std() const;
  PolicyOutput policy_output_row(const Cache& c, int row) const;

 private:
  void wire(uint64_t seed, bool fresh);
  ObsLayout layout_;
  NetConfig cfg_;
  ParamSet ps_;
  InputScale teacher_scale_, critic_scale_;
  Mlp goal_, trunk_, critic_;
  int log_std_block_ = -1;
};

// Egocentric student: depth CNN + temporal proprio encoder fused into the
// predicted goal latent; the actor additionally sees the image feature.
class StudentNet {
 public:
  StudentNet(const ObsLayout& layout, const NetConfig& cfg, uint64_t seed);
  explicit StudentNet(ParamSet params);

  const ObsLayout& layout() const { return layout_; }
  ParamSet& params() { return ps_; }
  const ParamSet& params() const { return ps_; }

  struct Cache {
    Mat proprio, proprio_scaled, hist, hist_chmajor, depth;
    Mat conv1_pre, conv1, conv2_pre, conv2, img_dense_pre, f_img;
    Mat tconv1_pre, tconv1, tconv2_pre, tconv2;  // f_hist = tconv2 flattened
    Mat fuse_in, latent, trunk_in, mean;
    Mlp::Cache trunk_cache;
  };
  void forward(const Mat& student_obs, Cache& c, ThreadPool* pool) const;
  // gradients flow from dmean and optionally dlatent (latent-matching loss)
  void backward(const Mat& dmean, const Mat* dlatent, const Eigen::VectorXd& dlog_std, Cache& c,
                ThreadPool* pool);

  Eigen::VectorXd log_std() const;

 private:
  void wire(uint64_t seed, bool fresh);
  ObsLayout layout_;
  NetConfig cfg_;
  ParamSet ps_;
  InputScale proprio_scale_;
  Conv1d depth1_, depth2_, temp1_, temp2_;
  Dense img_dense_, fusion_;
  Mlp trunk_;
  int log_std_block_ = -1;
};

// Adam over a ParamSet, kernel-table inner loop.
class Adam {
 public:
  explicit Adam(ParamSet& ps, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step();
  double lr = 1e-3;

 private:
  ParamSet& ps_;
  std::vector<double> m_, v_;
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

}  // namespace upright
