// Transition and trajectory storage: episode-contiguous ring buffer, h-step
// sampling with episode-end truncation, Monte-Carlo returns, mixed
// online/offline batches, and the dataset interchange file.
#pragma once

#include "darl/common.hpp"

#include <deque>

namespace darl {

struct Transition {
  VectorXd s, a;
  double r = 0.0;
  VectorXd s_next;
  bool terminal = false;  // value-terminal (masks the bootstrap)
  int64_t episode_id = 0;
  int t = 0;
};

struct EpisodeSteps {
  int64_t id = 0;
  std::vector<Transition> steps;
};

struct NStepBatch {
  MatrixXd s, a;            // n x B, m x B
  VectorXd partial_return;  // sum of gamma^i r over the effective window
  MatrixXd bootstrap_s;     // n x B
  VectorXd discount;        // gamma^{h'}
  VectorXd bootstrap_mask;  // 1 = bootstrap allowed, 0 = terminal-masked
  Eigen::VectorXi h_eff;
  int size() const { return static_cast<int>(partial_return.size()); }
};

// Episodes are stored contiguously; eviction drops whole episodes from the
// front. Sampling covers completed episodes only.
class ReplayBuffer {
 public:
  ReplayBuffer(int state_dim, int action_dim, size_t capacity);

  void push(const Transition& tr);
  // Closes the open episode (horizon truncation without a terminal flag).
  void end_episode();

  size_t size() const { return completed_size_ + open_.steps.size(); }
  size_t sampleable_size() const { return completed_size_; }
  size_t num_episodes() const { return episodes_.size(); }
  const EpisodeSteps& episode(size_t i) const { return episodes_[i]; }
  // [first, last) span of an episode in the flattened completed ordering.
  std::pair<size_t, size_t> episode_span(int64_t episode_id) const;

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }

  NStepBatch sample_nstep(int batch, int h, double gamma, Rng& rng) const;

  // ceil(B/2) offline rows and floor(B/2) online rows, shuffled; 100% offline
  // until the online side has a completed episode.
  static NStepBatch sample_mixed(const ReplayBuffer& online, const ReplayBuffer& offline,
                                 int batch, int h, double gamma, Rng& rng);

 private:
  void fill_row(const EpisodeSteps& ep, int t, int h, double gamma, int col, NStepBatch& out) const;
  std::pair<const EpisodeSteps*, int> locate(size_t flat_index) const;

  int state_dim_, action_dim_;
  size_t capacity_;
  std::deque<EpisodeSteps> episodes_;
  EpisodeSteps open_;
  size_t completed_size_ = 0;
};

// G_t = r_t + gamma * G_{t+1} over one complete episode, backward recursion.
VectorXd mc_returns(const std::vector<Transition>& episode, double gamma);

// Offline trajectory dataset, the canonical demo interchange object.
struct TrajectoryDataset {
  int state_dim = 0;
  int action_dim = 0;
  double gamma = 0.8;
  int horizon = 0;
  std::vector<EpisodeSteps> episodes;
  std::vector<VectorXd> returns;  // per-episode Monte-Carlo returns

  size_t num_transitions() const;
  void compute_returns();
};

// A uniform offline minibatch with per-row trajectory returns.
struct OfflineBatch {
  MatrixXd s, a, s_next;
  VectorXd r, terminal, mc_return;
  int size() const { return static_cast<int>(r.size()); }
};
OfflineBatch sample_offline(const TrajectoryDataset& ds, int batch, Rng& rng);

// Text format: header "n m gamma T", then one transition per line:
// "episode_id t s[0..n) a[0..m) r terminal".
void save_dataset(const TrajectoryDataset& ds, const std::filesystem::path& path);
TrajectoryDataset load_dataset(const std::filesystem::path& path);

ReplayBuffer dataset_to_buffer(const TrajectoryDataset& ds, size_t capacity);

}  // namespace darl
