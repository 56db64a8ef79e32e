#include "darl/replay.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace darl {

ReplayBuffer::ReplayBuffer(int state_dim, int action_dim, size_t capacity)
    : state_dim_(state_dim), action_dim_(action_dim), capacity_(capacity) {
  if (state_dim < 1 || action_dim < 1 || capacity < 1)
    throw ConfigError("replay buffer needs positive dimensions and capacity");
}

void ReplayBuffer::push(const Transition& tr) {
  if (tr.s.size() != state_dim_ || tr.s_next.size() != state_dim_ || tr.a.size() != action_dim_)
    throw ConfigError("transition dimensions do not match the buffer configuration");
  if (!open_.steps.empty() && tr.episode_id != open_.id) end_episode();
  if (open_.steps.empty()) open_.id = tr.episode_id;
  open_.steps.push_back(tr);
  if (tr.terminal) end_episode();
  while (size() > capacity_ && !episodes_.empty()) {
    completed_size_ -= episodes_.front().steps.size();
    episodes_.pop_front();
  }
}

void ReplayBuffer::end_episode() {
  if (open_.steps.empty()) return;
  completed_size_ += open_.steps.size();
  episodes_.push_back(std::move(open_));
  open_ = EpisodeSteps{};
}

std::pair<size_t, size_t> ReplayBuffer::episode_span(int64_t episode_id) const {
  size_t offset = 0;
  for (const auto& ep : episodes_) {
    if (ep.id == episode_id) return {offset, offset + ep.steps.size()};
    offset += ep.steps.size();
  }
  throw ConfigError("episode " + std::to_string(episode_id) + " not in buffer");
}

std::pair<const EpisodeSteps*, int> ReplayBuffer::locate(size_t flat_index) const {
  for (const auto& ep : episodes_) {
    if (flat_index < ep.steps.size()) return {&ep, static_cast<int>(flat_index)};
    flat_index -= ep.steps.size();
  }
  throw NotReadyError("replay index out of range");
}

void ReplayBuffer::fill_row(const EpisodeSteps& ep, int t, int h, double gamma, int col,
                            NStepBatch& out) const {
  const Transition& first = ep.steps[t];
  out.s.col(col) = first.s;
  out.a.col(col) = first.a;
  double ret = 0.0, g = 1.0;
  int h_eff = 0;
  bool masked = false;
  const int last = static_cast<int>(ep.steps.size()) - 1;
  for (int i = 0; i < h; ++i) {
    const Transition& tr = ep.steps[t + i];
    ret += g * tr.r;
    g *= gamma;
    h_eff = i + 1;
    if (tr.terminal) {
      masked = true;
      out.bootstrap_s.col(col) = tr.s_next;
      break;
    }
    if (t + i == last) {  // episode truncated without a terminal
      out.bootstrap_s.col(col) = tr.s_next;
      break;
    }
    if (i == h - 1) out.bootstrap_s.col(col) = tr.s_next;
  }
  out.partial_return[col] = ret;
  out.discount[col] = std::pow(gamma, h_eff);
  out.bootstrap_mask[col] = masked ? 0.0 : 1.0;
  out.h_eff[col] = h_eff;
}

NStepBatch ReplayBuffer::sample_nstep(int batch, int h, double gamma, Rng& rng) const {
  if (completed_size_ == 0) throw NotReadyError("replay buffer holds no complete episode");
  if (batch < 1 || h < 1) throw ConfigError("sample_nstep needs batch >= 1 and h >= 1");
  NStepBatch out;
  out.s.resize(state_dim_, batch);
  out.a.resize(action_dim_, batch);
  out.bootstrap_s.resize(state_dim_, batch);
  out.partial_return.resize(batch);
  out.discount.resize(batch);
  out.bootstrap_mask.resize(batch);
  out.h_eff.resize(batch);
  for (int j = 0; j < batch; ++j) {
    const size_t k = rng.next_u64() % completed_size_;
    auto [ep, t] = locate(k);
    fill_row(*ep, t, h, gamma, j, out);
  }
  return out;
}

NStepBatch ReplayBuffer::sample_mixed(const ReplayBuffer& online, const ReplayBuffer& offline,
                                      int batch, int h, double gamma, Rng& rng) {
  if (offline.sampleable_size() == 0 && online.sampleable_size() == 0)
    throw NotReadyError("both replay buffers are empty");
  if (online.sampleable_size() == 0) return offline.sample_nstep(batch, h, gamma, rng);
  if (offline.sampleable_size() == 0) return online.sample_nstep(batch, h, gamma, rng);

  const int n_off = (batch + 1) / 2;
  const int n_on = batch - n_off;
  NStepBatch off = offline.sample_nstep(n_off, h, gamma, rng);
  NStepBatch on = n_on > 0 ? online.sample_nstep(n_on, h, gamma, rng) : NStepBatch{};

  NStepBatch out;
  const int n = offline.state_dim_, m = offline.action_dim_;
  out.s.resize(n, batch);
  out.a.resize(m, batch);
  out.bootstrap_s.resize(n, batch);
  out.partial_return.resize(batch);
  out.discount.resize(batch);
  out.bootstrap_mask.resize(batch);
  out.h_eff.resize(batch);

  std::vector<int> order(batch);
  for (int i = 0; i < batch; ++i) order[i] = i;
  for (int i = batch - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);

  for (int i = 0; i < batch; ++i) {
    const int dst = order[i];
    const NStepBatch& src = i < n_off ? off : on;
    const int col = i < n_off ? i : i - n_off;
    out.s.col(dst) = src.s.col(col);
    out.a.col(dst) = src.a.col(col);
    out.bootstrap_s.col(dst) = src.bootstrap_s.col(col);
    out.partial_return[dst] = src.partial_return[col];
    out.discount[dst] = src.discount[col];
    out.bootstrap_mask[dst] = src.bootstrap_mask[col];
    out.h_eff[dst] = src.h_eff[col];
  }
  return out;
}

VectorXd mc_returns(const std::vector<Transition>& episode, double gamma) {
  const int len = static_cast<int>(episode.size());
  if (len == 0) throw ConfigError("mc_returns needs a non-empty episode");
  for (int t = 0; t < len; ++t)
    if (episode[t].t != episode[0].t + t || episode[t].episode_id != episode[0].episode_id)
      throw ConfigError("mc_returns needs one contiguous episode");
  VectorXd g(len);
  double acc = 0.0;
  for (int t = len - 1; t >= 0; --t) {
    acc = episode[t].r + gamma * acc;
    g[t] = acc;
  }
  return g;
}

size_t TrajectoryDataset::num_transitions() const {
  size_t n = 0;
  for (const auto& ep : episodes) n += ep.steps.size();
  return n;
}

void TrajectoryDataset::compute_returns() {
  returns.clear();
  returns.reserve(episodes.size());
  for (const auto& ep : episodes) returns.push_back(mc_returns(ep.steps, gamma));
}

OfflineBatch sample_offline(const TrajectoryDataset& ds, int batch, Rng& rng) {
  const size_t total = ds.num_transitions();
  if (total == 0) throw NotReadyError("offline dataset is empty");
  if (ds.returns.size() != ds.episodes.size())
    throw ConfigError("dataset returns not computed; call compute_returns first");
  OfflineBatch out;
  out.s.resize(ds.state_dim, batch);
  out.a.resize(ds.action_dim, batch);
  out.s_next.resize(ds.state_dim, batch);
  out.r.resize(batch);
  out.terminal.resize(batch);
  out.mc_return.resize(batch);
  for (int j = 0; j < batch; ++j) {
    size_t k = rng.next_u64() % total;
    size_t e = 0;
    while (k >= ds.episodes[e].steps.size()) {
      k -= ds.episodes[e].steps.size();
      ++e;
    }
    const Transition& tr = ds.episodes[e].steps[k];
    out.s.col(j) = tr.s;
    out.a.col(j) = tr.a;
    out.s_next.col(j) = tr.s_next;
    out.r[j] = tr.r;
    out.terminal[j] = tr.terminal ? 1.0 : 0.0;
    out.mc_return[j] = ds.returns[e][static_cast<Eigen::Index>(k)];
  }
  return out;
}

void save_dataset(const TrajectoryDataset& ds, const std::filesystem::path& path) {
  std::ostringstream out;
  out << ds.state_dim << ' ' << ds.action_dim << ' ' << fmt_double(ds.gamma) << ' ' << ds.horizon
      << '\n';
  for (const auto& ep : ds.episodes) {
    for (const auto& tr : ep.steps) {
      out << ep.id << ' ' << tr.t;
      for (int i = 0; i < ds.state_dim; ++i) out << ' ' << fmt_double(tr.s[i]);
      for (int i = 0; i < ds.action_dim; ++i) out << ' ' << fmt_double(tr.a[i]);
      out << ' ' << fmt_double(tr.r) << ' ' << (tr.terminal ? 1 : 0) << '\n';
    }
  }
  write_text_file(path, out.str());
}

TrajectoryDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("dataset file is empty: " + path.string());
  auto hdr = split_ws(line);
  if (hdr.size() != 4) throw IoError("dataset header must be 'n m gamma T'");
  TrajectoryDataset ds;
  ds.state_dim = static_cast<int>(parse_int(hdr[0], "dataset n"));
  ds.action_dim = static_cast<int>(parse_int(hdr[1], "dataset m"));
  ds.gamma = parse_double(hdr[2], "dataset gamma");
  ds.horizon = static_cast<int>(parse_int(hdr[3], "dataset T"));
  const size_t fields = 4 + static_cast<size_t>(ds.state_dim + ds.action_dim);
  size_t lineno = 1;
  std::vector<Transition> pending;  // transitions of the episode being read
  int64_t pending_id = 0;
  auto flush = [&]() {
    if (pending.empty()) return;
    EpisodeSteps ep;
    ep.id = pending_id;
    // Reconstruct s_next chaining from consecutive rows; the stored rows carry
    // only (s, a, r, terminal), so s_next of step t is s of step t+1 and the
    // final step bootstraps from its own recorded next state.
    ds.episodes.push_back(std::move(ep));
    ds.episodes.back().steps = std::move(pending);
    pending.clear();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto tok = split_ws(line);
    if (tok.size() != fields)
      throw IoError("dataset line " + std::to_string(lineno) + ": expected " +
                    std::to_string(fields) + " fields, got " + std::to_string(tok.size()));
    Transition tr;
    tr.episode_id = parse_int(tok[0], "episode_id");
    tr.t = static_cast<int>(parse_int(tok[1], "step index"));
    tr.s.resize(ds.state_dim);
    tr.a.resize(ds.action_dim);
    size_t f = 2;
    for (int i = 0; i < ds.state_dim; ++i) tr.s[i] = parse_double(tok[f++], "state");
    for (int i = 0; i < ds.action_dim; ++i) tr.a[i] = parse_double(tok[f++], "action");
    tr.r = parse_double(tok[f++], "reward");
    tr.terminal = parse_int(tok[f], "terminal") != 0;
    if (!pending.empty() && tr.episode_id != pending_id) flush();
    pending_id = tr.episode_id;
    pending.push_back(std::move(tr));
  }
  flush();
  // Chain next states within each episode.
  for (auto& ep : ds.episodes) {
    for (size_t t = 0; t + 1 < ep.steps.size(); ++t) ep.steps[t].s_next = ep.steps[t + 1].s;
    if (!ep.steps.empty() && ep.steps.back().s_next.size() == 0)
      ep.steps.back().s_next = ep.steps.back().s;  // placeholder; terminal rows mask it
  }
  ds.compute_returns();
  return ds;
}

ReplayBuffer dataset_to_buffer(const TrajectoryDataset& ds, size_t capacity) {
  ReplayBuffer buf(ds.state_dim, ds.action_dim, capacity);
  for (const auto& ep : ds.episodes) {
    for (const auto& tr : ep.steps) buf.push(tr);
    buf.end_episode();
  }
  return buf;
}

}  // namespace darl
