#include "darl/replay.hpp"

#include "test_helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace darl;

namespace {

Transition make_tr(int64_t ep, int t, double r, bool terminal, double tag = 0.0) {
  Transition tr;
  tr.s = VectorXd::Constant(2, tag + t);
  tr.a = VectorXd::Constant(1, 0.1 * t);
  tr.r = r;
  tr.s_next = VectorXd::Constant(2, tag + t + 1);
  tr.terminal = terminal;
  tr.episode_id = ep;
  tr.t = t;
  return tr;
}

// One complete episode of the given length with the given rewards.
void push_episode(ReplayBuffer& buf, int64_t ep, const std::vector<double>& rewards,
                  double tag = 0.0) {
  for (size_t t = 0; t < rewards.size(); ++t)
    buf.push(make_tr(ep, static_cast<int>(t), rewards[t], t + 1 == rewards.size(), tag));
}

}  // namespace

TEST_CASE("push into an empty buffer gives size 1") {
  ReplayBuffer buf(2, 1, 100);
  buf.push(make_tr(0, 0, 1.0, false));
  CHECK(buf.size() == 1);
  CHECK(buf.sampleable_size() == 0);  // episode still open
}

TEST_CASE("a full episode spans exactly its length in the episode index") {
  ReplayBuffer buf(2, 1, 100);
  push_episode(buf, 5, std::vector<double>(7, 0.0));
  auto [first, last] = buf.episode_span(5);
  CHECK(last - first == 7);
  CHECK(buf.num_episodes() == 1);
}

TEST_CASE("pushing beyond capacity evicts the oldest complete episode") {
  ReplayBuffer buf(2, 1, 10);
  push_episode(buf, 0, std::vector<double>(4, 0.0));
  push_episode(buf, 1, std::vector<double>(4, 0.0));
  CHECK(buf.size() == 8);
  push_episode(buf, 2, std::vector<double>(4, 0.0));  // 12 > 10
  CHECK(buf.num_episodes() == 2);
  CHECK_THROWS_AS(buf.episode_span(0), ConfigError);  // evicted
  CHECK(buf.episode_span(1).first == 0);
}

TEST_CASE("dimension mismatches are configuration errors") {
  ReplayBuffer buf(2, 1, 10);
  Transition bad = make_tr(0, 0, 0.0, false);
  bad.s = VectorXd::Zero(3);
  CHECK_THROWS_AS(buf.push(bad), ConfigError);
}

TEST_CASE("one-step sampling reduces to the single reward and next state") {
  ReplayBuffer buf(2, 1, 100);
  push_episode(buf, 0, {1.5, 2.5, 3.5});
  Rng rng(3);
  NStepBatch batch = buf.sample_nstep(64, 1, 0.8, rng);
  for (int j = 0; j < batch.size(); ++j) {
    const int t = static_cast<int>(std::lround(batch.s(0, j)));
    CHECK(batch.partial_return[j] == doctest::Approx(1.5 + t));
    CHECK(batch.h_eff[j] == 1);
    CHECK(batch.discount[j] == doctest::Approx(0.8));
    CHECK(batch.bootstrap_s(0, j) == doctest::Approx(t + 1.0));
  }
}

TEST_CASE("three-step partial return with unit rewards matches the direct sum") {
  // rewards (1, 1, 1), gamma 0.8 -> 1 + 0.8 + 0.64 = 2.44
  ReplayBuffer buf(2, 1, 100);
  push_episode(buf, 0, {1.0, 1.0, 1.0, 1.0, 1.0});
  Rng rng(5);
  NStepBatch batch = buf.sample_nstep(128, 3, 0.8, rng);
  bool saw_full_window = false;
  for (int j = 0; j < batch.size(); ++j) {
    const int t = static_cast<int>(std::lround(batch.s(0, j)));
    if (t <= 2) {
      saw_full_window = true;
      CHECK(batch.partial_return[j] == doctest::Approx(2.44));
      CHECK(batch.h_eff[j] == 3);
      CHECK(batch.bootstrap_s(0, j) == doctest::Approx(t + 3.0));
    }
  }
  CHECK(saw_full_window);
}

TEST_CASE("windows starting near the terminal truncate and mask the bootstrap") {
  ReplayBuffer buf(2, 1, 100);
  const int horizon = 5;
  push_episode(buf, 0, std::vector<double>(horizon, 1.0));
  Rng rng(7);
  NStepBatch batch = buf.sample_nstep(256, 3, 0.8, rng);
  bool saw_boundary = false;
  for (int j = 0; j < batch.size(); ++j) {
    const int t = static_cast<int>(std::lround(batch.s(0, j)));
    if (t == horizon - 1) {
      saw_boundary = true;
      CHECK(batch.h_eff[j] == 1);
      CHECK(batch.partial_return[j] == doctest::Approx(1.0));
      CHECK(batch.discount[j] == doctest::Approx(0.8));
      CHECK(batch.bootstrap_mask[j] == 0.0);
    } else if (t == horizon - 2) {
      CHECK(batch.h_eff[j] == 2);
      CHECK(batch.bootstrap_mask[j] == 0.0);
    }
    CHECK(batch.h_eff[j] == std::min(3, horizon - t));
  }
  CHECK(saw_boundary);
}

TEST_CASE("windows never cross an episode boundary without truncation") {
  ReplayBuffer buf(2, 1, 1000);
  Rng seed_rng(11);
  for (int ep = 0; ep < 6; ++ep)
    push_episode(buf, ep, std::vector<double>(4 + seed_rng.uniform_int(5), 1.0), 100.0 * ep);
  Rng rng(13);
  NStepBatch batch = buf.sample_nstep(512, 3, 0.8, rng);
  for (int j = 0; j < batch.size(); ++j) {
    // The tag encodes the episode; bootstrap must carry the same tag.
    const double start_tag = std::floor(batch.s(0, j) / 100.0);
    const double boot_tag = std::floor((batch.bootstrap_s(0, j) - 0.5) / 100.0);
    CHECK(start_tag == boot_tag);
  }
}

TEST_CASE("sampled partial returns recompute exactly from the stored rewards") {
  ReplayBuffer buf(2, 1, 1000);
  Rng data_rng(17);
  std::vector<std::vector<double>> rewards(5);
  for (int ep = 0; ep < 5; ++ep) {
    rewards[ep].resize(6);
    for (auto& r : rewards[ep]) r = data_rng.normal();
    push_episode(buf, ep, rewards[ep], 100.0 * ep);
  }
  Rng rng(19);
  const double gamma = 0.8;
  NStepBatch batch = buf.sample_nstep(512, 3, gamma, rng);
  for (int j = 0; j < batch.size(); ++j) {
    const int ep = static_cast<int>(std::lround(std::floor(batch.s(0, j) / 100.0)));
    const int t = static_cast<int>(std::lround(batch.s(0, j) - 100.0 * ep));
    double expect = 0.0, g = 1.0;
    for (int i = 0; i < batch.h_eff[j]; ++i) {
      expect += g * rewards[ep][t + i];
      g *= gamma;
    }
    CHECK(batch.partial_return[j] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("mixed batches split half and half after the first online episode") {
  ReplayBuffer offline(2, 1, 1000), online(2, 1, 1000);
  push_episode(offline, 0, std::vector<double>(10, 1.0), 1000.0);
  push_episode(online, 100, std::vector<double>(10, 1.0), 2000.0);
  Rng rng(23);
  NStepBatch batch = ReplayBuffer::sample_mixed(online, offline, 1024, 1, 0.8, rng);
  int n_off = 0;
  for (int j = 0; j < batch.size(); ++j)
    if (batch.s(0, j) >= 1000.0 && batch.s(0, j) < 2000.0) ++n_off;
  CHECK(n_off == 512);
}

TEST_CASE("mixed sampling falls back to pure offline before any online episode") {
  ReplayBuffer offline(2, 1, 1000), online(2, 1, 1000);
  push_episode(offline, 0, std::vector<double>(10, 1.0), 1000.0);
  Rng rng(29);
  NStepBatch batch = ReplayBuffer::sample_mixed(online, offline, 1024, 1, 0.8, rng);
  for (int j = 0; j < batch.size(); ++j) CHECK(batch.s(0, j) >= 1000.0);
}

TEST_CASE("mixed sampling with both sides empty is a not-ready error") {
  ReplayBuffer offline(2, 1, 10), online(2, 1, 10);
  Rng rng(1);
  CHECK_THROWS_AS(ReplayBuffer::sample_mixed(online, offline, 8, 1, 0.8, rng), NotReadyError);
}

TEST_CASE("the offline fraction over many draws passes a binomial test") {
  ReplayBuffer offline(2, 1, 1000), online(2, 1, 1000);
  push_episode(offline, 0, std::vector<double>(10, 1.0), 1000.0);
  push_episode(online, 100, std::vector<double>(10, 1.0), 2000.0);
  Rng rng(31);
  int64_t n_off = 0, total = 0;
  for (int draw = 0; draw < 5000; ++draw) {
    NStepBatch batch = ReplayBuffer::sample_mixed(online, offline, 2, 1, 0.8, rng);
    for (int j = 0; j < 2; ++j) {
      if (batch.s(0, j) < 2000.0) ++n_off;
      ++total;
    }
  }
  const double frac = static_cast<double>(n_off) / total;
  CHECK(frac >= 0.49);
  CHECK(frac <= 0.51);
  // Two-sided binomial test via the normal approximation.
  const double z = (n_off - 0.5 * total) / std::sqrt(0.25 * total);
  const double p = std::erfc(std::fabs(z) / std::sqrt(2.0));
  CHECK(p > 0.01);
}

TEST_CASE("empty buffer sampling is a not-ready error") {
  ReplayBuffer buf(2, 1, 10);
  Rng rng(1);
  CHECK_THROWS_AS(buf.sample_nstep(8, 3, 0.8, rng), NotReadyError);
}

TEST_CASE("mc returns: zeros, gamma 0, and the pinned three-step case") {
  std::vector<Transition> ep;
  for (int t = 0; t < 3; ++t) ep.push_back(make_tr(0, t, 0.0, t == 2));

  SUBCASE("all rewards zero") {
    VectorXd g = mc_returns(ep, 0.8);
    CHECK(g.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("gamma 0 copies the rewards") {
    ep[0].r = 3.0;
    ep[1].r = -1.0;
    ep[2].r = 2.0;
    VectorXd g = mc_returns(ep, 0.0);
    CHECK(g[0] == 3.0);
    CHECK(g[1] == -1.0);
    CHECK(g[2] == 2.0);
  }
  SUBCASE("rewards (0, 0, 1) at gamma 0.8 give (0.64, 0.8, 1.0)") {
    ep[2].r = 1.0;
    VectorXd g = mc_returns(ep, 0.8);
    CHECK(g[0] == doctest::Approx(0.64).epsilon(1e-12));
    CHECK(g[1] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(g[2] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("mc returns match brute-force double-loop summation") {
  Rng rng(37);
  for (int trial = 0; trial < 50; ++trial) {
    const int len = 2 + rng.uniform_int(20);
    std::vector<Transition> ep;
    for (int t = 0; t < len; ++t) ep.push_back(make_tr(0, t, rng.normal(), t + 1 == len));
    const double gamma = rng.uniform();
    VectorXd g = mc_returns(ep, gamma);
    for (int t = 0; t < len; ++t) {
      double expect = 0.0;
      for (int i = t; i < len; ++i) expect += std::pow(gamma, i - t) * ep[i].r;
      CHECK(g[t] == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("mc returns reject non-contiguous episodes") {
  std::vector<Transition> ep = {make_tr(0, 0, 1.0, false), make_tr(0, 2, 1.0, true)};
  CHECK_THROWS_AS(mc_returns(ep, 0.8), ConfigError);
}

TEST_CASE("dataset files round-trip bit-exactly") {
  darl::test::TempDir tmp("dataset");
  TrajectoryDataset ds;
  ds.state_dim = 2;
  ds.action_dim = 1;
  ds.gamma = 0.8;
  ds.horizon = 3;
  Rng rng(41);
  for (int e = 0; e < 4; ++e) {
    EpisodeSteps ep;
    ep.id = e;
    for (int t = 0; t < 3; ++t) {
      Transition tr;
      tr.s = rng.normal_vec(2);
      tr.a = rng.normal_vec(1);
      tr.r = rng.normal();
      tr.terminal = t == 2;
      tr.episode_id = e;
      tr.t = t;
      ep.steps.push_back(tr);
    }
    for (int t = 0; t + 1 < 3; ++t) ep.steps[t].s_next = ep.steps[t + 1].s;
    ep.steps[2].s_next = ep.steps[2].s;
    ds.episodes.push_back(ep);
  }
  ds.compute_returns();

  const auto p1 = tmp.path() / "a.ds";
  const auto p2 = tmp.path() / "b.ds";
  save_dataset(ds, p1);
  TrajectoryDataset loaded = load_dataset(p1);
  save_dataset(loaded, p2);
  CHECK(read_text_file(p1) == read_text_file(p2));

  REQUIRE(loaded.episodes.size() == ds.episodes.size());
  for (size_t e = 0; e < ds.episodes.size(); ++e) {
    REQUIRE(loaded.episodes[e].steps.size() == ds.episodes[e].steps.size());
    for (size_t t = 0; t < ds.episodes[e].steps.size(); ++t) {
      const Transition& a = ds.episodes[e].steps[t];
      const Transition& b = loaded.episodes[e].steps[t];
      CHECK(a.s == b.s);
      CHECK(a.a == b.a);
      CHECK(a.r == b.r);
      CHECK(a.terminal == b.terminal);
      CHECK(a.episode_id == b.episode_id);
      CHECK(a.t == b.t);
      if (t + 1 < ds.episodes[e].steps.size()) CHECK(a.s_next == b.s_next);
    }
  }
}

TEST_CASE("an empty dataset writes a header-only file and loads back empty") {
  darl::test::TempDir tmp("dataset-empty");
  TrajectoryDataset ds;
  ds.state_dim = 4;
  ds.action_dim = 2;
  ds.gamma = 0.8;
  ds.horizon = 50;
  const auto path = tmp.path() / "empty.ds";
  save_dataset(ds, path);
  const std::string text = read_text_file(path);
  CHECK(text == "4 2 0.8 50\n");
  TrajectoryDataset loaded = load_dataset(path);
  CHECK(loaded.episodes.empty());
  CHECK(loaded.state_dim == 4);
}

TEST_CASE("dataset line count is the header plus the transition count") {
  darl::test::TempDir tmp("dataset-lines");
  TrajectoryDataset ds;
  ds.state_dim = 1;
  ds.action_dim = 1;
  ds.gamma = 0.8;
  ds.horizon = 2;
  for (int e = 0; e < 5; ++e) {
    EpisodeSteps ep;
    ep.id = e;
    for (int t = 0; t < 2; ++t) {
      Transition tr;
      tr.s = VectorXd::Zero(1);
      tr.a = VectorXd::Zero(1);
      tr.s_next = VectorXd::Zero(1);
      tr.r = 0.0;
      tr.terminal = t == 1;
      tr.episode_id = e;
      tr.t = t;
      ep.steps.push_back(tr);
    }
    ds.episodes.push_back(ep);
  }
  ds.compute_returns();
  const auto path = tmp.path() / "lines.ds";
  save_dataset(ds, path);
  const std::string text = read_text_file(path);
  const size_t lines = static_cast<size_t>(std::count(text.begin(), text.end(), '\n'));
  CHECK(lines == 1 + ds.num_transitions());
}

TEST_CASE("offline batches carry the per-row trajectory returns") {
  TrajectoryDataset ds;
  ds.state_dim = 1;
  ds.action_dim = 1;
  ds.gamma = 0.5;
  ds.horizon = 3;
  EpisodeSteps ep;
  ep.id = 0;
  for (int t = 0; t < 3; ++t) {
    Transition tr;
    tr.s = VectorXd::Constant(1, t);
    tr.a = VectorXd::Zero(1);
    tr.s_next = VectorXd::Constant(1, t + 1);
    tr.r = 1.0;
    tr.terminal = t == 2;
    tr.episode_id = 0;
    tr.t = t;
    ep.steps.push_back(tr);
  }
  ds.episodes.push_back(ep);
  ds.compute_returns();
  Rng rng(43);
  OfflineBatch batch = sample_offline(ds, 64, rng);
  for (int j = 0; j < batch.size(); ++j) {
    const int t = static_cast<int>(std::lround(batch.s(0, j)));
    const double expect = t == 0 ? 1.75 : t == 1 ? 1.5 : 1.0;  // 1 + 0.5 + 0.25 backward
    CHECK(batch.mc_return[j] == doctest::Approx(expect).epsilon(1e-12));
  }
}
