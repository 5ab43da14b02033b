import copy

import numpy as np
import pytest
import torch

from fairtax.learner import SAC, ReplayBuffer, SacConfig, TrainingFault, Transition
from fairtax.learner.sac import squash, squashed_log_prob

SMALL = SacConfig(hidden=(32, 32), batch_size=32, warmup=0)


def random_batch(n=32, obs_dim=3, act_dim=2, seed=0, done_every=4):
    rng = np.random.default_rng(seed)
    return [
        Transition(
            obs=rng.normal(size=obs_dim),
            action=rng.uniform(size=act_dim),
            reward=float(rng.normal()),
            done=(i % done_every == 0),
            next_obs=rng.normal(size=obs_dim),
            info={"time_limit": i % 8 == 0},
        )
        for i in range(n)
    ]


def bandit_transitions(agent, n, rng):
    out = []
    for _ in range(n):
        a = agent.act(np.zeros(1)) if agent.updates else rng.uniform(size=1)
        out.append(Transition(np.zeros(1), a, 1.0 - abs(a[0] - 0.7), True, np.zeros(1)))
    return out


class TestSquash:
    def test_range(self):
        u = torch.linspace(-30, 30, 1001)
        a = squash(u)
        assert torch.all((a >= 0) & (a <= 1))

    def test_log_prob_matches_change_of_variables(self):
        # density of a = (tanh(u) + 1) / 2 via numeric derivative of the inverse map
        mu, log_std = torch.tensor([0.3], dtype=torch.float64), torch.tensor([-0.2], dtype=torch.float64)
        u = torch.tensor([0.9], dtype=torch.float64)
        a = squash(u)
        inv = lambda x: torch.atanh(2 * x - 1)  # noqa: E731
        h = 1e-7
        du_da = (inv(a + h) - inv(a - h)) / (2 * h)
        normal = torch.distributions.Normal(mu, log_std.exp())
        expected = normal.log_prob(u) + torch.log(du_da)
        assert squashed_log_prob(u, mu, log_std).item() == pytest.approx(expected.item(), abs=1e-6)


class TestAct:
    def test_bounds(self):
        agent = SAC(3, 6, SMALL, seed=0)
        rng = np.random.default_rng(0)
        for obs in rng.normal(scale=50, size=(200, 3)):
            for det in (True, False):
                a = agent.act(obs, deterministic=det)
                assert a.shape == (6,) and np.all((a >= 0) & (a <= 1))

    def test_deterministic_repeatable(self):
        agent = SAC(3, 6, SMALL, seed=0)
        obs = np.array([0.1, 0.2, 0.3])
        np.testing.assert_array_equal(agent.act(obs, True), agent.act(obs, True))

    def test_stochastic_varies(self):
        agent = SAC(3, 6, SMALL, seed=0)
        obs = np.zeros(3)
        assert not np.array_equal(agent.act(obs), agent.act(obs))

    def test_seed_fixes_initial_policy(self):
        a, b = SAC(3, 2, SMALL, seed=5), SAC(3, 2, SMALL, seed=5)
        np.testing.assert_array_equal(a.act(np.ones(3), True), b.act(np.ones(3), True))
        assert not np.array_equal(a.act(np.ones(3), True), SAC(3, 2, SMALL, seed=6).act(np.ones(3), True))

    def test_obs_scale_applied(self):
        a = SAC(2, 1, SMALL, seed=0, obs_scale=[1.0, 10.0])
        b = SAC(2, 1, SMALL, seed=0)
        np.testing.assert_allclose(a.act([0.5, 30.0], True), b.act([0.5, 3.0], True), rtol=1e-6)

    def test_temperature_widens_spread(self):
        rng = np.random.default_rng(0)
        spreads = {}
        for alpha in (0.001, 1.0):
            agent = SAC(1, 1, SacConfig(hidden=(32, 32), batch_size=64, gamma=0.0, alpha=alpha, actor_lr=3e-3, critic_lr=3e-3), seed=0)
            buf = ReplayBuffer(5000, seed=0)
            for t in bandit_transitions(agent, 256, rng):
                buf.add(t)
            for _ in range(600):
                agent.update(buf.sample(64))
                for t in bandit_transitions(agent, 1, rng):
                    buf.add(t)
            spreads[alpha] = np.std([agent.act(np.zeros(1))[0] for _ in range(2000)])
        assert spreads[1.0] > 2 * spreads[0.001]


class TestUpdate:
    def test_diagnostics_finite(self):
        agent = SAC(3, 2, SMALL, seed=0)
        diag = agent.update(random_batch())
        assert set(diag) == {"critic_loss", "actor_loss", "alpha_loss", "alpha", "entropy"}
        assert all(np.isfinite(v) for v in diag.values())
        assert agent.updates == 1

    def test_non_finite_raises_fault(self):
        agent = SAC(3, 2, SMALL, seed=0)
        batch = random_batch()
        batch[0].reward = float("nan")
        with pytest.raises(TrainingFault) as info:
            agent.update(batch)
        assert "critic_loss" in info.value.diagnostics

    def test_zero_learning_rates_freeze_policy(self):
        cfg = SacConfig(hidden=(32, 32), actor_lr=0.0, critic_lr=0.0, alpha_lr=0.0)
        agent = SAC(3, 2, cfg, seed=0)
        obs = np.random.default_rng(1).normal(size=(10, 3))
        before = [agent.act(o, True) for o in obs]
        for i in range(20):
            agent.update(random_batch(seed=i))
        for o, a in zip(obs, before):
            np.testing.assert_array_equal(agent.act(o, True), a)

    def test_fixed_alpha_not_tuned(self):
        agent = SAC(3, 2, SacConfig(hidden=(16,), alpha=0.2), seed=0)
        for i in range(5):
            agent.update(random_batch(seed=i))
        assert agent.alpha == pytest.approx(0.2)

    def test_time_limit_is_not_terminal(self):
        agent = SAC(3, 2, SMALL, seed=0)
        batch = agent.collate(random_batch())
        # transitions 0 and 8 are done with a time limit, 4 and 12 are truly done
        assert batch["done"][0] == 0 and batch["done"][8] == 0
        assert batch["done"][4] == 1 and batch["done"][12] == 1

    def test_determinism(self):
        runs = []
        for _ in range(2):
            agent = SAC(3, 2, SMALL, seed=3)
            runs.append([agent.update(random_batch(seed=i)) for i in range(15)])
        assert runs[0] == runs[1]


class TestCriticGradient:
    def test_matches_finite_differences(self):
        cfg = SacConfig(hidden=(16, 16), dtype="float64", gamma=0.99)
        agent = SAC(3, 2, cfg, seed=0)
        batch = agent.collate(random_batch(n=16))
        state = agent.generator.get_state()

        def loss():
            agent.generator.set_state(state)
            return agent.critic_loss(batch)

        agent.critic.zero_grad()
        loss().backward()
        rng = np.random.default_rng(0)
        params = list(agent.critic.parameters())
        h = 1e-6
        for _ in range(10):
            p = params[rng.integers(len(params))]
            idx = tuple(int(rng.integers(s)) for s in p.shape)
            analytic = p.grad[idx].item()
            with torch.no_grad():
                orig = p[idx].item()
                p[idx] = orig + h
                up = loss().item()
                p[idx] = orig - h
                down = loss().item()
                p[idx] = orig
            numeric = (up - down) / (2 * h)
            assert abs(analytic - numeric) <= 1e-3 * max(abs(numeric), 1e-8) + 1e-9


class TestTargets:
    def test_geometric_decay(self):
        rho = 0.05
        agent = SAC(3, 2, SacConfig(hidden=(8,), tau=rho, dtype="float64"), seed=0)
        with torch.no_grad():
            for p in agent.critic.parameters():
                p.add_(1.0)
        gap0 = [(p - t).clone() for p, t in zip(agent.critic.parameters(), agent.critic_target.parameters())]
        for k in range(1, 41):
            agent.soft_update_targets()
            if k % 10 == 0:
                for g0, p, t in zip(gap0, agent.critic.parameters(), agent.critic_target.parameters()):
                    torch.testing.assert_close(p - t, g0 * (1 - rho) ** k, rtol=1e-9, atol=1e-12)

    def test_targets_start_equal(self):
        agent = SAC(3, 2, SMALL, seed=0)
        for p, t in zip(agent.critic.parameters(), agent.critic_target.parameters()):
            assert torch.equal(p, t) and not t.requires_grad


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        agent = SAC(3, 2, SMALL, seed=7, obs_scale=[1, 1, 10])
        for i in range(5):
            agent.update(random_batch(seed=i))
        agent.save(tmp_path / "a.pt", meta={"config_hash": "abc"})
        clone, meta = SAC.load(tmp_path / "a.pt")
        assert meta == {"config_hash": "abc"}
        assert clone.updates == 5 and clone.config == agent.config
        obs = np.random.default_rng(0).normal(size=(20, 3))
        for o in obs:
            np.testing.assert_array_equal(clone.act(o, True), agent.act(o, True))
        # optimizer and sampling state survive too
        twin = copy.deepcopy(agent)
        assert clone.update(random_batch(seed=9)) == twin.update(random_batch(seed=9))

    def test_rejects_unknown_version(self, tmp_path):
        agent = SAC(3, 2, SMALL, seed=0)
        blob = agent.state()
        blob["version"] = 999
        torch.save(blob, tmp_path / "bad.pt")
        with pytest.raises(ValueError, match="version"):
            SAC.load(tmp_path / "bad.pt")


class TestConfig:
    @pytest.mark.parametrize("kw", [{"gamma": 1.5}, {"tau": -0.1}, {"batch_size": 0}])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            SacConfig(**kw)

    def test_digest_stable(self):
        assert SacConfig().digest() == SacConfig().digest()
        assert SacConfig().digest() != SacConfig(tau=0.01).digest()
