"""Advantage estimation, clipped objective, and the train loop contract."""

import numpy as np
import pytest

from hcrl import nn
from hcrl.envs.core import DifficultyLevel
from hcrl.ppo import (
    LengthMismatch,
    NonFiniteLoss,
    PpoConfig,
    StalePolicyVersion,
    Transition,
    compute_gae,
    normalize_advantages,
    ppo_objective,
    train_iteration,
)
from hcrl.rollout import TrajectoryBatch


def gae_reference(rewards, values, terminals, bootstrap, gamma, lam, tb=None):
    """Forward-sum oracle: A_t = sum_k (gamma lam)^k delta_{t+k} within the episode."""
    n = len(rewards)
    tb = np.zeros(n) if tb is None else tb
    deltas = np.zeros(n)
    for t in range(n):
        if terminals[t]:
            next_v = tb[t]
        elif t + 1 < n:
            next_v = values[t + 1]
        else:
            next_v = bootstrap
        deltas[t] = rewards[t] + gamma * next_v - values[t]
    adv = np.zeros(n)
    for t in range(n):
        acc = 0.0
        w = 1.0
        for k in range(t, n):
            acc += w * deltas[k]
            if terminals[k]:
                break
            w *= gamma * lam
        adv[t] = acc
    return adv, adv + values


def test_gae_matches_forward_sum_oracle_on_random_trajectories():
    rng = np.random.default_rng(123)
    for _ in range(60):
        n = int(rng.integers(1, 64))
        rewards = rng.normal(size=n)
        values = rng.normal(size=n)
        terminals = rng.random(n) < 0.15
        bootstrap = 0.0 if terminals[-1] else float(rng.normal())
        tb = np.where(terminals, rng.normal(size=n) * (rng.random(n) < 0.5), 0.0)
        adv, ret = compute_gae(rewards, values, terminals, bootstrap, 0.97, 0.9, tb)
        ref_adv, ref_ret = gae_reference(rewards, values, terminals, bootstrap, 0.97, 0.9, tb)
        assert np.max(np.abs(adv - ref_adv)) < 1e-12
        assert np.max(np.abs(ret - ref_ret)) < 1e-12


def test_gae_hand_computed_two_step_case():
    # Episode: r0=0 nonterminal, r1=1 terminal, V=(0.5, 0.25), gamma=0.9, lam=1.
    adv, ret = compute_gae(
        np.array([0.0, 1.0]),
        np.array([0.5, 0.25]),
        np.array([False, True]),
        bootstrap_value=0.0,
        gamma=0.9,
        lam=1.0,
    )
    d1 = 1.0 - 0.25
    d0 = 0.0 + 0.9 * 0.25 - 0.5
    assert adv[1] == pytest.approx(d1)
    assert adv[0] == pytest.approx(d0 + 0.9 * d1)
    assert ret[0] == pytest.approx(adv[0] + 0.5)


def test_gae_timeout_bootstrap_feeds_one_step_target_only():
    # A truncated two-step episode: the timeout step's target sees gamma*tb,
    # but the recursion still resets (the next episode's advantage is
    # untouched by it).
    rewards = np.array([-0.01, -0.01, 0.5])
    values = np.array([0.2, 0.3, 0.1])
    terminals = np.array([False, True, False])
    tb = np.array([0.0, 0.7, 0.0])
    adv, _ = compute_gae(rewards, values, terminals, 0.4, 0.9, 0.8, tb)
    d2 = 0.5 + 0.9 * 0.4 - 0.1
    d1 = -0.01 + 0.9 * 0.7 - 0.3
    d0 = -0.01 + 0.9 * 0.3 - 0.2
    assert adv[2] == pytest.approx(d2)
    assert adv[1] == pytest.approx(d1)  # no tail beyond the truncation
    assert adv[0] == pytest.approx(d0 + 0.9 * 0.8 * d1)


def test_gae_terminal_tail_ignores_bootstrap():
    adv_a, _ = compute_gae(
        np.array([1.0]), np.array([0.0]), np.array([True]), 99.0, 0.99, 0.95
    )
    adv_b, _ = compute_gae(
        np.array([1.0]), np.array([0.0]), np.array([True]), 0.0, 0.99, 0.95
    )
    assert adv_a[0] == adv_b[0] == pytest.approx(1.0)


def test_gae_length_mismatches_raise():
    r = np.zeros(4)
    with pytest.raises(LengthMismatch):
        compute_gae(r, np.zeros(3), np.zeros(4, dtype=bool), 0.0, 0.9, 0.9)
    with pytest.raises(LengthMismatch):
        compute_gae(r, np.zeros(4), np.zeros(5, dtype=bool), 0.0, 0.9, 0.9)
    with pytest.raises(LengthMismatch):
        compute_gae(r, np.zeros(4), np.zeros(4, dtype=bool), 0.0, 0.9, 0.9, np.zeros(2))


def test_normalize_advantages_zero_mean_unit_std():
    rng = np.random.default_rng(5)
    adv = rng.normal(3.0, 2.5, size=400)
    out = normalize_advantages(adv)
    assert abs(out.mean()) < 1e-12
    assert out.std() == pytest.approx(1.0, abs=1e-9)
    # Constant batches collapse to zeros instead of dividing by zero.
    flat = normalize_advantages(np.full(16, 2.0))
    assert np.all(flat == 0.0)


def test_transition_validates_log_prob_and_value():
    ok = dict(
        obs=np.zeros(3),
        action=1,
        reward=0.0,
        terminal=False,
        difficulty=DifficultyLevel(0, 5),
    )
    Transition(log_prob=-0.5, value=0.1, **ok)
    with pytest.raises(ValueError):
        Transition(log_prob=0.2, value=0.1, **ok)
    with pytest.raises(ValueError):
        Transition(log_prob=-0.5, value=float("nan"), **ok)


def test_ppo_config_validation_and_round_size():
    assert PpoConfig().round_size == 500
    with pytest.raises(ValueError):
        PpoConfig(gamma=0.0)
    with pytest.raises(ValueError):
        PpoConfig(lam=1.5)
    with pytest.raises(ValueError):
        PpoConfig(clip=0.0)
    with pytest.raises(ValueError):
        PpoConfig(epochs_per_batch=-1)
    with pytest.raises(ValueError):
        PpoConfig(workers=0)


def _spec_and_batch_inputs(seed, n=32, input_dim=4, actions=3, hidden=(6, 5)):
    rng = np.random.default_rng(seed)
    spec = nn.MlpSpec(input_dim=input_dim, hidden=hidden, action_count=actions)
    params = nn.init_params(spec, seed)
    obs = rng.normal(size=(n, input_dim))
    acts = rng.integers(0, actions, size=n)
    advantages = rng.normal(size=n)
    returns = rng.normal(size=n)
    return rng, spec, params, obs, acts, advantages, returns


def test_objective_at_sampling_params_has_unit_ratios_zero_kl():
    _, spec, params, obs, acts, advantages, returns = _spec_and_batch_inputs(0)
    logits, _ = nn.forward_batch(params, spec, obs)
    old_lp = nn.log_softmax(logits)[np.arange(len(acts)), acts]
    loss, _grads, stats = ppo_objective(
        obs, acts, old_lp, advantages, returns, params, spec, PpoConfig()
    )
    assert stats.approx_kl == pytest.approx(0.0, abs=1e-12)
    # ratio == 1 everywhere, so the policy term is -mean(advantage)
    assert stats.policy_loss == pytest.approx(-advantages.mean(), abs=1e-12)
    assert np.isfinite(loss)


def test_objective_entropy_of_uniform_policy_is_log_action_count():
    spec = nn.MlpSpec(input_dim=4, hidden=(5,), action_count=3)
    params = nn.init_params(spec, 1)
    params.values[:] = 0.0  # all-zero net emits uniform logits
    obs = np.random.default_rng(2).normal(size=(8, 4))
    old_lp = np.full(8, np.log(1 / 3))
    _, _, stats = ppo_objective(
        obs,
        np.zeros(8, dtype=np.int64),
        old_lp,
        np.zeros(8),
        np.zeros(8),
        params,
        spec,
        PpoConfig(),
    )
    assert stats.entropy == pytest.approx(np.log(3.0), abs=1e-12)


def test_objective_nonfinite_inputs_raise():
    _, spec, params, obs, acts, advantages, returns = _spec_and_batch_inputs(3)
    advantages = advantages.copy()
    advantages[0] = np.inf
    with np.errstate(invalid="ignore"), pytest.raises(NonFiniteLoss):
        ppo_objective(obs, acts, advantages * 1.0, advantages, returns, params, spec, PpoConfig())


def _fd_check(mask_seed=None, ratio_spread=0.0, seed=7, tol=1e-4):
    rng, spec, params, obs, acts, advantages, returns = _spec_and_batch_inputs(seed)
    logits, _ = nn.forward_batch(params, spec, obs)
    masks = None
    if mask_seed is not None:
        mrng = np.random.default_rng(mask_seed)
        masks = mrng.random((len(acts), spec.action_count)) < 0.7
        masks[np.arange(len(acts)), acts] = True  # sampled action stays legal
        logits = nn.apply_action_mask(logits, masks)
    old_lp = nn.log_softmax(logits)[np.arange(len(acts)), acts]
    # Optionally shift old log-probs so some ratios leave the clip band.
    old_lp = old_lp + ratio_spread * rng.normal(size=len(acts))
    old_lp = np.minimum(old_lp, 0.0)
    config = PpoConfig()

    def loss_at(flat):
        p = nn.PolicyParams(values=flat)
        loss, _, _ = ppo_objective(
            obs, acts, old_lp, advantages, returns, p, spec, config, action_masks=masks
        )
        return loss

    _, grads, _ = ppo_objective(
        obs, acts, old_lp, advantages, returns, params, spec, config, action_masks=masks
    )
    eps = 1e-6
    idx = rng.choice(spec.param_count, size=50, replace=False)
    for i in idx:
        up = params.values.copy()
        down = params.values.copy()
        up[i] += eps
        down[i] -= eps
        numeric = (loss_at(up) - loss_at(down)) / (2 * eps)
        denom = max(abs(numeric), abs(grads[i]), 1e-8)
        assert abs(grads[i] - numeric) / denom <= tol, (i, grads[i], numeric)


def test_objective_gradient_matches_finite_differences():
    _fd_check(seed=7)


def test_objective_gradient_with_clipped_ratios():
    _fd_check(ratio_spread=0.5, seed=8)


def test_objective_gradient_under_action_masks():
    _fd_check(mask_seed=21, seed=9)


def _make_batch(spec, params, config, reward_for_action0=1.0, seed=0):
    """All length-1 episodes; reward depends on the sampled action."""
    rng = np.random.default_rng(seed)
    n = config.workers * config.horizon
    obs = rng.normal(size=(n, spec.input_dim))
    logits, values = nn.forward_batch(params, spec, obs)
    log_probs = nn.log_softmax(logits)
    actions = np.array([rng.choice(spec.action_count, p=p) for p in np.exp(log_probs)])
    taken_lp = log_probs[np.arange(n), actions]
    rewards = np.where(actions == 0, reward_for_action0, 0.0)
    return TrajectoryBatch(
        obs=obs,
        actions=actions,
        rewards=rewards,
        terminals=np.ones(n, dtype=bool),
        log_probs=taken_lp,
        values=values,
        action_masks=np.ones((n, spec.action_count), dtype=bool),
        timeout_bootstraps=np.zeros(n),
        policy_version=params.version,
        difficulty=DifficultyLevel(0, 5),
        bootstrap_values=np.zeros(config.workers),
        workers=config.workers,
        horizon=config.horizon,
        episode_returns=rewards.copy(),
        episode_lengths=np.ones(n, dtype=np.int64),
    )


def test_train_iteration_bumps_version_even_with_zero_epochs():
    spec = nn.MlpSpec(input_dim=3, hidden=(4,), action_count=2)
    params = nn.init_params(spec, 0)
    adam = nn.AdamState.fresh(spec.param_count, lr=1e-3)
    config = PpoConfig(workers=2, horizon=8, minibatch_size=8, epochs_per_batch=0)
    batch = _make_batch(spec, params, config)
    before = params.values.copy()
    new_params, _, stats = train_iteration(params, adam, spec, batch, config, np.random.default_rng(0))
    assert new_params.version == params.version + 1
    assert np.array_equal(new_params.values, before)
    assert stats.updates == 0


def test_train_iteration_rejects_stale_batch():
    spec = nn.MlpSpec(input_dim=3, hidden=(4,), action_count=2)
    params = nn.init_params(spec, 0)
    adam = nn.AdamState.fresh(spec.param_count)
    config = PpoConfig(workers=2, horizon=8, minibatch_size=8)
    batch = _make_batch(spec, params, config)
    params.version = 5
    with pytest.raises(StalePolicyVersion):
        train_iteration(params, adam, spec, batch, config, np.random.default_rng(0))


def test_train_iteration_shifts_policy_toward_rewarded_action():
    spec = nn.MlpSpec(input_dim=3, hidden=(8,), action_count=2)
    params = nn.init_params(spec, 4)
    adam = nn.AdamState.fresh(spec.param_count, lr=5e-3)
    config = PpoConfig(workers=2, horizon=50, minibatch_size=25, epochs_per_batch=4)
    probe = np.random.default_rng(11).normal(size=(64, 3))

    def mean_p0(p):
        logits, _ = nn.forward_batch(p, spec, probe)
        return float(np.exp(nn.log_softmax(logits))[:, 0].mean())

    before = mean_p0(params)
    rng = np.random.default_rng(0)
    for round_i in range(3):
        batch = _make_batch(spec, params, config, seed=round_i)
        params, adam, stats = train_iteration(params, adam, spec, batch, config, rng)
    assert mean_p0(params) > before + 0.05
    assert stats.approx_kl >= 0.0 or abs(stats.approx_kl) < 0.05
    assert stats.updates == 4 * (100 // 25)
