"""Dense actor-critic MLP with hand-written reverse-mode gradients and Adam.

Parameters live in one flat float64 vector so snapshots, checkpoints, and
optimizer state are trivial to copy and compare. The network is a shared
tanh trunk with two linear heads: action logits and a scalar value.

Parameter layout: trunk layers in order, then the policy head, then the
value head; each layer stores its weight matrix (row-major, shape in x out)
followed by its bias vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NnError(Exception):
    """Base class for numerical-core contract violations."""


class DimensionMismatch(NnError):
    """Input or gradient shape incompatible with the MlpSpec."""


class NonFiniteGradient(NnError):
    """NaN or infinity in a gradient handed to the optimizer."""


# Initialization gains for the scaled-uniform scheme: weights are drawn
# from U(-a, a) with a = gain * sqrt(3 / fan_in), biases start at zero.
# The trunk uses the tanh-appropriate sqrt(2); the policy head starts
# near-uniform; the value head starts at unit scale.
TRUNK_GAIN = np.sqrt(2.0)
POLICY_GAIN = 0.01
VALUE_GAIN = 1.0


@dataclass(frozen=True)
class MlpSpec:
    """Architecture: input width, hidden trunk widths, and action count."""

    input_dim: int
    hidden: tuple[int, ...]
    action_count: int

    def __post_init__(self) -> None:
        dims = (self.input_dim, *self.hidden, self.action_count)
        if any(int(d) <= 0 for d in dims):
            raise DimensionMismatch(f"all dimensions must be positive: {dims}")

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) for every layer: trunk..., policy head, value head."""
        shapes = []
        prev = self.input_dim
        for width in self.hidden:
            shapes.append((prev, width))
            prev = width
        shapes.append((prev, self.action_count))
        shapes.append((prev, 1))
        return shapes

    @property
    def param_count(self) -> int:
        return sum((fi + 1) * fo for fi, fo in self.layer_shapes())


@dataclass
class PolicyParams:
    """Flat parameter vector plus a monotone version counter."""

    values: np.ndarray
    version: int = 0

    def copy(self) -> "PolicyParams":
        return PolicyParams(values=self.values.copy(), version=self.version)


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    timestep: int = 0
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @staticmethod
    def fresh(param_count: int, lr: float = 3e-4) -> "AdamState":
        return AdamState(
            first_moment=np.zeros(param_count, dtype=np.float64),
            second_moment=np.zeros(param_count, dtype=np.float64),
            lr=lr,
        )


def _unpack(flat: np.ndarray, spec: MlpSpec):
    """Views into the flat vector: (trunk [(W,b)...], (Wp,bp), (Wv,bv)).

    The views alias `flat`, which lets backward() write gradients into a
    preallocated vector through the same structure.
    """
    layers = []
    offset = 0
    for fan_in, fan_out in spec.layer_shapes():
        w = flat[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = flat[offset : offset + fan_out]
        offset += fan_out
        layers.append((w, b))
    if offset != flat.shape[0]:
        raise DimensionMismatch(
            f"parameter vector length {flat.shape[0]} != spec count {spec.param_count}"
        )
    return layers[:-2], layers[-2], layers[-1]


def init_params(spec: MlpSpec, seed: int) -> PolicyParams:
    """Deterministic scaled-uniform initialization, zero biases, version 0."""
    rng = np.random.default_rng(seed)
    flat = np.zeros(spec.param_count, dtype=np.float64)
    trunk, policy, value = _unpack(flat, spec)
    gains = [TRUNK_GAIN] * len(trunk) + [POLICY_GAIN, VALUE_GAIN]
    for (w, _b), gain in zip([*trunk, policy, value], gains):
        fan_in = w.shape[0]
        bound = gain * np.sqrt(3.0 / fan_in)
        w[...] = rng.uniform(-bound, bound, size=w.shape)
    return PolicyParams(values=flat, version=0)


def _check_obs(obs: np.ndarray, spec: MlpSpec) -> np.ndarray:
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim == 1:
        obs = obs[None, :]
    if obs.ndim != 2 or obs.shape[1] != spec.input_dim:
        raise DimensionMismatch(
            f"observation batch shape {obs.shape} incompatible with input_dim {spec.input_dim}"
        )
    return obs


def forward_batch(params: PolicyParams, spec: MlpSpec, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched forward pass: (logits [N,A], values [N])."""
    obs = _check_obs(obs, spec)
    trunk, (wp, bp), (wv, bv) = _unpack(params.values, spec)
    h = obs
    for w, b in trunk:
        h = np.tanh(h @ w + b)
    logits = h @ wp + bp
    values = h @ wv + bv
    return logits, values[:, 0]


def forward(params: PolicyParams, spec: MlpSpec, obs: np.ndarray) -> tuple[np.ndarray, float]:
    """Single-observation forward pass: (logits [A], value)."""
    logits, values = forward_batch(params, spec, obs)
    return logits[0], float(values[0])


def backward(
    params: PolicyParams,
    spec: MlpSpec,
    obs: np.ndarray,
    dlogits: np.ndarray,
    dvalues: np.ndarray,
) -> np.ndarray:
    """Exact gradient of sum(dlogits * logits) + sum(dvalues * values).

    The caller encodes the loss in the upstream gradients (including any
    1/N averaging), so this stays a pure linear-algebra routine.
    """
    obs = _check_obs(obs, spec)
    dlogits = np.asarray(dlogits, dtype=np.float64)
    dvalues = np.asarray(dvalues, dtype=np.float64).reshape(-1, 1)
    n = obs.shape[0]
    if dlogits.shape != (n, spec.action_count) or dvalues.shape != (n, 1):
        raise DimensionMismatch(
            f"upstream gradient shapes {dlogits.shape}/{dvalues.shape} "
            f"incompatible with batch {n} and spec"
        )

    trunk, (wp, bp), (wv, bv) = _unpack(params.values, spec)
    activations = [obs]
    h = obs
    for w, b in trunk:
        h = np.tanh(h @ w + b)
        activations.append(h)

    grads = np.zeros_like(params.values)
    gtrunk, (gwp, gbp), (gwv, gbv) = _unpack(grads, spec)

    h_last = activations[-1]
    gwp[...] = h_last.T @ dlogits
    gbp[...] = dlogits.sum(axis=0)
    gwv[...] = h_last.T @ dvalues
    gbv[...] = dvalues.sum(axis=0)

    dh = dlogits @ wp.T + dvalues @ wv.T
    for i in reversed(range(len(trunk))):
        post = activations[i + 1]
        dpre = dh * (1.0 - post * post)  # tanh'
        gw, gb = gtrunk[i]
        gw[...] = activations[i].T @ dpre
        gb[...] = dpre.sum(axis=0)
        if i > 0:
            dh = dpre @ trunk[i][0].T
    return grads


def adam_update(
    state: AdamState, params: PolicyParams, grads: np.ndarray
) -> tuple[PolicyParams, AdamState]:
    """One Adam step with bias correction; version is bumped by the caller."""
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != params.values.shape:
        raise DimensionMismatch(
            f"gradient length {grads.shape} != parameter length {params.values.shape}"
        )
    if not np.all(np.isfinite(grads)):
        raise NonFiniteGradient("gradient contains NaN or infinity")

    t = state.timestep + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_values = params.values - state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)

    new_params = PolicyParams(values=new_values, version=params.version)
    new_state = AdamState(
        first_moment=m,
        second_moment=v,
        timestep=t,
        lr=state.lr,
        beta1=state.beta1,
        beta2=state.beta2,
        epsilon=state.epsilon,
    )
    return new_params, new_state


MASKED_LOGIT = -1e30


def apply_action_mask(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Sink masked actions to a finite floor so softmax gives them zero mass.

    -1e30 stays finite through log_softmax (the max-shift keeps at least one
    unmasked logit at 0), exp underflows to exactly 0.0, and p * logp is -0.0,
    so entropies and gradients at masked entries are exact zeros rather than
    NaNs. The mask must leave at least one action unmasked per row.
    """
    return np.where(mask, logits, MASKED_LOGIT)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))
