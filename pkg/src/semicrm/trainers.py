"""Training loops for WCE-CRM, KL-CRM, and PR-CRM, plus the reward regressor.

Gradients are computed analytically: every objective used here depends on the
policy only through pi(a_i|x_i) on the batch rows, so dL/dscores is a
per-row multiple of (e_a - probs) and backprop runs through the scorer once
per batch.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import AugmentedSample, LoggedKnownSample, LoggedUnknownSample
from .estimators import (
    KnownBatch,
    TruncationParams,
    UnknownBatch,
    group_weights,
    stack_known,
    stack_unknown,
)
from .policy import PolicyGradient, SoftmaxPolicy, softmax
from .rng import make_rng

VARIANTS = ("WCE", "KL", "PR")


@dataclass
class TrainConfig:
    alpha: float = 0.9
    trunc: TruncationParams = field(default_factory=TruncationParams)
    epochs: int = 1000
    batch_known: int = 64
    batch_unknown: int = 256
    learning_rate: float = 0.01
    seed: int = 0
    variant: str = "WCE"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.epochs <= 0 or self.batch_known <= 0 or self.batch_unknown <= 0:
            raise ValueError("epochs and batch sizes must be positive")
        if self.learning_rate <= 0 or not np.isfinite(self.learning_rate):
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")


@dataclass
class TrainTrace:
    """Per-epoch objective pieces; written as CSV epoch,ips_term,reg_term,grad_norm,seconds."""

    epochs: list[int] = field(default_factory=list)
    ips_terms: list[float] = field(default_factory=list)
    reg_terms: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)

    def append(self, epoch, ips_term, reg_term, grad_norm, secs) -> None:
        self.epochs.append(epoch)
        self.ips_terms.append(ips_term)
        self.reg_terms.append(reg_term)
        self.grad_norms.append(grad_norm)
        self.seconds.append(secs)

    def write_csv(self, path) -> None:
        lines = ["epoch,ips_term,reg_term,grad_norm,seconds"]
        for row in zip(self.epochs, self.ips_terms, self.reg_terms,
                       self.grad_norms, self.seconds):
            lines.append(f"{row[0]},{row[1]:.17g},{row[2]:.17g},{row[3]:.17g},{row[4]:.6f}")
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")


def _dscores(probs: np.ndarray, actions: np.ndarray, factors: np.ndarray) -> np.ndarray:
    """Assemble dL/dscores when dL/dscores_row = factor * (e_a - probs_row)."""
    ds = -factors[:, None] * probs
    ds[np.arange(len(actions)), actions] += factors
    return ds


def grad_truncated_ips(
    policy: SoftmaxPolicy, batch: KnownBatch, zeta: float
) -> tuple[float, PolicyGradient]:
    """Value and gradient of (1/n) sum r_i pi(a_i|x_i) / max(zeta, p_i)."""
    scores, cache = policy.forward(batch.contexts)
    probs = softmax(scores)
    pi = probs[np.arange(len(batch)), batch.actions]
    inv = batch.rewards / (len(batch) * np.maximum(batch.propensities, zeta))
    value = float(np.sum(inv * pi))
    grad = policy.backward(cache, _dscores(probs, batch.actions, inv * pi))
    return value, grad


def grad_wce(
    policy: SoftmaxPolicy, batch: UnknownBatch, tau: float
) -> tuple[float, PolicyGradient]:
    """Value and gradient of the truncated weighted cross-entropy regularizer."""
    scores, cache = policy.forward(batch.contexts)
    probs = softmax(scores)
    pi = probs[np.arange(len(batch)), batch.actions]
    w = group_weights(batch.actions, policy.action_count)
    coeff = -w * np.maximum(batch.propensities, tau)  # dL/dlog(pi)
    value = float(np.sum(coeff * np.log(pi)))
    grad = policy.backward(cache, _dscores(probs, batch.actions, coeff))
    return value, grad


def grad_kl(
    policy: SoftmaxPolicy, batch: UnknownBatch, tau: float
) -> tuple[float, PolicyGradient]:
    """Value and gradient of the truncated forward-KL regularizer.

    The policy enters both factors of pi log(pi / max(tau, p)), so
    dL/dpi = w (log(pi / max(tau, p)) + 1).
    """
    floored = np.maximum(batch.propensities, tau)
    if np.any(floored <= 0.0):
        raise ValueError("tau = 0 requires strictly positive propensities")
    scores, cache = policy.forward(batch.contexts)
    probs = softmax(scores)
    pi = probs[np.arange(len(batch)), batch.actions]
    w = group_weights(batch.actions, policy.action_count)
    log_ratio = np.log(pi) - np.log(floored)
    value = float(np.sum(w * pi * log_ratio))
    dpi = w * (log_ratio + 1.0)
    grad = policy.backward(cache, _dscores(probs, batch.actions, dpi * pi))
    return value, grad


def grad_pseudo_reward(
    policy: SoftmaxPolicy,
    known: KnownBatch,
    aug: UnknownBatch | None,
    alpha: float,
    trunc: TruncationParams,
) -> tuple[float, float, PolicyGradient]:
    """(ips_term, wce_term, gradient) of the pseudo-reward objective on one batch pair.

    The regularizer groups actions over the union of the two batches.
    """
    if aug is not None and len(aug) > 0:
        contexts = np.concatenate([known.contexts, aug.contexts])
        actions = np.concatenate([known.actions, aug.actions])
        props = np.concatenate([known.propensities, aug.propensities])
        rewards = np.concatenate([known.rewards, aug.pseudo_rewards])
    else:
        contexts, actions, props = known.contexts, known.actions, known.propensities
        rewards = known.rewards
    total = len(actions)
    scores, cache = policy.forward(contexts)
    probs = softmax(scores)
    pi = probs[np.arange(total), actions]
    ips_coeff = alpha * rewards / (total * np.maximum(props, trunc.zeta))
    ips_term = float(np.sum(ips_coeff * pi)) / alpha if alpha > 0 else 0.0
    w = group_weights(actions, policy.action_count)
    wce_coeff = -(1.0 - alpha) * w * np.maximum(props, trunc.tau)
    wce_term = float(np.sum(w * (-np.maximum(props, trunc.tau)) * np.log(pi)))
    factors = ips_coeff * pi + wce_coeff
    grad = policy.backward(cache, _dscores(probs, actions, factors))
    return ips_term, wce_term, grad


# ---- regularized CRM trainers ----------------------------------------------


def _sample_indices(rng: np.random.Generator, size: int, batch: int) -> np.ndarray:
    """Without-replacement draw, returned sorted so reduction order is canonical."""
    if batch > size:
        raise ValueError(f"batch size {batch} exceeds dataset size {size}")
    if batch == size:
        return np.arange(size)
    return np.sort(rng.permutation(size)[:batch])


def _slice_known(batch: KnownBatch, idx: np.ndarray) -> KnownBatch:
    return KnownBatch(batch.contexts[idx], batch.actions[idx],
                      batch.propensities[idx], batch.rewards[idx])


def _slice_unknown(batch: UnknownBatch, idx: np.ndarray) -> UnknownBatch:
    pseudo = None if batch.pseudo_rewards is None else batch.pseudo_rewards[idx]
    return UnknownBatch(batch.contexts[idx], batch.actions[idx],
                        batch.propensities[idx], pseudo)


def _train_regularized(
    S: list[LoggedKnownSample],
    S_u: list[LoggedUnknownSample],
    cfg: TrainConfig,
    init: SoftmaxPolicy,
    reg_grad_fn,
) -> tuple[SoftmaxPolicy, TrainTrace]:
    if cfg.alpha > 0.0 and not S:
        raise ValueError("alpha > 0 requires a nonempty known-reward dataset")
    if cfg.alpha < 1.0 and not S_u:
        raise ValueError("alpha < 1 requires a nonempty unknown-reward dataset")
    known = stack_known(S) if S else None
    unknown = stack_unknown(S_u) if S_u else None
    policy = init.copy()
    trace = TrainTrace()
    rng = make_rng(cfg.seed)
    for epoch in range(cfg.epochs):
        start = time.perf_counter()
        ips_value, reg_value = 0.0, 0.0
        g1 = g2 = None
        if known is not None:
            idx = _sample_indices(rng, len(known), min(cfg.batch_known, len(known)))
            ips_value, g1 = grad_truncated_ips(policy, _slice_known(known, idx), cfg.trunc.zeta)
        if unknown is not None:
            idx = _sample_indices(rng, len(unknown), min(cfg.batch_unknown, len(unknown)))
            reg_value, g2 = reg_grad_fn(policy, _slice_unknown(unknown, idx), cfg.trunc.tau)
        update = PolicyGradient.zeros_like(policy)
        if g1 is not None and cfg.alpha > 0.0:
            update.axpy(cfg.alpha, g1)
        if g2 is not None and cfg.alpha < 1.0:
            update.axpy(1.0 - cfg.alpha, g2)
        policy.apply_update(update, cfg.learning_rate)
        trace.append(epoch, ips_value, reg_value, update.norm(),
                     time.perf_counter() - start)
    return policy, trace


def train_wce_crm(
    S: list[LoggedKnownSample],
    S_u: list[LoggedUnknownSample],
    cfg: TrainConfig,
    init: SoftmaxPolicy,
) -> tuple[SoftmaxPolicy, TrainTrace]:
    """Minibatch descent on alpha * truncated IPS + (1 - alpha) * truncated WCE."""
    return _train_regularized(S, S_u, cfg, init, grad_wce)


def train_kl_crm(
    S: list[LoggedKnownSample],
    S_u: list[LoggedUnknownSample],
    cfg: TrainConfig,
    init: SoftmaxPolicy,
) -> tuple[SoftmaxPolicy, TrainTrace]:
    """As WCE-CRM with the forward-KL regularizer in place of WCE."""
    return _train_regularized(S, S_u, cfg, init, grad_kl)


# ---- pseudo-reward pipeline ------------------------------------------------


@dataclass
class RewardRegressor:
    """Linear reward model over phi(x, a) = context (+) one-hot action (+) bias."""

    weights: np.ndarray
    input_dim: int
    action_count: int

    def features(self, contexts: np.ndarray, actions: np.ndarray) -> np.ndarray:
        contexts = np.atleast_2d(contexts)
        n = len(contexts)
        onehot = np.zeros((n, self.action_count))
        onehot[np.arange(n), actions] = 1.0
        return np.hstack([contexts, onehot, np.ones((n, 1))])

    def predict(self, context: np.ndarray, action: int) -> float:
        phi = self.features(np.asarray(context)[None, :], np.array([action]))
        return float((phi @ self.weights)[0])

    def predict_batch(self, contexts: np.ndarray, actions: np.ndarray) -> np.ndarray:
        return self.features(contexts, actions) @ self.weights


def fit_reward_regressor(
    S: list[LoggedKnownSample], ridge: float = 1e-8
) -> RewardRegressor:
    """Propensity-weighted least squares in closed form (normal equations).

    Minimizes (1/P) sum p_i (r_i - phi_i . beta)^2 + ridge * |beta|^2 with
    P = sum p_i; the tiny ridge keeps rank-deficient designs solvable.
    """
    batch = stack_known(S)
    total_p = float(np.sum(batch.propensities))
    if total_p <= 0.0:
        raise ValueError("propensity weights sum to zero")
    d = batch.contexts.shape[1]
    k = int(batch.actions.max()) + 1
    reg = RewardRegressor(np.zeros(d + k + 1), d, k)
    phi = reg.features(batch.contexts, batch.actions)
    w = batch.propensities / total_p
    gram = phi.T @ (w[:, None] * phi) + ridge * np.eye(phi.shape[1])
    rhs = phi.T @ (w * batch.rewards)
    reg.weights = np.linalg.solve(gram, rhs)
    return reg


def predict_pseudo_rewards(
    reg: RewardRegressor, S_u: list[LoggedUnknownSample]
) -> list[AugmentedSample]:
    """Pseudo-rewards clamped into the valid reward range [-1, 0]."""
    batch = stack_unknown(S_u)
    preds = np.clip(reg.predict_batch(batch.contexts, batch.actions), -1.0, 0.0)
    return [
        AugmentedSample(s.context, s.action, s.propensity, float(r))
        for s, r in zip(S_u, preds)
    ]


def train_pr_crm(
    S: list[LoggedKnownSample],
    S_u: list[LoggedUnknownSample],
    cfg: TrainConfig,
    init: SoftmaxPolicy,
    pseudo_rewards: list[AugmentedSample] | None = None,
) -> tuple[SoftmaxPolicy, TrainTrace]:
    """Fit the reward regressor on S, augment S_u with pseudo-rewards, then run
    minibatch descent on the pseudo-reward objective.

    Pass ``pseudo_rewards`` to skip the regression phase (oracle injection).
    """
    if cfg.alpha > 0.0 and not S:
        raise ValueError("alpha > 0 requires a nonempty known-reward dataset")
    if pseudo_rewards is None:
        if S_u:
            regressor = fit_reward_regressor(S)
            pseudo_rewards = predict_pseudo_rewards(regressor, S_u)
        else:
            pseudo_rewards = []
    known = stack_known(S)
    aug = stack_unknown(pseudo_rewards) if pseudo_rewards else None
    policy = init.copy()
    trace = TrainTrace()
    rng = make_rng(cfg.seed)
    for epoch in range(cfg.epochs):
        start = time.perf_counter()
        idx_k = _sample_indices(rng, len(known), min(cfg.batch_known, len(known)))
        known_batch = _slice_known(known, idx_k)
        aug_batch = None
        if aug is not None:
            idx_u = _sample_indices(rng, len(aug), min(cfg.batch_unknown, len(aug)))
            aug_batch = _slice_unknown(aug, idx_u)
        ips_value, wce_value, grad = grad_pseudo_reward(
            policy, known_batch, aug_batch, cfg.alpha, cfg.trunc
        )
        policy.apply_update(grad, cfg.learning_rate)
        trace.append(epoch, ips_value, wce_value, grad.norm(),
                     time.perf_counter() - start)
    return policy, trace
