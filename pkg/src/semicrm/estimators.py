"""Empirical risk and divergence estimators over logged bandit data.

All estimators are pure functions of (policy, samples) and reduce in fixed
left-to-right order, so repeated evaluation is bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import AugmentedSample, LoggedKnownSample, LoggedUnknownSample
from .policy import SoftmaxPolicy


@dataclass(frozen=True)
class TruncationParams:
    """Propensity floors: zeta for the IPS risk, tau for the regularizers."""

    zeta: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.zeta <= 1.0:
            raise ValueError(f"zeta must be in [0, 1], got {self.zeta}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must be in [0, 1], got {self.tau}")


@dataclass(frozen=True)
class KnownBatch:
    """Array view of a list of known-reward samples."""

    contexts: np.ndarray     # (n, d)
    actions: np.ndarray      # (n,)
    propensities: np.ndarray  # (n,)
    rewards: np.ndarray      # (n,)

    def __len__(self) -> int:
        return len(self.actions)


@dataclass(frozen=True)
class UnknownBatch:
    """Array view of a list of unknown-reward samples, optionally with pseudo-rewards."""

    contexts: np.ndarray
    actions: np.ndarray
    propensities: np.ndarray
    pseudo_rewards: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.actions)


def stack_known(S: list[LoggedKnownSample]) -> KnownBatch:
    if not S:
        raise ValueError("empty known-reward sample list")
    return KnownBatch(
        np.stack([s.context for s in S]),
        np.array([s.action for s in S], dtype=int),
        np.array([s.propensity for s in S]),
        np.array([s.reward for s in S]),
    )


def stack_unknown(S_u: list[LoggedUnknownSample | AugmentedSample]) -> UnknownBatch:
    if not S_u:
        raise ValueError("empty unknown-reward sample list")
    pseudo = None
    if isinstance(S_u[0], AugmentedSample):
        pseudo = np.array([s.pseudo_reward for s in S_u])
    return UnknownBatch(
        np.stack([s.context for s in S_u]),
        np.array([s.action for s in S_u], dtype=int),
        np.array([s.propensity for s in S_u]),
        pseudo,
    )


def group_counts(actions: np.ndarray, action_count: int) -> np.ndarray:
    """Per-action sample counts m_[i] for the current batch."""
    return np.bincount(actions, minlength=action_count).astype(float)


def group_weights(actions: np.ndarray, action_count: int) -> np.ndarray:
    """Per-sample weight 1/m_[a]; groups with m_[a] = 0 never appear."""
    counts = group_counts(actions, action_count)
    return 1.0 / counts[actions]


def _selected_probs(policy: SoftmaxPolicy, contexts, actions) -> np.ndarray:
    probs = policy.probs_batch(contexts)
    return probs[np.arange(len(actions)), actions]


# ---- risk estimators -------------------------------------------------------


def ips_risk(policy: SoftmaxPolicy, S: list[LoggedKnownSample]) -> float:
    """Importance-weighted empirical risk (1/n) sum r_i pi(a_i|x_i)/p_i."""
    return truncated_ips_risk(policy, S, zeta=0.0)


def truncated_ips_risk(
    policy: SoftmaxPolicy, S: list[LoggedKnownSample], zeta: float
) -> float:
    """IPS risk with the propensity denominator floored at zeta."""
    batch = S if isinstance(S, KnownBatch) else stack_known(S)
    if np.any(batch.propensities <= 0.0):
        raise ValueError("all propensities must be positive")
    pi = _selected_probs(policy, batch.contexts, batch.actions)
    weights = pi / np.maximum(batch.propensities, zeta)
    return float(np.sum(batch.rewards * weights) / len(batch))


# ---- reward-free regularizers ----------------------------------------------


def kl_regularizer(
    policy: SoftmaxPolicy, S_u: list[LoggedUnknownSample], tau: float = 0.0
) -> float:
    """Truncated forward-KL estimate: per action group, mean of pi log(pi / max(tau, p))."""
    batch = S_u if isinstance(S_u, UnknownBatch) else stack_unknown(S_u)
    floored = np.maximum(batch.propensities, tau)
    if np.any(floored <= 0.0):
        raise ValueError("tau = 0 requires strictly positive propensities")
    pi = _selected_probs(policy, batch.contexts, batch.actions)
    w = group_weights(batch.actions, policy.action_count)
    return float(np.sum(w * pi * (np.log(pi) - np.log(floored))))


def rkl_regularizer(policy: SoftmaxPolicy, S_u: list[LoggedUnknownSample]) -> float:
    """Reverse-KL estimate: per action group, mean of -p log pi + p log p."""
    batch = S_u if isinstance(S_u, UnknownBatch) else stack_unknown(S_u)
    if np.any(batch.propensities <= 0.0):
        raise ValueError("all propensities must be positive")
    pi = _selected_probs(policy, batch.contexts, batch.actions)
    w = group_weights(batch.actions, policy.action_count)
    p = batch.propensities
    return float(np.sum(w * (-p * np.log(pi) + p * np.log(p))))


def wce_regularizer(
    policy: SoftmaxPolicy, S_u: list[LoggedUnknownSample], tau: float = 0.0
) -> float:
    """Truncated weighted cross-entropy: per action group, mean of -max(tau, p) log pi."""
    batch = S_u if isinstance(S_u, UnknownBatch) else stack_unknown(S_u)
    pi = _selected_probs(policy, batch.contexts, batch.actions)
    w = group_weights(batch.actions, policy.action_count)
    return float(np.sum(w * (-np.maximum(batch.propensities, tau) * np.log(pi))))


REGULARIZERS = ("KL", "RKL", "WCE")


def combined_objective(
    policy: SoftmaxPolicy,
    S: list[LoggedKnownSample],
    S_u: list[LoggedUnknownSample],
    alpha: float,
    trunc: TruncationParams = TruncationParams(),
    variant: str = "WCE",
) -> float:
    """Convex combination alpha * truncated IPS risk + (1 - alpha) * regularizer."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    if variant not in REGULARIZERS:
        raise ValueError(f"variant must be one of {REGULARIZERS}, got {variant!r}")
    risk = truncated_ips_risk(policy, S, trunc.zeta) if alpha > 0.0 else 0.0
    if alpha < 1.0:
        if variant == "KL":
            reg = kl_regularizer(policy, S_u, trunc.tau)
        elif variant == "RKL":
            reg = rkl_regularizer(policy, S_u)
        else:
            reg = wce_regularizer(policy, S_u, trunc.tau)
    else:
        reg = 0.0
    return alpha * risk + (1.0 - alpha) * reg


def pseudo_reward_objective(
    policy: SoftmaxPolicy,
    S: list[LoggedKnownSample],
    S_u_aug: list[AugmentedSample],
    alpha: float,
    trunc: TruncationParams = TruncationParams(),
) -> float:
    """Pseudo-reward risk: truncated IPS over S plus pseudo-reward IPS over the
    augmented set, scaled by alpha/(n+m), plus (1 - alpha) times the WCE
    regularizer over the union (action groups computed on the union).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    known = stack_known(S)
    n = len(known)
    m = len(S_u_aug)
    pi_known = _selected_probs(policy, known.contexts, known.actions)
    ips_sum = float(
        np.sum(known.rewards * pi_known / np.maximum(known.propensities, trunc.zeta))
    )
    if m > 0:
        aug = stack_unknown(S_u_aug)
        pi_aug = _selected_probs(policy, aug.contexts, aug.actions)
        ips_sum += float(
            np.sum(aug.pseudo_rewards * pi_aug / np.maximum(aug.propensities, trunc.zeta))
        )
        union_contexts = np.concatenate([known.contexts, aug.contexts])
        union_actions = np.concatenate([known.actions, aug.actions])
        union_props = np.concatenate([known.propensities, aug.propensities])
    else:
        union_contexts, union_actions, union_props = (
            known.contexts, known.actions, known.propensities,
        )
    pi_union = _selected_probs(policy, union_contexts, union_actions)
    w = group_weights(union_actions, policy.action_count)
    wce = float(np.sum(w * (-np.maximum(union_props, trunc.tau) * np.log(pi_union))))
    return alpha * ips_sum / (n + m) + (1.0 - alpha) * wce
