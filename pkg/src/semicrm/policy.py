"""Softmax policy over a small ReLU scorer, with exact analytic gradients.

The policy is a fully connected network ``d -> hidden ... -> k`` whose
output scores feed a softmax; no autodiff framework is used, gradients are
accumulated by hand through the scorer.  Parameters are plain numpy arrays
so policies are cheap to copy and bit-exactly reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DimensionMismatchError(ValueError):
    """Raised when a context or action does not match the policy shape."""

    def __init__(self, what: str, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected {expected}, got {actual}")


@dataclass
class PolicyGradient:
    """Per-parameter gradient arrays, shape-congruent with a policy."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @staticmethod
    def zeros_like(policy: "SoftmaxPolicy") -> "PolicyGradient":
        return PolicyGradient(
            [np.zeros_like(w) for w in policy.weights],
            [np.zeros_like(b) for b in policy.biases],
        )

    def axpy(self, scale: float, other: "PolicyGradient") -> None:
        """In-place ``self += scale * other``."""
        for w, ow in zip(self.weights, other.weights):
            w += scale * ow
        for b, ob in zip(self.biases, other.biases):
            b += scale * ob

    def scaled(self, scale: float) -> "PolicyGradient":
        return PolicyGradient(
            [scale * w for w in self.weights], [scale * b for b in self.biases]
        )

    def norm(self) -> float:
        total = 0.0
        for w in self.weights:
            total += float(np.sum(w * w))
        for b in self.biases:
            total += float(np.sum(b * b))
        return float(np.sqrt(total))


@dataclass
class SoftmaxPolicy:
    """Conditional distribution over ``k`` actions given a context vector.

    ``weights[i]`` has shape (fan_in, fan_out); hidden layers use ReLU and
    the final layer emits one score per action.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def action_count(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def hidden_widths(self) -> tuple[int, ...]:
        return tuple(w.shape[1] for w in self.weights[:-1])

    @staticmethod
    def create(
        input_dim: int,
        action_count: int,
        hidden_widths: tuple[int, ...] = (20, 20),
        rng: np.random.Generator | None = None,
    ) -> "SoftmaxPolicy":
        """Glorot-uniform initialized policy; pass a seeded rng for reproducibility."""
        if rng is None:
            rng = np.random.default_rng()
        dims = [input_dim, *hidden_widths, action_count]
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return SoftmaxPolicy(weights, biases)

    def copy(self) -> "SoftmaxPolicy":
        return SoftmaxPolicy([w.copy() for w in self.weights],
                             [b.copy() for b in self.biases])

    def apply_update(self, grad: PolicyGradient, step: float) -> None:
        """In-place ``theta -= step * grad``."""
        for w, gw in zip(self.weights, grad.weights):
            w -= step * gw
        for b, gb in zip(self.biases, grad.biases):
            b -= step * gb

    # ---- forward / backward ------------------------------------------------

    def _check_contexts(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.input_dim:
            raise DimensionMismatchError("context dimension", self.input_dim, X.shape[1])
        return X

    def forward(self, X: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Scores for a batch of contexts plus the activation cache for backward.

        Returns ``(scores, cache)`` where scores has shape (N, k) and cache
        holds the input and every post-ReLU hidden activation.
        """
        X = self._check_contexts(X)
        cache = [X]
        h = X
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
            cache.append(h)
        scores = h @ self.weights[-1] + self.biases[-1]
        return scores, cache

    def backward(self, cache: list[np.ndarray], dscores: np.ndarray) -> PolicyGradient:
        """Accumulate parameter gradients from per-sample score gradients.

        ``dscores`` is dL/dscores with shape (N, k); the reduction over the
        batch is a single matrix product, so summation order is fixed.
        """
        grads_w: list[np.ndarray] = [None] * len(self.weights)  # type: ignore
        grads_b: list[np.ndarray] = [None] * len(self.biases)  # type: ignore
        delta = dscores
        for layer in range(len(self.weights) - 1, -1, -1):
            grads_w[layer] = cache[layer].T @ delta
            grads_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * (cache[layer] > 0.0)
        return PolicyGradient(grads_w, grads_b)

    # ---- distributions -----------------------------------------------------

    def scores(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0][0]

    def probs_batch(self, X: np.ndarray) -> np.ndarray:
        scores, _ = self.forward(X)
        return softmax(scores)

    def probs(self, x: np.ndarray) -> np.ndarray:
        """Action probabilities for a single context (positive, sum to 1)."""
        return self.probs_batch(x)[0]

    def log_probs(self, x: np.ndarray) -> np.ndarray:
        """log pi(.|x) via log-sum-exp, never log of the softmax output."""
        s = self.scores(x)
        return s - logsumexp(s)

    def grad_scalar(self, x: np.ndarray, a: int, mode: str = "log_prob") -> PolicyGradient:
        """Gradient of ``log pi(a|x)`` or ``pi(a|x)`` with respect to parameters."""
        if not 0 <= a < self.action_count:
            raise DimensionMismatchError("action index", self.action_count, a)
        scores, cache = self.forward(x)
        p = softmax(scores)[0]
        dlog = -p.copy()
        dlog[a] += 1.0
        if mode == "log_prob":
            dscores = dlog
        elif mode == "prob":
            dscores = p[a] * dlog
        else:
            raise ValueError(f"unknown mode {mode!r}")
        return self.backward(cache, dscores[None, :])

    def sample_action(self, x: np.ndarray, rng: np.random.Generator) -> int:
        """Inverse-CDF draw from pi(.|x); advances the rng by one uniform."""
        p = self.probs(x)
        u = rng.random()
        return int(np.searchsorted(np.cumsum(p), u, side="right").clip(0, len(p) - 1))

    def argmax_action(self, x: np.ndarray) -> int:
        """Lowest index attaining the maximal probability (deterministic ties)."""
        return int(np.argmax(self.probs(x)))


def softmax(scores: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction."""
    scores = np.atleast_2d(scores)
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def logsumexp(s: np.ndarray) -> float:
    m = float(np.max(s))
    return m + float(np.log(np.sum(np.exp(s - m))))


# ---- checkpoint format -----------------------------------------------------
#
#   semicrm-policy v1
#   dims <d> <h1> ... <k>
#   W<i> then fan_in rows of fan_out decimal values (17 significant digits)
#   b<i> then one row of fan_out values

_MAGIC = "semicrm-policy v1"


def save_policy(policy: SoftmaxPolicy, path) -> None:
    lines = [_MAGIC]
    dims = [policy.input_dim, *policy.hidden_widths, policy.action_count]
    lines.append("dims " + " ".join(str(d) for d in dims))
    for i, (w, b) in enumerate(zip(policy.weights, policy.biases)):
        lines.append(f"W{i}")
        for row in w:
            lines.append(" ".join(f"{v:.17g}" for v in row))
        lines.append(f"b{i}")
        lines.append(" ".join(f"{v:.17g}" for v in b))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_row(line: str) -> np.ndarray:
    return np.array([float(tok) for tok in line.split()], dtype=float)


def load_policy(path) -> SoftmaxPolicy:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != _MAGIC:
        raise ValueError(f"{path}: not a {_MAGIC} checkpoint")
    dims = [int(tok) for tok in lines[1].split()[1:]]
    weights, biases = [], []
    pos = 2
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        if lines[pos] != f"W{i}":
            raise ValueError(f"{path}: expected W{i} at line {pos + 1}")
        pos += 1
        rows = [_parse_row(lines[pos + r]) for r in range(fan_in)]
        pos += fan_in
        weights.append(np.vstack(rows))
        if lines[pos] != f"b{i}":
            raise ValueError(f"{path}: expected b{i} at line {pos + 1}")
        pos += 1
        biases.append(_parse_row(lines[pos]))
        pos += 1
        if weights[-1].shape != (fan_in, fan_out) or biases[-1].shape != (fan_out,):
            raise ValueError(f"{path}: layer {i} has wrong dimensions")
    return SoftmaxPolicy(weights, biases)
