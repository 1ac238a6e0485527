"""Logged bandit data model, CSV format, and the supervised-to-bandit pipeline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .policy import SoftmaxPolicy


@dataclass(frozen=True)
class LoggedKnownSample:
    """One row of the known-reward log: (context, action, propensity, reward)."""

    context: np.ndarray
    action: int
    propensity: float
    reward: float


@dataclass(frozen=True)
class LoggedUnknownSample:
    """One row of the unknown-reward log: (context, action, propensity)."""

    context: np.ndarray
    action: int
    propensity: float


@dataclass(frozen=True)
class AugmentedSample:
    """Unknown-reward row augmented with a predicted pseudo-reward."""

    context: np.ndarray
    action: int
    propensity: float
    pseudo_reward: float


@dataclass
class SupervisedDataset:
    """Classification data (features, integer labels) used to synthesize logs."""

    features: np.ndarray  # (N, d)
    labels: np.ndarray    # (N,)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.ndim != 2 or len(self.labels) != len(self.features):
            raise ValueError("features must be (N, d) with one label per row")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def subset(self, idx: np.ndarray) -> "SupervisedDataset":
        return SupervisedDataset(self.features[idx], self.labels[idx])


class DatasetFormatError(ValueError):
    """Malformed dataset file; carries the 1-based offending line number."""

    def __init__(self, line_number: int, message: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


def supervised_to_bandit(
    ds: SupervisedDataset,
    logging_policy: SoftmaxPolicy,
    rng: np.random.Generator,
) -> list[LoggedKnownSample]:
    """Turn classification rows into logged bandit feedback.

    For each row an action is sampled from the logging policy, the propensity
    is that action's probability, and the reward is -1 when the action matches
    the label and 0 otherwise.
    """
    if logging_policy.input_dim != ds.dim:
        raise ValueError(
            f"logging policy expects d={logging_policy.input_dim}, data has d={ds.dim}"
        )
    if logging_policy.action_count < ds.num_classes:
        raise ValueError(
            f"logging policy has {logging_policy.action_count} actions, "
            f"data has {ds.num_classes} classes"
        )
    out = []
    for i in range(len(ds)):
        x = ds.features[i].copy()
        # per-row evaluation so the stored propensity matches probs(x)[a] exactly
        p = logging_policy.probs(x)
        u = rng.random()
        a = int(np.searchsorted(np.cumsum(p), u, side="right").clip(0, len(p) - 1))
        r = -1.0 if a == ds.labels[i] else 0.0
        out.append(LoggedKnownSample(x, a, float(p[a]), r))
    return out


def mask_rewards(
    S: list[LoggedKnownSample],
    keep_fraction: float,
    rng: np.random.Generator,
    stratify_by_action: bool = False,
) -> tuple[list[LoggedKnownSample], list[LoggedUnknownSample]]:
    """Partition the log into known-reward and unknown-reward parts.

    A uniformly random subset of round(keep_fraction * |S|) rows keeps its
    reward; the rest drop it.  With ``stratify_by_action`` the split is done
    per action group instead (same keep rate within each action).
    """
    if not 0.0 <= keep_fraction <= 1.0:
        raise ValueError(f"keep_fraction must be in [0, 1], got {keep_fraction}")
    n = len(S)
    keep_mask = np.zeros(n, dtype=bool)
    if stratify_by_action:
        actions = np.array([s.action for s in S])
        for a in np.unique(actions):
            idx = np.flatnonzero(actions == a)
            n_keep = int(round(keep_fraction * len(idx)))
            chosen = rng.permutation(len(idx))[:n_keep]
            keep_mask[idx[chosen]] = True
    else:
        n_keep = int(round(keep_fraction * n))
        keep_mask[rng.permutation(n)[:n_keep]] = True
    known = [s for s, keep in zip(S, keep_mask) if keep]
    unknown = [
        LoggedUnknownSample(s.context, s.action, s.propensity)
        for s, keep in zip(S, keep_mask)
        if not keep
    ]
    return known, unknown


def drop_action(
    S_known: list[LoggedKnownSample],
    S_unknown: list[LoggedUnknownSample],
    action: int,
) -> tuple[list[LoggedKnownSample], list[LoggedUnknownSample]]:
    """Remove every known-reward sample with the given action; unknown set untouched."""
    return [s for s in S_known if s.action != action], S_unknown


# ---- CSV format ------------------------------------------------------------
#
# Header: x0,...,x{d-1},action,propensity,reward
# Unknown-reward rows leave the reward field empty.  Values are printed with
# 17 significant digits so a write/read round trip is lossless.


def write_bandit_csv(
    path,
    known: list[LoggedKnownSample],
    unknown: list[LoggedUnknownSample] = (),
) -> None:
    if known:
        d = len(known[0].context)
    elif unknown:
        d = len(unknown[0].context)
    else:
        raise ValueError("cannot write an empty dataset (unknown dimension)")
    header = ",".join([f"x{i}" for i in range(d)] + ["action", "propensity", "reward"])
    lines = [header]
    for s in known:
        feats = ",".join(f"{v:.17g}" for v in s.context)
        lines.append(f"{feats},{s.action},{s.propensity:.17g},{s.reward:.17g}")
    for s in unknown:
        feats = ",".join(f"{v:.17g}" for v in s.context)
        lines.append(f"{feats},{s.action},{s.propensity:.17g},")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_bandit_csv(
    path, validate_reward_range: bool = True
) -> tuple[list[LoggedKnownSample], list[LoggedUnknownSample]]:
    """Parse a logged dataset; rows with an empty reward field become unknown samples.

    Set ``validate_reward_range=False`` to accept rewards outside [-1, 0]
    (general [c, b] data for the bounds module).
    """
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip() != ""]
    if not lines:
        raise DatasetFormatError(1, "empty file")
    header = lines[0].split(",")
    if header[-3:] != ["action", "propensity", "reward"]:
        raise DatasetFormatError(1, "header must end with action,propensity,reward")
    d = len(header) - 3
    known: list[LoggedKnownSample] = []
    unknown: list[LoggedUnknownSample] = []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != d + 3:
            raise DatasetFormatError(lineno, f"expected {d + 3} fields, got {len(fields)}")
        try:
            context = np.array([float(v) for v in fields[:d]])
            action = int(fields[d])
            propensity = float(fields[d + 1])
        except ValueError as exc:
            raise DatasetFormatError(lineno, str(exc)) from exc
        if action < 0:
            raise DatasetFormatError(lineno, f"negative action index {action}")
        if not 0.0 < propensity <= 1.0:
            raise DatasetFormatError(lineno, f"propensity must be in (0, 1], got {propensity}")
        reward_field = fields[d + 2]
        if reward_field == "":
            unknown.append(LoggedUnknownSample(context, action, propensity))
        else:
            try:
                reward = float(reward_field)
            except ValueError as exc:
                raise DatasetFormatError(lineno, str(exc)) from exc
            if validate_reward_range and not -1.0 <= reward <= 0.0:
                raise DatasetFormatError(lineno, f"reward must be in [-1, 0], got {reward}")
            known.append(LoggedKnownSample(context, action, propensity, reward))
    return known, unknown


def write_supervised_csv(path, ds: SupervisedDataset) -> None:
    header = ",".join([f"x{i}" for i in range(ds.dim)] + ["label"])
    lines = [header]
    for x, y in zip(ds.features, ds.labels):
        lines.append(",".join(f"{v:.17g}" for v in x) + f",{y}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_supervised_csv(path) -> SupervisedDataset:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip() != ""]
    if not lines:
        raise DatasetFormatError(1, "empty file")
    header = lines[0].split(",")
    if header[-1] != "label":
        raise DatasetFormatError(1, "header must end with label")
    d = len(header) - 1
    feats, labels = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != d + 1:
            raise DatasetFormatError(lineno, f"expected {d + 1} fields, got {len(fields)}")
        try:
            feats.append([float(v) for v in fields[:d]])
            labels.append(int(fields[d]))
        except ValueError as exc:
            raise DatasetFormatError(lineno, str(exc)) from exc
    return SupervisedDataset(np.array(feats), np.array(labels))
