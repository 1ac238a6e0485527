"""End-to-end experiment harness: data generation, logging policy, sweeps.

A single master seed drives the whole pipeline; per-stage seeds are derived
with :func:`semicrm.rng.derive_seed` so any stage can be reproduced alone.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .data import (
    SupervisedDataset,
    drop_action,
    mask_rewards,
    supervised_to_bandit,
)
from .estimators import TruncationParams
from .policy import SoftmaxPolicy, softmax
from .rng import derive_seed, make_rng
from .trainers import TrainConfig, train_kl_crm, train_pr_crm, train_wce_crm


@dataclass
class SyntheticSpec:
    """Mixture-of-Gaussians classification data: one component per class.

    Component means are drawn once from the generation seed (scaled by
    ``separation``); features are mean + ``noise`` * standard normal.
    """

    dim: int = 10
    num_classes: int = 5
    separation: float = 1.5
    noise: float = 1.0
    class_props: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.dim <= 0 or self.num_classes <= 0:
            raise ValueError("dim and num_classes must be positive")
        if self.noise < 0 or self.separation < 0:
            raise ValueError("separation and noise must be nonnegative")
        if self.class_props is not None:
            props = np.asarray(self.class_props, dtype=float)
            if len(props) != self.num_classes or np.any(props < 0):
                raise ValueError("class_props must be nonnegative, one per class")
            if abs(props.sum() - 1.0) > 1e-9:
                raise ValueError("class_props must sum to 1")


def generate_synthetic(spec: SyntheticSpec, n: int, seed: int) -> SupervisedDataset:
    """Sample n labeled rows; identical (spec, n, seed) gives identical data."""
    rng = make_rng(derive_seed(seed, "synthetic"))
    means = spec.separation * rng.standard_normal((spec.num_classes, spec.dim))
    props = (
        np.full(spec.num_classes, 1.0 / spec.num_classes)
        if spec.class_props is None
        else np.asarray(spec.class_props, dtype=float)
    )
    labels = rng.choice(spec.num_classes, size=n, p=props)
    features = means[labels] + spec.noise * rng.standard_normal((n, spec.dim))
    return SupervisedDataset(features, labels)


def train_logging_policy(
    ds: SupervisedDataset,
    fraction: float,
    seed: int,
    hidden_widths: tuple[int, ...] = (20, 20),
    epochs: int = 500,
    learning_rate: float = 0.05,
    batch_size: int = 64,
) -> SoftmaxPolicy:
    """Fit a softmax policy by cross-entropy on a random ``fraction`` subsample."""
    rng = make_rng(derive_seed(seed, "logging-policy"))
    n_sub = int(round(fraction * len(ds)))
    if n_sub < ds.num_classes:
        raise ValueError(
            f"fraction {fraction} leaves {n_sub} rows, fewer than {ds.num_classes} classes"
        )
    sub = ds.subset(np.sort(rng.permutation(len(ds))[:n_sub]))
    policy = SoftmaxPolicy.create(ds.dim, ds.num_classes, hidden_widths, rng)
    batch_size = min(batch_size, n_sub)
    for _ in range(epochs):
        idx = np.sort(rng.permutation(n_sub)[:batch_size])
        X, y = sub.features[idx], sub.labels[idx]
        scores, cache = policy.forward(X)
        probs = softmax(scores)
        dscores = probs.copy()
        dscores[np.arange(len(y)), y] -= 1.0
        dscores /= len(y)
        policy.apply_update(policy.backward(cache, dscores), learning_rate)
    return policy


def evaluate_policy(
    policy: SoftmaxPolicy, test: SupervisedDataset
) -> tuple[float, float]:
    """(expected_risk, accuracy) against true labels.

    Expected risk is computed exactly from the policy probabilities:
    -(1/N) sum_i pi(label_i | x_i); accuracy uses the argmax action.
    """
    if policy.input_dim != test.dim:
        raise ValueError(
            f"policy expects d={policy.input_dim}, test data has d={test.dim}"
        )
    probs = policy.probs_batch(test.features)
    idx = np.arange(len(test))
    expected_risk = -float(np.mean(probs[idx, test.labels]))
    accuracy = float(np.mean(np.argmax(probs, axis=1) == test.labels))
    return expected_risk, accuracy


# ---- experiment sweep ------------------------------------------------------


@dataclass
class MetricsRow:
    algorithm: str
    alpha: float
    tau: float
    seed: int
    expected_risk: float
    accuracy: float
    runtime_seconds: float


@dataclass
class ExperimentConfig:
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    dataset_path: str | None = None     # supervised CSV; overrides synthetic
    train_rows: int = 6000
    test_rows: int = 2000
    logging_fraction: float = 0.05
    keep_fraction: float = 0.1
    train: TrainConfig = field(default_factory=lambda: TrainConfig(
        trunc=TruncationParams(zeta=0.001, tau=0.001)
    ))
    algorithms: tuple[str, ...] = ("WCE", "KL", "PR", "logging")
    alphas: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 0.9, 1.0)
    taus: tuple[float, ...] = (0.001,)
    repetitions: int = 10
    seed: int = 0
    dropped_action: int | None = None   # remove this action from the known set
    timing: bool = False                # False keeps metrics output deterministic
    output_dir: str | None = None

    def __post_init__(self):
        for name, frac in (("logging_fraction", self.logging_fraction),
                           ("keep_fraction", self.keep_fraction)):
            if not 0.0 <= frac <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {frac}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


_TRAINERS = {"WCE": train_wce_crm, "KL": train_kl_crm, "PR": train_pr_crm}

METRICS_HEADER = "algorithm,alpha,tau,seed,expected_risk,accuracy,runtime_seconds"


def run_experiment(
    cfg: ExperimentConfig,
) -> tuple[list[MetricsRow], list[str]]:
    """Run the full sweep; returns (metric rows in canonical order, cell errors).

    Pipeline per repetition seed: supervised data -> logging policy ->
    bandit transform -> reward masking -> train each (algorithm, alpha, tau)
    cell -> exact evaluation on the held-out test set.
    """
    from .data import read_supervised_csv

    if cfg.dataset_path is not None:
        full = read_supervised_csv(cfg.dataset_path)
        if len(full) < cfg.train_rows + cfg.test_rows:
            raise ValueError("dataset smaller than train_rows + test_rows")
    else:
        full = generate_synthetic(
            cfg.synthetic, cfg.train_rows + cfg.test_rows, cfg.seed
        )
    split_rng = make_rng(derive_seed(cfg.seed, "split"))
    perm = split_rng.permutation(len(full))
    train_ds = full.subset(np.sort(perm[: cfg.train_rows]))
    test_ds = full.subset(np.sort(perm[cfg.train_rows: cfg.train_rows + cfg.test_rows]))

    logging_policy = train_logging_policy(train_ds, cfg.logging_fraction, cfg.seed)
    logging_risk, logging_acc = evaluate_policy(logging_policy, test_ds)

    rows: list[MetricsRow] = []
    errors: list[str] = []
    for rep in range(cfg.repetitions):
        rep_seed = derive_seed(cfg.seed, f"rep{rep}")
        bandit_rng = make_rng(derive_seed(rep_seed, "bandit"))
        S_all = supervised_to_bandit(train_ds, logging_policy, bandit_rng)
        mask_rng = make_rng(derive_seed(rep_seed, "mask"))
        S, S_u = mask_rewards(S_all, cfg.keep_fraction, mask_rng)
        if cfg.dropped_action is not None:
            S, S_u = drop_action(S, S_u, cfg.dropped_action)
        init = SoftmaxPolicy.create(
            train_ds.dim, train_ds.num_classes, (20, 20),
            make_rng(derive_seed(rep_seed, "init")),
        )
        for algorithm in cfg.algorithms:
            if algorithm == "logging":
                rows.append(MetricsRow("logging", 0.0, 0.0, rep,
                                       logging_risk, logging_acc, 0.0))
                continue
            for alpha in cfg.alphas:
                for tau in cfg.taus:
                    try:
                        rows.append(_run_cell(
                            cfg, algorithm, alpha, tau, rep, rep_seed,
                            S, S_u, init, test_ds,
                        ))
                    except Exception as exc:  # record and move on
                        errors.append(
                            f"{algorithm},alpha={alpha},tau={tau},seed={rep}: {exc}"
                        )
    rows.sort(key=lambda r: (r.algorithm, r.alpha, r.tau, r.seed))
    if cfg.output_dir is not None:
        _write_outputs(cfg.output_dir, rows, errors)
    return rows, errors


def _run_cell(cfg, algorithm, alpha, tau, rep, rep_seed, S, S_u, init, test_ds):
    trainer = _TRAINERS[algorithm]
    cell_cfg = replace(
        cfg.train,
        alpha=alpha,
        trunc=TruncationParams(zeta=cfg.train.trunc.zeta, tau=tau),
        seed=derive_seed(rep_seed, f"train.{algorithm}.{alpha}.{tau}"),
        variant=algorithm,
    )
    start = time.perf_counter()
    policy, _ = trainer(S, S_u, cell_cfg, init)
    elapsed = time.perf_counter() - start if cfg.timing else 0.0
    risk, acc = evaluate_policy(policy, test_ds)
    return MetricsRow(algorithm, alpha, tau, rep, risk, acc, elapsed)


def write_metrics_csv(path, rows: list[MetricsRow]) -> None:
    lines = [METRICS_HEADER]
    for r in rows:
        lines.append(
            f"{r.algorithm},{r.alpha:.17g},{r.tau:.17g},{r.seed},"
            f"{r.expected_risk:.17g},{r.accuracy:.17g},{r.runtime_seconds:.6f}"
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def summarize(rows: list[MetricsRow]) -> list[dict]:
    """Mean and standard deviation per (algorithm, alpha, tau) cell."""
    cells: dict[tuple, list[MetricsRow]] = {}
    for r in rows:
        cells.setdefault((r.algorithm, r.alpha, r.tau), []).append(r)
    out = []
    for (algorithm, alpha, tau), group in sorted(cells.items()):
        risks = np.array([g.expected_risk for g in group])
        accs = np.array([g.accuracy for g in group])
        out.append({
            "algorithm": algorithm,
            "alpha": alpha,
            "tau": tau,
            "runs": len(group),
            "expected_risk_mean": float(risks.mean()),
            "expected_risk_std": float(risks.std(ddof=1)) if len(group) > 1 else 0.0,
            "accuracy_mean": float(accs.mean()),
            "accuracy_std": float(accs.std(ddof=1)) if len(group) > 1 else 0.0,
        })
    return out


def write_summary_csv(path, rows: list[MetricsRow]) -> None:
    cols = ["algorithm", "alpha", "tau", "runs", "expected_risk_mean",
            "expected_risk_std", "accuracy_mean", "accuracy_std"]
    lines = [",".join(cols)]
    for cell in summarize(rows):
        vals = []
        for col in cols:
            v = cell[col]
            vals.append(f"{v:.17g}" if isinstance(v, float) else str(v))
        lines.append(",".join(vals))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_outputs(output_dir, rows, errors) -> None:
    import os

    os.makedirs(output_dir, exist_ok=True)
    write_metrics_csv(os.path.join(output_dir, "metrics.csv"), rows)
    write_summary_csv(os.path.join(output_dir, "summary.csv"), rows)
    if errors:
        with open(os.path.join(output_dir, "errors.txt"), "w") as fh:
            fh.write("\n".join(errors) + "\n")
