import numpy as np

from semicrm.bounds import DiscreteEnvironment
from semicrm.data import LoggedKnownSample, LoggedUnknownSample
from semicrm.policy import SoftmaxPolicy
from semicrm.rng import make_rng


def uniform_policy(d: int, k: int) -> SoftmaxPolicy:
    """All-zero parameters: exactly uniform over k actions."""
    p = SoftmaxPolicy.create(d, k, (4,), make_rng(0))
    for w in p.weights:
        w[:] = 0.0
    for b in p.biases:
        b[:] = 0.0
    return p


def table_policy(env: DiscreteEnvironment) -> SoftmaxPolicy:
    """Linear policy over one-hot contexts reproducing env.target_table exactly."""
    return SoftmaxPolicy(
        weights=[np.log(env.target_table)],
        biases=[np.zeros(env.action_count)],
    )


def logging_table_policy(env: DiscreteEnvironment) -> SoftmaxPolicy:
    return SoftmaxPolicy(
        weights=[np.log(env.logging_table)],
        biases=[np.zeros(env.action_count)],
    )


def sample_unknown(env: DiscreteEnvironment, m: int, rng) -> list[LoggedUnknownSample]:
    return [
        LoggedUnknownSample(s.context, s.action, s.propensity)
        for s in env.sample_logged(m, rng)
    ]


def make_known(context, action, propensity, reward) -> LoggedKnownSample:
    return LoggedKnownSample(np.asarray(context, dtype=float), action, propensity, reward)


def make_unknown(context, action, propensity) -> LoggedUnknownSample:
    return LoggedUnknownSample(np.asarray(context, dtype=float), action, propensity)
