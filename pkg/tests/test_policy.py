import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semicrm.policy import (
    DimensionMismatchError,
    PolicyGradient,
    SoftmaxPolicy,
    load_policy,
    save_policy,
)
from semicrm.rng import make_rng


def zero_policy(d=3, k=4, hidden=(5,)):
    p = SoftmaxPolicy.create(d, k, hidden, make_rng(0))
    for w in p.weights:
        w[:] = 0.0
    for b in p.biases:
        b[:] = 0.0
    return p


def random_policy(d=3, k=4, hidden=(6, 5), seed=1):
    return SoftmaxPolicy.create(d, k, hidden, make_rng(seed))


def flatten(grad: PolicyGradient) -> np.ndarray:
    return np.concatenate([a.ravel() for a in grad.weights + grad.biases])


def perturbed(policy: SoftmaxPolicy, flat_delta: np.ndarray) -> SoftmaxPolicy:
    out = policy.copy()
    pos = 0
    for arr in out.weights + out.biases:
        arr += flat_delta[pos: pos + arr.size].reshape(arr.shape)
        pos += arr.size
    return out


class TestProbs:
    def test_zero_parameters_give_uniform(self):
        p = zero_policy(k=4)
        assert np.allclose(p.probs(np.array([1.0, -2.0, 0.3])), 0.25)

    def test_identity_scorer_hand_value(self):
        # linear scorer with scores [0, ln 2] -> softmax (1/3, 2/3)
        p = SoftmaxPolicy(
            weights=[np.array([[1.0, 0.0], [0.0, 1.0]])],
            biases=[np.zeros(2)],
        )
        got = p.probs(np.array([0.0, np.log(2.0)]))
        assert np.allclose(got, [1.0 / 3.0, 2.0 / 3.0], atol=1e-12)

    def test_score_shift_invariance(self):
        p = random_policy()
        x = make_rng(7).standard_normal(3)
        shifted = p.copy()
        shifted.biases[-1] += 11.5
        assert np.allclose(p.probs(x), shifted.probs(x), atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            random_policy(d=3).probs(np.zeros(5))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000))
    def test_normalization_property(self, seed):
        rng = make_rng(seed)
        p = SoftmaxPolicy.create(4, 5, (6,), rng)
        x = 3.0 * rng.standard_normal(4)
        probs = p.probs(x)
        assert abs(probs.sum() - 1.0) < 1e-9
        assert np.all(probs > 0.0)

    def test_log_probs_match_log_of_probs(self):
        p = random_policy()
        x = make_rng(3).standard_normal(3)
        assert np.allclose(p.log_probs(x), np.log(p.probs(x)), atol=1e-12)


class TestGradScalar:
    def test_prob_gradients_sum_to_zero(self):
        p = random_policy()
        x = make_rng(5).standard_normal(3)
        total = PolicyGradient.zeros_like(p)
        for a in range(p.action_count):
            total.axpy(1.0, p.grad_scalar(x, a, mode="prob"))
        assert total.norm() < 1e-12

    def test_log_prob_is_prob_over_pi(self):
        p = random_policy()
        x = make_rng(6).standard_normal(3)
        a = 2
        pi_a = p.probs(x)[a]
        g_log = flatten(p.grad_scalar(x, a, mode="log_prob"))
        g_prob = flatten(p.grad_scalar(x, a, mode="prob"))
        assert np.allclose(g_prob, pi_a * g_log, atol=1e-12)

    @pytest.mark.parametrize("hidden", [(5,), (6, 5), (20, 20)])
    @pytest.mark.parametrize("mode", ["log_prob", "prob"])
    def test_finite_difference_agreement(self, hidden, mode):
        p = random_policy(hidden=hidden, seed=11)
        rng = make_rng(12)
        x = rng.standard_normal(3)
        a = 1
        analytic = flatten(p.grad_scalar(x, a, mode=mode))
        h = 1e-5
        num = np.zeros_like(analytic)
        for i in range(len(analytic)):
            e = np.zeros_like(analytic)
            e[i] = h

            def val(policy):
                if mode == "prob":
                    return policy.probs(x)[a]
                return policy.log_probs(x)[a]

            num[i] = (val(perturbed(p, e)) - val(perturbed(p, -e))) / (2 * h)
        scale = max(np.abs(analytic).max(), 1.0)
        assert np.max(np.abs(analytic - num)) / scale < 1e-4


class TestSampling:
    def test_near_deterministic_policy(self):
        p = zero_policy(k=3)
        p.biases[-1][:] = np.array([-40.0, 0.0, -40.0])  # pi(a_1) ~ 1
        rng = make_rng(0)
        x = np.zeros(3)
        assert all(p.sample_action(x, rng) == 1 for _ in range(50))

    def test_uniform_frequencies(self):
        p = zero_policy(k=4)
        rng = make_rng(123)
        x = np.ones(3)
        draws = np.array([p.sample_action(x, rng) for _ in range(100_000)])
        freqs = np.bincount(draws, minlength=4) / len(draws)
        assert np.all(np.abs(freqs - 0.25) < 0.01)

    def test_same_seed_same_sequence(self):
        p = random_policy()
        x = make_rng(9).standard_normal(3)
        seq1 = [p.sample_action(x, make_rng(42)) for _ in range(1)]
        a = make_rng(42)
        b = make_rng(42)
        seq_a = [p.sample_action(x, a) for _ in range(200)]
        seq_b = [p.sample_action(x, b) for _ in range(200)]
        assert seq_a == seq_b


class TestArgmax:
    def test_picks_max(self):
        p = zero_policy(k=3)
        p.biases[-1][:] = np.log([0.1, 0.6, 0.3])
        assert p.argmax_action(np.zeros(3)) == 1

    def test_tie_breaks_low_index(self):
        p = zero_policy(k=2)
        assert p.argmax_action(np.zeros(3)) == 0

    def test_invariant_under_score_shift(self):
        p = random_policy()
        x = make_rng(4).standard_normal(3)
        shifted = p.copy()
        shifted.biases[-1] += 3.25
        assert p.argmax_action(x) == shifted.argmax_action(x)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        p = random_policy(hidden=(7, 5), seed=21)
        path = tmp_path / "policy.txt"
        save_policy(p, path)
        q = load_policy(path)
        for w1, w2 in zip(p.weights, q.weights):
            assert np.array_equal(w1, w2)
        for b1, b2 in zip(p.biases, q.biases):
            assert np.array_equal(b1, b2)

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("not a checkpoint\n")
        with pytest.raises(ValueError):
            load_policy(path)
