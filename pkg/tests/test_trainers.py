import math

import numpy as np
import pytest
from conftest import make_known, make_unknown, sample_unknown, table_policy

from semicrm.bounds import random_environment
from semicrm.data import AugmentedSample, supervised_to_bandit
from semicrm.estimators import (
    TruncationParams,
    stack_known,
    stack_unknown,
)
from semicrm.harness import SyntheticSpec, generate_synthetic
from semicrm.policy import SoftmaxPolicy
from semicrm.rng import make_rng
from semicrm.trainers import (
    TrainConfig,
    fit_reward_regressor,
    grad_kl,
    grad_pseudo_reward,
    grad_truncated_ips,
    grad_wce,
    predict_pseudo_rewards,
    train_kl_crm,
    train_pr_crm,
    train_wce_crm,
)


def flat_params(policy):
    return np.concatenate([a.ravel() for a in policy.weights + policy.biases])


def flat_grad(grad):
    return np.concatenate([a.ravel() for a in grad.weights + grad.biases])


def nudged(policy, flat_delta):
    out = policy.copy()
    pos = 0
    for arr in out.weights + out.biases:
        arr += flat_delta[pos: pos + arr.size].reshape(arr.shape)
        pos += arr.size
    return out


def random_batches(seed=0, n=12, m=16, d=3, k=3):
    rng = make_rng(seed)
    S = [
        make_known(rng.standard_normal(d), int(rng.choice(k)),
                   float(rng.uniform(0.05, 1.0)), float(rng.uniform(-1.0, 0.0)))
        for _ in range(n)
    ]
    S_u = [
        make_unknown(rng.standard_normal(d), int(rng.choice(k)),
                     float(rng.uniform(0.05, 1.0)))
        for _ in range(m)
    ]
    return S, S_u


def check_gradient(policy, value_fn, grad, rel_tol=1e-4, h=1e-6):
    analytic = flat_grad(grad)
    num = np.zeros_like(analytic)
    for i in range(len(analytic)):
        e = np.zeros_like(analytic)
        e[i] = h
        num[i] = (value_fn(nudged(policy, e)) - value_fn(nudged(policy, -e))) / (2 * h)
    scale = max(np.abs(analytic).max(), 1e-8)
    assert np.max(np.abs(analytic - num)) / scale < rel_tol


class TestObjectiveGradients:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_truncated_ips(self, seed):
        S, _ = random_batches(seed)
        policy = SoftmaxPolicy.create(3, 3, (5,), make_rng(seed + 50))
        batch = stack_known(S)
        _, grad = grad_truncated_ips(policy, batch, 0.1)
        check_gradient(policy, lambda p: grad_truncated_ips(p, batch, 0.1)[0], grad)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_wce(self, seed):
        _, S_u = random_batches(seed)
        policy = SoftmaxPolicy.create(3, 3, (5,), make_rng(seed + 60))
        batch = stack_unknown(S_u)
        _, grad = grad_wce(policy, batch, 0.05)
        check_gradient(policy, lambda p: grad_wce(p, batch, 0.05)[0], grad)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_kl(self, seed):
        _, S_u = random_batches(seed)
        policy = SoftmaxPolicy.create(3, 3, (5,), make_rng(seed + 70))
        batch = stack_unknown(S_u)
        _, grad = grad_kl(policy, batch, 0.05)
        check_gradient(policy, lambda p: grad_kl(p, batch, 0.05)[0], grad)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_pseudo_reward(self, seed):
        S, S_u = random_batches(seed)
        rng = make_rng(seed + 80)
        aug = [AugmentedSample(s.context, s.action, s.propensity,
                               float(rng.uniform(-1.0, 0.0))) for s in S_u]
        policy = SoftmaxPolicy.create(3, 3, (5,), make_rng(seed + 90))
        known, aug_batch = stack_known(S), stack_unknown(aug)
        trunc = TruncationParams(zeta=0.05, tau=0.05)

        def value(p):
            ips, wce, _ = grad_pseudo_reward(p, known, aug_batch, 0.6, trunc)
            return 0.6 * ips + 0.4 * wce

        _, _, grad = grad_pseudo_reward(policy, known, aug_batch, 0.6, trunc)
        check_gradient(policy, value, grad)


class TestHandWorkedStep:
    def test_single_step_matches_manual_arithmetic(self):
        # one-hidden-unit scorer: h = relu(w x + b), scores = (u0 h + c0, u1 h + c1)
        w, b, u0, u1, c0, c1 = 0.5, 0.1, 0.8, -0.3, 0.05, -0.2
        policy = SoftmaxPolicy(
            weights=[np.array([[w]]), np.array([[u0, u1]])],
            biases=[np.array([b]), np.array([c0, c1])],
        )
        x_k, a_k, p_k, r_k = 1.2, 0, 0.4, -1.0
        x_u, a_u, p_u = -0.7, 1, 0.6
        alpha, lr = 0.6, 1.0

        S = [make_known([x_k], a_k, p_k, r_k)]
        S_u = [make_unknown([x_u], a_u, p_u)]
        cfg = TrainConfig(alpha=alpha, trunc=TruncationParams(),
                          epochs=1, batch_known=1, batch_unknown=1,
                          learning_rate=lr, seed=0, variant="WCE")
        trained, _ = train_wce_crm(S, S_u, cfg, policy)

        def forward(x):
            h = max(w * x + b, 0.0)
            s0, s1 = u0 * h + c0, u1 * h + c1
            mx = max(s0, s1)
            e0, e1 = math.exp(s0 - mx), math.exp(s1 - mx)
            z = e0 + e1
            return h, (e0 / z, e1 / z)

        # gradient of r * pi_0(x_k) / p_k through softmax and scorer
        h_k, pi_k = forward(x_k)
        coeff = r_k / p_k * pi_k[0]          # dL/ds = coeff * (e_0 - pi)
        ds_k = (coeff * (1.0 - pi_k[0]), coeff * (0.0 - pi_k[1]))
        relu_on_k = 1.0 if w * x_k + b > 0 else 0.0
        dh_k = (ds_k[0] * u0 + ds_k[1] * u1) * relu_on_k
        g1 = {
            "w": dh_k * x_k, "b": dh_k,
            "u0": ds_k[0] * h_k, "u1": ds_k[1] * h_k,
            "c0": ds_k[0], "c1": ds_k[1],
        }
        # gradient of -p_u * log pi_1(x_u)   (m_[1] = 1)
        h_u, pi_u = forward(x_u)
        ds_u = (-p_u * (0.0 - pi_u[0]), -p_u * (1.0 - pi_u[1]))
        relu_on_u = 1.0 if w * x_u + b > 0 else 0.0
        dh_u = (ds_u[0] * u0 + ds_u[1] * u1) * relu_on_u
        g2 = {
            "w": dh_u * x_u, "b": dh_u,
            "u0": ds_u[0] * h_u, "u1": ds_u[1] * h_u,
            "c0": ds_u[0], "c1": ds_u[1],
        }
        step = {key: lr * (alpha * g1[key] + (1 - alpha) * g2[key]) for key in g1}
        assert trained.weights[0][0, 0] == pytest.approx(w - step["w"], abs=1e-10)
        assert trained.biases[0][0] == pytest.approx(b - step["b"], abs=1e-10)
        assert trained.weights[1][0, 0] == pytest.approx(u0 - step["u0"], abs=1e-10)
        assert trained.weights[1][0, 1] == pytest.approx(u1 - step["u1"], abs=1e-10)
        assert trained.biases[1][0] == pytest.approx(c0 - step["c0"], abs=1e-10)
        assert trained.biases[1][1] == pytest.approx(c1 - step["c1"], abs=1e-10)


class TestTrainerContracts:
    def make_setup(self, seed=0):
        S, S_u = random_batches(seed, n=20, m=30)
        init = SoftmaxPolicy.create(3, 3, (6,), make_rng(seed + 100))
        return S, S_u, init

    def cfg(self, **kw):
        defaults = dict(alpha=0.5, trunc=TruncationParams(zeta=0.01, tau=0.01),
                        epochs=5, batch_known=20, batch_unknown=30,
                        learning_rate=0.05, seed=7, variant="WCE")
        defaults.update(kw)
        return TrainConfig(**defaults)

    def test_seed_determinism(self):
        S, S_u, init = self.make_setup()
        p1, _ = train_wce_crm(S, S_u, self.cfg(), init)
        p2, _ = train_wce_crm(S, S_u, self.cfg(), init)
        for a, b in zip(flat_params(p1), flat_params(p2)):
            assert a == b

    def test_alpha_one_wce_and_kl_agree(self):
        S, S_u, init = self.make_setup(1)
        p_wce, _ = train_wce_crm(S, S_u, self.cfg(alpha=1.0), init)
        p_kl, _ = train_kl_crm(S, S_u, self.cfg(alpha=1.0, variant="KL"), init)
        assert np.array_equal(flat_params(p_wce), flat_params(p_kl))

    def test_alpha_linearity_of_update(self):
        S, S_u, init = self.make_setup(2)
        theta0 = flat_params(init)
        deltas = {}
        for alpha in (0.0, 1.0, 0.3):
            cfg = self.cfg(alpha=alpha, epochs=1)
            p, _ = train_wce_crm(S, S_u, cfg, init)
            deltas[alpha] = flat_params(p) - theta0
        combo = 0.3 * deltas[1.0] + 0.7 * deltas[0.0]
        assert np.max(np.abs(deltas[0.3] - combo)) < 1e-12

    def test_empty_dataset_errors(self):
        S, S_u, init = self.make_setup(3)
        with pytest.raises(ValueError):
            train_wce_crm([], S_u, self.cfg(alpha=0.5), init)
        with pytest.raises(ValueError):
            train_wce_crm(S, [], self.cfg(alpha=0.5), init)

    def test_alpha_zero_wce_moves_toward_logging_policy(self):
        # synthetic env with a known logging policy; full-batch descent on the
        # WCE regularizer alone shrinks the TV distance to it
        spec = SyntheticSpec(dim=3, num_classes=3, separation=1.0, noise=1.0)
        ds = generate_synthetic(spec, 400, 11)
        logging = SoftmaxPolicy.create(3, 3, (8,), make_rng(12))
        S_all = supervised_to_bandit(ds, logging, make_rng(13))
        S_u = [make_unknown(s.context, s.action, s.propensity) for s in S_all]
        init = SoftmaxPolicy.create(3, 3, (20, 20), make_rng(14))
        held_out = generate_synthetic(spec, 200, 15).features

        def mean_tv(policy):
            a = policy.probs_batch(held_out)
            b = logging.probs_batch(held_out)
            return float(np.mean(0.5 * np.sum(np.abs(a - b), axis=1)))

        tvs = [mean_tv(init)]
        for epochs in (50, 100, 200):
            cfg = self.cfg(alpha=0.0, epochs=epochs, batch_known=1,
                           batch_unknown=len(S_u), learning_rate=0.05, seed=16)
            policy, _ = train_wce_crm([], S_u, cfg, init)
            tvs.append(mean_tv(policy))
        assert all(b < a for a, b in zip(tvs, tvs[1:]))

    def test_alpha_zero_kl_descends(self):
        from semicrm.estimators import kl_regularizer

        S, S_u, init = self.make_setup(4)
        cfg = self.cfg(alpha=0.0, epochs=300, variant="KL", learning_rate=0.05)
        policy, _ = train_kl_crm(S, S_u, cfg, init)
        assert (kl_regularizer(policy, S_u, 0.01)
                <= kl_regularizer(init, S_u, 0.01))


class TestRewardRegressor:
    def test_constant_rewards(self):
        rng = make_rng(20)
        S = [make_known(rng.standard_normal(3), int(rng.choice(2)),
                        float(rng.uniform(0.1, 1.0)), -1.0) for _ in range(40)]
        reg = fit_reward_regressor(S)
        for s in S:
            assert reg.predict(s.context, s.action) == pytest.approx(-1.0, abs=1e-6)

    def test_first_order_optimality(self):
        rng = make_rng(21)
        S = [make_known(rng.standard_normal(3), int(rng.choice(3)),
                        float(rng.uniform(0.1, 1.0)), float(rng.uniform(-1, 0)))
             for _ in range(60)]
        reg = fit_reward_regressor(S)
        batch = stack_known(S)
        phi = reg.features(batch.contexts, batch.actions)
        total_p = batch.propensities.sum()
        resid = phi @ reg.weights - batch.rewards
        grad = 2.0 * phi.T @ (batch.propensities / total_p * resid)
        assert np.linalg.norm(grad) < 1e-6

    def test_matches_gradient_descent_oracle(self):
        rng = make_rng(22)
        S = [make_known(rng.standard_normal(2), int(rng.choice(2)),
                        float(rng.uniform(0.1, 1.0)), float(rng.uniform(-1, 0)))
             for _ in range(50)]
        reg = fit_reward_regressor(S)
        batch = stack_known(S)
        phi = reg.features(batch.contexts, batch.actions)
        wts = batch.propensities / batch.propensities.sum()
        beta = np.zeros(phi.shape[1])
        for _ in range(60_000):
            grad = 2.0 * phi.T @ (wts * (phi @ beta - batch.rewards))
            beta -= 0.1 * grad
        assert np.max(np.abs(beta - reg.weights)) < 1e-6

    def test_pseudo_reward_clamping(self):
        reg = fit_reward_regressor([make_known([0.0], 0, 0.5, -1.0),
                                    make_known([1.0], 0, 0.5, -1.0)])
        reg.weights[:] = 0.0
        reg.weights[-1] = 0.3   # constant raw prediction 0.3
        aug = predict_pseudo_rewards(reg, [make_unknown([2.0], 0, 0.5)])
        assert aug[0].pseudo_reward == 0.0
        reg.weights[-1] = -0.4
        aug = predict_pseudo_rewards(reg, [make_unknown([2.0], 0, 0.5)])
        assert aug[0].pseudo_reward == pytest.approx(-0.4, abs=1e-12)


class TestPrCrm:
    def test_empty_unknown_set_matches_wce_crm_full_batch(self):
        S, _ = random_batches(5, n=25, m=1)
        init = SoftmaxPolicy.create(3, 3, (6,), make_rng(105))
        alpha = 0.4
        cfg_pr = TrainConfig(alpha=alpha, trunc=TruncationParams(zeta=0.01, tau=0.01),
                             epochs=20, batch_known=25, batch_unknown=5,
                             learning_rate=0.05, seed=9, variant="PR")
        p_pr, _ = train_pr_crm(S, [], cfg_pr, init)
        S_u_from_S = [make_unknown(s.context, s.action, s.propensity) for s in S]
        cfg_wce = TrainConfig(alpha=alpha, trunc=TruncationParams(zeta=0.01, tau=0.01),
                              epochs=20, batch_known=25, batch_unknown=25,
                              learning_rate=0.05, seed=9, variant="WCE")
        p_wce, _ = train_wce_crm(S, S_u_from_S, cfg_wce, init)
        assert np.max(np.abs(flat_params(p_pr) - flat_params(p_wce))) < 1e-12

    def test_objective_decreases_on_synthetic_run(self):
        rng = make_rng(30)
        env = random_environment(rng, 4, 3)
        S = env.sample_logged(200, rng)
        S_u = sample_unknown(env, 400, rng)
        init = SoftmaxPolicy.create(4, 3, (10,), make_rng(31))
        cfg = TrainConfig(alpha=0.8, trunc=TruncationParams(zeta=0.01, tau=0.01),
                          epochs=200, batch_known=64, batch_unknown=128,
                          learning_rate=0.05, seed=32, variant="PR")
        _, trace = train_pr_crm(S, S_u, cfg, init)
        first = 0.8 * trace.ips_terms[0] + 0.2 * trace.reg_terms[0]
        last = 0.8 * trace.ips_terms[-1] + 0.2 * trace.reg_terms[-1]
        assert last < first

    def test_determinism(self):
        S, S_u = random_batches(6, n=20, m=30)
        init = SoftmaxPolicy.create(3, 3, (6,), make_rng(106))
        cfg = TrainConfig(alpha=0.7, epochs=10, batch_known=10, batch_unknown=15,
                          learning_rate=0.02, seed=3, variant="PR")
        p1, _ = train_pr_crm(S, S_u, cfg, init)
        p2, _ = train_pr_crm(S, S_u, cfg, init)
        assert np.array_equal(flat_params(p1), flat_params(p2))
