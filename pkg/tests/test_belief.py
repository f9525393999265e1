"""Particle filter: closed-form soft-resample oracles, permutation and
positivity properties, finite-difference gradients through chained updates."""

import numpy as np
import pytest

from teamregret import belief as bf
from teamregret import diffcore as dc
from teamregret.belief import (
    Belief,
    FilterConfig,
    FilterNets,
    belief_update,
    compress,
    init_belief,
    likelihood_values,
    likelihoods,
    propagate,
    soft_resample,
)
from teamregret.diffcore import Tensor


def small_nets(seed=0, particles=3, hidden=4, kappa=5, obs_dim=3, n_actions=2, **kw):
    config = FilterConfig(particles=particles, hidden_dim=hidden, kappa_dim=kappa,
                          net_width=6, **kw)
    return FilterNets.create(obs_dim, n_actions, config, np.random.default_rng(seed))


class TestInitBelief:
    def test_uniform_weights(self):
        b = init_belief(None, 4, hidden_dim=3)
        np.testing.assert_allclose(b.weights.data, [0.25] * 4)
        np.testing.assert_array_equal(b.hidden.data, np.zeros((4, 3)))

    def test_single_particle(self):
        b = init_belief(np.array([1.0, 2.0]), 1)
        assert b.weights.data[0] == 1.0
        np.testing.assert_array_equal(b.hidden.data, [[1.0, 2.0]])

    def test_two_agents_share_initial_belief(self):
        seed = np.array([0.5, -1.0])
        a = init_belief(seed, 3, agent_id=0)
        b = init_belief(seed, 3, agent_id=1)
        assert a.hidden.data.tobytes() == b.hidden.data.tobytes()
        assert a.weights.data.tobytes() == b.weights.data.tobytes()

    def test_invalid_particle_count(self):
        with pytest.raises(ValueError, match=">= 1"):
            init_belief(None, 0, hidden_dim=2)

    def test_weight_sum_invariant_enforced(self):
        with pytest.raises(ValueError, match="sum to 1"):
            Belief(hidden=Tensor(np.zeros((2, 2))), weights=Tensor([0.7, 0.7]))

    def test_particles_view(self):
        b = init_belief(np.array([1.0]), 2)
        parts = b.particles
        assert len(parts) == 2 and parts[0].weight == 0.5


class TestPropagate:
    def test_zero_net_gives_bias_image(self):
        nets = small_nets()
        for p in nets.transition.params:
            p.data[...] = 0.0
        nets.transition.params[-1].data[...] = 0.75  # output bias
        b = init_belief(None, 3, hidden_dim=4)
        out = propagate(nets, b, np.zeros(2), np.ones(3))
        np.testing.assert_allclose(out.data, np.full((3, 4), 0.75))

    def test_identical_particles_identical_outputs(self):
        nets = small_nets(1)
        b = init_belief(np.array([0.3, -0.2, 0.1, 0.9]), 3)
        out = propagate(nets, b, np.array([1.0, 0.0]), np.array([0.1, 0.2, 0.3])).data
        assert np.ptp(out, axis=0).max() == 0.0

    def test_dimension_mismatch(self):
        nets = small_nets()
        b = init_belief(None, 3, hidden_dim=4)
        with pytest.raises(ValueError, match="width"):
            propagate(nets, b, np.zeros(2), np.ones(5))

    def test_gradient_matches_finite_differences(self):
        nets = small_nets(2)
        rng = np.random.default_rng(3)
        b = Belief(Tensor(rng.normal(size=(3, 4))), Tensor(np.full(3, 1 / 3)))
        act, obs = rng.normal(size=2), rng.normal(size=3)

        report = dc.grad_check(
            lambda: dc.summation(dc.square(propagate(nets, b, act, obs))),
            nets.transition.params,
        )
        assert report.max_rel_error < 1e-4


class TestLikelihoods:
    def test_strictly_positive(self):
        nets = small_nets(4)
        rng = np.random.default_rng(5)
        hiddens = Tensor(rng.normal(scale=3, size=(3, 4)))
        out = likelihoods(nets, rng.normal(size=3), hiddens)
        assert (out.data > 0).all()
        assert out.shape == (3,)

    def test_identical_hiddens_identical_likelihoods(self):
        nets = small_nets(6)
        hiddens = Tensor(np.tile(np.array([0.1, 0.2, 0.3, 0.4]), (5, 1)))
        out = likelihoods(nets, np.zeros(3), hiddens).data
        assert np.ptp(out) == 0.0

    def test_gradient_matches_finite_differences(self):
        nets = small_nets(7)
        rng = np.random.default_rng(8)
        hiddens = Tensor(rng.normal(size=(3, 4)))
        obs = rng.normal(size=3)
        report = dc.grad_check(
            lambda: dc.summation(dc.square(likelihood_values(nets, dc.as_tensor(obs), hiddens))),
            nets.likelihood.params,
        )
        assert report.max_rel_error < 1e-4


class TestSoftResample:
    def test_beta_one_is_exact_bayes(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            x = rng.integers(2, 12)
            w = rng.dirichlet(np.ones(x))
            lik = rng.uniform(0.1, 5.0, size=x)
            out = soft_resample(w, lik, 1.0).data
            np.testing.assert_allclose(out, lik * w / (lik * w).sum(), atol=1e-12)

    def test_beta_zero_is_uniform(self):
        rng = np.random.default_rng(10)
        for _ in range(200):
            x = rng.integers(2, 12)
            w = rng.dirichlet(np.ones(x))
            lik = rng.uniform(0.1, 5.0, size=x)
            out = soft_resample(w, lik, 0.0).data
            np.testing.assert_allclose(out, np.full(x, 1.0 / x), atol=1e-12)

    def test_hand_case(self):
        # L*w = (0.3, 0.1), beta = 0.5 -> (0.4, 0.3)/0.7
        out = soft_resample([0.5, 0.5], [0.6, 0.2], 0.5).data
        np.testing.assert_allclose(out, [0.4 / 0.7, 0.3 / 0.7], atol=1e-12)

    def test_output_normalised_and_positive(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            x = int(rng.integers(2, 10))
            w = rng.dirichlet(np.ones(x))
            lik = rng.uniform(1e-6, 10.0, size=x)
            beta = rng.uniform(0.0, 0.999)
            out = soft_resample(w, lik, beta).data
            assert abs(out.sum() - 1.0) < 1e-6
            bound = (1 - beta) / (x * (beta * (lik * w).max() * x + (1 - beta)))
            assert (out > 0).all()
            assert (out >= bound - 1e-15).all()

    def test_beta_out_of_range(self):
        with pytest.raises(ValueError, match="beta"):
            soft_resample([1.0], [1.0], 1.5)

    def test_unnormalised_weights_rejected(self):
        with pytest.raises(ValueError, match="sum to 1"):
            soft_resample([0.9, 0.9], [1.0, 1.0], 0.5)

    def test_differentiable(self):
        rng = np.random.default_rng(12)
        w = Tensor(rng.dirichlet(np.ones(4)), requires_grad=True, name="w")
        lik = Tensor(rng.uniform(0.5, 2.0, size=4), requires_grad=True, name="lik")
        report = dc.grad_check(
            lambda: dc.summation(dc.square(soft_resample(w, lik, 0.5))), [w, lik]
        )
        assert report.max_rel_error < 1e-4


class TestCompress:
    def test_single_particle_summary_is_hidden_plus_zero_entropy(self):
        nets = small_nets(13, particles=1)
        h = np.array([[0.4, -0.1, 0.2, 0.6]])
        b = Belief(Tensor(h), Tensor([1.0]))
        obs = np.array([0.1, 0.2, 0.3])
        out = compress(nets, obs, b).kappa.data
        direct = nets.generator(np.concatenate([obs, h[0], [0.0]])).data
        np.testing.assert_allclose(out, direct, atol=1e-12)

    def test_permutation_invariance(self):
        nets = small_nets(14)
        rng = np.random.default_rng(15)
        h = rng.normal(size=(3, 4))
        w = rng.dirichlet(np.ones(3))
        obs = rng.normal(size=3)
        perm = np.array([2, 0, 1])
        a = compress(nets, obs, Belief(Tensor(h), Tensor(w))).kappa.data
        b = compress(nets, obs, Belief(Tensor(h[perm]), Tensor(w[perm]))).kappa.data
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_gradient_through_generator(self):
        nets = small_nets(16)
        rng = np.random.default_rng(17)
        b = Belief(Tensor(rng.normal(size=(3, 4))), Tensor(rng.dirichlet(np.ones(3))))
        obs = rng.normal(size=3)
        report = dc.grad_check(
            lambda: dc.summation(dc.square(compress(nets, obs, b).kappa)),
            nets.generator.params,
        )
        assert report.max_rel_error < 1e-4


class TestBeliefUpdate:
    def test_beta_zero_gives_uniform_weights(self):
        nets = small_nets(18)
        rng = np.random.default_rng(19)
        b = init_belief(rng.normal(size=4), 3)
        _, updated = belief_update(nets, b, np.array([1.0, 0.0]), rng.normal(size=3), beta=0.0)
        np.testing.assert_allclose(updated.weights.data, np.full(3, 1 / 3), atol=1e-12)

    def test_shared_parameters_identical_agents(self):
        nets = small_nets(20)
        rng = np.random.default_rng(21)
        obs, act = rng.normal(size=3), np.array([0.0, 1.0])
        outs = []
        for agent_id in (0, 1):
            b = init_belief(None, 3, hidden_dim=4, agent_id=agent_id)
            kappa, updated = belief_update(nets, b, act, obs)
            outs.append((kappa.kappa.data, updated.weights.data))
        np.testing.assert_array_equal(outs[0][0], outs[1][0])
        np.testing.assert_array_equal(outs[0][1], outs[1][1])

    def test_weights_normalised_along_random_chains(self):
        nets = small_nets(22)
        rng = np.random.default_rng(23)
        b = init_belief(None, 4, hidden_dim=4)
        for _ in range(20):
            beta = rng.uniform(0.05, 0.95)
            _, b = belief_update(nets, b, rng.normal(size=2), rng.normal(size=3), beta=beta)
            assert abs(b.weights.data.sum() - 1.0) < 1e-6
            assert (b.weights.data > 0).all()

    def test_permutation_equivariance(self):
        nets = small_nets(24)
        rng = np.random.default_rng(25)
        h = rng.normal(size=(4, 4))
        w = rng.dirichlet(np.ones(4))
        obs, act = rng.normal(size=3), rng.normal(size=2)
        perm = np.array([3, 1, 0, 2])
        k1, b1 = belief_update(nets, Belief(Tensor(h), Tensor(w)), act, obs)
        k2, b2 = belief_update(nets, Belief(Tensor(h[perm]), Tensor(w[perm])), act, obs)
        np.testing.assert_allclose(k1.kappa.data, k2.kappa.data, atol=1e-12)
        np.testing.assert_allclose(b1.hidden.data[perm], b2.hidden.data, atol=1e-12)
        np.testing.assert_allclose(b1.weights.data[perm], b2.weights.data, atol=1e-12)

    def test_gradient_through_two_chained_updates(self):
        nets = small_nets(26)
        rng = np.random.default_rng(27)
        obs = [rng.normal(size=3) for _ in range(2)]
        acts = [rng.normal(size=2) for _ in range(2)]

        def loss():
            b = init_belief(None, 3, hidden_dim=4)
            total = None
            for o, a in zip(obs, acts):
                kappa, b = belief_update(nets, b, a, o)
                term = dc.summation(dc.square(kappa.kappa))
                total = term if total is None else dc.add(total, term)
            return total

        report = dc.grad_check(loss, nets.params)
        assert report.max_rel_error < 1e-3

    def test_gradient_through_five_chained_updates(self):
        nets = small_nets(28)
        rng = np.random.default_rng(29)
        obs = [rng.normal(size=3) for _ in range(5)]
        acts = [rng.normal(size=2) for _ in range(5)]

        def loss():
            b = init_belief(None, 3, hidden_dim=4)
            kappa = None
            for o, a in zip(obs, acts):
                kappa, b = belief_update(nets, b, a, o)
            return dc.summation(dc.square(kappa.kappa))

        report = dc.grad_check(loss, nets.params, max_coords=200)
        assert report.max_rel_error < 1e-3

    def test_likelihood_on_propagated_flag_changes_scoring(self):
        rng = np.random.default_rng(30)
        h = rng.normal(size=(3, 4))
        w = np.array([0.2, 0.3, 0.5])
        obs, act = rng.normal(size=3), rng.normal(size=2)
        pre = small_nets(31)
        post = small_nets(31, likelihood_on_propagated=True)
        _, b_pre = belief_update(pre, Belief(Tensor(h.copy()), Tensor(w.copy())), act, obs)
        _, b_post = belief_update(post, Belief(Tensor(h.copy()), Tensor(w.copy())), act, obs)
        assert not np.allclose(b_pre.weights.data, b_post.weights.data)


class TestBatchedEqualsPerAgent:
    def test_team_stack_matches_individual_updates(self):
        nets = small_nets(32)
        rng = np.random.default_rng(33)
        n_agents = 4
        hidden = rng.normal(size=(n_agents, 3, 4))
        weights = np.stack([rng.dirichlet(np.ones(3)) for _ in range(n_agents)])
        obs = rng.normal(size=(n_agents, 3))
        acts = rng.normal(size=(n_agents, 2))

        kappa_b, hid_b, w_b = bf.belief_step(
            nets, Tensor(hidden), Tensor(weights), Tensor(acts), Tensor(obs), beta=0.5
        )
        for i in range(n_agents):
            k_i, hid_i, w_i = bf.belief_step(
                nets, Tensor(hidden[i]), Tensor(weights[i]), Tensor(acts[i]), Tensor(obs[i]),
                beta=0.5,
            )
            np.testing.assert_allclose(kappa_b.data[i], k_i.data, atol=1e-12)
            np.testing.assert_allclose(hid_b.data[i], hid_i.data, atol=1e-12)
            np.testing.assert_allclose(w_b.data[i], w_i.data, atol=1e-12)
