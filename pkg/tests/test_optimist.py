import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from risklab.augment import AugmentedMdp, AugmentedPolicy, adapt_policy, build_augmented
from risklab.envs import mdp_catalogue
from risklab.errors import ContractError, DomainError
from risklab.mdp import Episode, TabularMdp, make_rng, rollout
from risklab.optimist import (
    CountsModel,
    EmpiricalModel,
    confidence_widths,
    empirical_model,
    optimistic_model,
    shift_reward_pmf,
    update_counts,
)
from risklab.planner import evaluate_policy_distribution, state_action_occupancy
from risklab.riskdist import make_weighting, phi_quantile

CATALOGUE = mdp_catalogue()


def sampled_counts(mdp, episodes, seed):
    pol = adapt_policy(AugmentedPolicy.uniform(mdp.horizon, mdp.n_states, mdp.return_levels,
                                               mdp.n_actions, mdp.eta))
    c = CountsModel.empty(mdp.n_states, mdp.n_actions, mdp.horizon, mdp.eta)
    for k in range(episodes):
        c = update_counts(c, rollout(mdp, pol, make_rng(seed, stream=k)))
    return c


def two_state_model(p_row, reward_pmf):
    trans = np.array([[p_row], [[0.0, 1.0]]])
    rew = np.array([[reward_pmf], [[1.0, 0.0]]])
    return EmpiricalModel(TabularMdp([1.0, 0.0], trans, rew, 1, 1.0), np.array([[True], [True]]))


class TestCounts:
    EP = Episode((0, 1, 1), (0, 1), (1, 0), 1.0)

    def test_one_episode_mass(self):
        c = update_counts(CountsModel.empty(2, 2, 2, 1.0), self.EP)
        assert c.n_sa.sum() == 2 and c.reward_hist.sum() == 2 and c.episodes == 1

    def test_twice_doubles(self):
        c1 = update_counts(CountsModel.empty(2, 2, 2, 1.0), self.EP)
        c2 = update_counts(c1, self.EP)
        assert np.array_equal(c2.n_sas, 2 * c1.n_sas)
        assert np.array_equal(c2.reward_hist, 2 * c1.reward_hist)

    def test_order_invariant(self):
        mdp = CATALOGUE["drift"]
        eps = [rollout(mdp, lambda t, h: np.array([0.5, 0.5]), s) for s in range(8)]
        a = b = CountsModel.empty(3, 2, 3, mdp.eta)
        for e in eps:
            a = update_counts(a, e)
        for e in reversed(eps):
            b = update_counts(b, e)
        assert np.array_equal(a.n_sas, b.n_sas) and np.array_equal(a.reward_hist, b.reward_hist)

    def test_invariant_totals(self):
        c = sampled_counts(CATALOGUE["drift"], 20, 0)
        assert np.array_equal(c.n_sa, c.reward_hist.sum(axis=2))

    def test_shape_mismatch(self):
        with pytest.raises(ContractError):
            update_counts(CountsModel.empty(2, 2, 3, 1.0), self.EP)
        with pytest.raises(ContractError):
            update_counts(CountsModel.empty(1, 2, 2, 1.0), self.EP)

    def test_json_roundtrip(self):
        c = sampled_counts(CATALOGUE["fork"], 5, 1)
        back = CountsModel.from_dict(json.loads(c.to_json()))
        assert np.array_equal(back.n_sas, c.n_sas) and back.episodes == 5


class TestWidths:
    def test_reference_values(self):
        n = np.zeros((4, 2, 4), dtype=np.int64)
        n[..., 0] = 8
        c = CountsModel(n, np.zeros((4, 2, 2), dtype=np.int64), 1, 1.0)
        eps_p, eps_r = confidence_widths(c, 10, 0.1)
        assert eps_r[0, 0] == pytest.approx(math.sqrt(math.log(4800) / 16), rel=1e-15)
        assert eps_p[0, 0] == pytest.approx(math.sqrt(math.log(4800)), rel=1e-15)
        # the four-digit literals 0.7280 and 2.9115 are rounded; the exact values are 0.72786 and 2.91142
        assert eps_r[0, 0] == pytest.approx(0.7280, abs=3e-4)
        assert eps_p[0, 0] == pytest.approx(2.9115, abs=1e-4)

    def test_unvisited_infinite(self):
        eps_p, eps_r = confidence_widths(CountsModel.empty(2, 2, 1, 1.0), 5, 0.5)
        assert np.all(np.isinf(eps_p)) and np.all(np.isinf(eps_r))

    def test_identity_between_widths(self):
        c = sampled_counts(CATALOGUE["drift"], 30, 2)
        eps_p, eps_r = confidence_widths(c, 100, 0.05)
        seen = c.n_sa > 0
        S = c.n_states
        np.testing.assert_allclose(2 * S * eps_r[seen], math.sqrt(S) * eps_p[seen], rtol=1e-14)

    def test_shrink_with_data(self):
        n = np.zeros((1, 1, 1), dtype=np.int64)
        widths = []
        for k in (1, 100, 10**6):
            n[...] = k
            widths.append(confidence_widths(CountsModel(n.copy(), np.zeros((1, 1, 2), np.int64), 1, 1.0), 10, 0.1)[1][0, 0])
        assert widths[0] > widths[1] > widths[2] and widths[2] < 3e-3

    @pytest.mark.parametrize("delta", [0.0, 1.5])
    def test_bad_delta(self, delta):
        with pytest.raises(DomainError):
            confidence_widths(CountsModel.empty(1, 1, 1, 1.0), 1, delta)

    def test_coverage(self):
        # fixed visit counts, fresh samples each replication
        rng = make_rng(99)
        S, A, K, delta, N = 3, 2, 10, 0.1, 40
        P = rng.dirichlet(np.ones(S), size=(S, A))
        R = rng.dirichlet(np.ones(5), size=(S, A))
        ok = 0
        reps = 300
        for _ in range(reps):
            n_sas = np.stack([[rng.multinomial(N, P[s, a]) for a in range(A)] for s in range(S)])
            hist = np.stack([[rng.multinomial(N, R[s, a]) for a in range(A)] for s in range(S)])
            c = CountsModel(n_sas, hist, 1, 0.25)
            eps_p, eps_r = confidence_widths(c, K, delta)
            p_hat, r_hat = n_sas / N, hist / N
            e1 = np.abs(p_hat - P).sum(axis=2) <= eps_p
            e2 = np.abs(np.cumsum(r_hat, -1) - np.cumsum(R, -1)).max(axis=2) <= eps_r
            e3 = np.abs(p_hat - P).max(axis=2) <= eps_r
            ok += bool(np.all(e1 & e2 & e3))
        assert ok / reps >= 1 - delta


class TestEmpirical:
    def test_deterministic_transitions(self):
        n = np.zeros((2, 1, 2), dtype=np.int64)
        n[0, 0, 1] = 100
        hist = np.zeros((2, 1, 2), dtype=np.int64)
        hist[0, 0, 0] = 100
        emp = empirical_model(CountsModel(n, hist, 1, 1.0), np.array([1.0, 0.0]))
        assert emp.mdp.trans[0, 0, 1] == 1.0
        assert emp.visited.tolist() == [[True], [False]]

    def test_reward_cdf(self):
        n = np.zeros((1, 1, 1), dtype=np.int64)
        n[...] = 4
        hist = np.array([[[3, 1]]])
        emp = empirical_model(CountsModel(n, hist, 1, 1.0), np.array([1.0]))
        assert np.cumsum(emp.mdp.reward_pmf[0, 0]).tolist() == [0.75, 1.0]

    def test_unvisited_rows_uniform_zero_reward(self):
        emp = empirical_model(CountsModel.empty(3, 2, 1, 0.5), np.array([1.0, 0, 0]))
        assert np.allclose(emp.mdp.trans, 1 / 3) and np.all(emp.mdp.reward_pmf[..., 0] == 1)


class TestOptimisticModel:
    def test_transition_shift(self):
        emp = two_state_model([0.5, 0.5], [1.0, 0.0])
        opt = optimistic_model(emp, (np.zeros((2, 1)), np.array([[0.2], [0.0]])))
        np.testing.assert_allclose(opt.mdp.trans[0, 0], [0.3, 0.3, 0.4], atol=1e-15)

    def test_reward_shift(self):
        np.testing.assert_allclose(shift_reward_pmf(np.array([0.75, 0.25]), np.array(0.3)), [0.45, 0.55], atol=1e-15)

    def test_zero_width_is_empirical(self):
        emp = empirical_model(sampled_counts(CATALOGUE["drift"], 25, 3), CATALOGUE["drift"].init)
        assert emp.visited.all()
        opt = optimistic_model(emp, (np.zeros((3, 2)), np.zeros((3, 2)))).mdp
        np.testing.assert_allclose(opt.trans[:3, :, :3], emp.mdp.trans, atol=0)
        assert np.all(opt.trans[:3, :, 3] == 0) and opt.init[3] == 0
        np.testing.assert_allclose(opt.reward_pmf[:3], emp.mdp.reward_pmf, atol=1e-15)

    def test_unvisited_goes_to_optimism_state(self):
        opt = optimistic_model(empirical_model(CountsModel.empty(2, 2, 2, 0.5), np.array([1.0, 0.0])),
                               confidence_widths(CountsModel.empty(2, 2, 2, 0.5), 3, 0.1))
        assert opt.optimism_state == 2
        assert np.all(opt.mdp.trans[:, :, 2] == 1.0)
        assert np.all(opt.mdp.reward_pmf[:, :, -1] == 1.0)
        # planning on it collects the top reward every step
        assert evaluate_policy_distribution(AugmentedMdp(opt.mdp), AugmentedPolicy.uniform(
            2, 3, opt.mdp.return_levels, 2, 0.5)).grid.tolist() == [2.0]

    @settings(max_examples=40)
    @given(st.sampled_from(sorted(CATALOGUE)), st.integers(1, 25), st.integers(0, 10**6),
           st.sampled_from([0.05, 0.3, 1.0]))
    def test_invariants_and_dominance(self, name, episodes, seed, scale):
        mdp = CATALOGUE[name]
        S, A, T = mdp.n_states, mdp.n_actions, mdp.horizon
        c = sampled_counts(mdp, episodes, seed)
        emp = empirical_model(c, mdp.init)
        eps_p, eps_r = confidence_widths(c, 50, 0.1)
        opt = optimistic_model(emp, (eps_p * scale, eps_r * scale))
        m = opt.mdp
        assert np.all(m.trans[S, :, S] == 1) and np.all(m.reward_pmf[S, :, -1] == 1)
        np.testing.assert_allclose(m.trans.sum(axis=2), 1.0, atol=1e-12)
        cdf_o = np.cumsum(m.reward_pmf[:S], -1)
        cdf_e = np.cumsum(emp.mdp.reward_pmf, -1)
        seen = emp.visited
        assert np.all(cdf_o[seen] <= cdf_e[seen] + 1e-12)
        assert np.allclose(cdf_o[..., -1], 1.0)

        rng = make_rng(seed)
        Y = mdp.return_levels
        for y_dependent in (False, True):
            probs = rng.dirichlet(np.ones(A), size=(T, S + 1, Y))
            if not y_dependent:
                probs[:] = probs[:, :, :1]
            pol = AugmentedPolicy(probs, mdp.eta)
            d_opt = evaluate_policy_distribution(AugmentedMdp(m), pol)
            d_emp = evaluate_policy_distribution(AugmentedMdp(emp.mdp), pol.restrict_states(S))
            x = np.arange(Y) * mdp.eta
            assert np.all(d_opt.cdf(x) <= d_emp.cdf(x) + 1e-12)

    def test_eta_mismatch(self):
        emp = two_state_model([0.5, 0.5], [1.0, 0.0])
        with pytest.raises(ContractError):
            optimistic_model(emp, (np.zeros((2, 1)), np.zeros((2, 1))), eta=0.5)


def _event_holds(mdp, c, K, delta):
    emp = empirical_model(c, mdp.init).mdp
    eps_p, eps_r = confidence_widths(c, K, delta)
    l1 = np.abs(emp.trans - mdp.trans).sum(axis=2) <= eps_p
    sup = np.abs(emp.trans - mdp.trans).max(axis=2) <= eps_r
    rcdf = np.abs(np.cumsum(emp.reward_pmf, -1) - np.cumsum(mdp.reward_pmf, -1)).max(axis=2) <= eps_r
    return bool(np.all(l1 & sup & rcdf))


@pytest.mark.parametrize("name", ["fork", "gamble", "drift"])
def test_optimism_and_sandwich_on_event(name):
    mdp = CATALOGUE[name]
    S, A, T = mdp.n_states, mdp.n_actions, mdp.horizon
    truth = build_augmented(mdp)
    checked = 0
    for seed in range(12):
        c = sampled_counts(mdp, 40, seed)
        if not _event_holds(mdp, c, 100, 0.1):
            continue
        eps_p, eps_r = confidence_widths(c, 100, 0.1)
        opt = AugmentedMdp(optimistic_model(empirical_model(c, mdp.init), (eps_p, eps_r)).mdp)
        rng = make_rng(seed)
        for _ in range(10):
            probs = rng.dirichlet(np.ones(A), size=(T, S + 1, truth.y_levels))
            pol = AugmentedPolicy(probs, mdp.eta)
            on_truth = pol.restrict_states(S)
            occ = state_action_occupancy(truth, on_truth)
            B = float(np.sum(occ * (eps_p + eps_r)[None]))
            for alpha in (0.2, 0.5, 1.0):
                w = make_weighting("cvar", alpha)
                phi_hat = phi_quantile(evaluate_policy_distribution(opt, pol), w)
                phi = phi_quantile(evaluate_policy_distribution(truth, on_truth), w)
                assert phi_hat >= phi - 1e-9
                assert abs(phi_hat - phi) <= 2 * T * w.lipschitz * math.sqrt(S) * B + 1e-9
        checked += 1
    assert checked >= 6
