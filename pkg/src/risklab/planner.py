"""Exact evaluation and planning on augmented MDPs.

* :func:`evaluate_policy_distribution` runs the distributional Bellman
  recursion backwards over return-to-go laws on the lattice.
* :func:`plan_cvar` maximizes CVaR through the representation
  ``CVaR_a(Z) = max_rho { rho + E[min(Z - rho, 0)] / a }``: one scalar
  expected-utility value iteration per lattice threshold ``rho``.
* :func:`plan_bruteforce` enumerates deterministic policies over reachable
  augmented cells and is the reference for any weighting.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .augment import AugmentedMdp, AugmentedPolicy
from .errors import ContractError, DomainError, OracleTooLargeError
from .riskdist import DiscreteDistribution, WeightingFunction, cvar_weighting, phi_quantile, quantile

TIE_TOL = 1e-12
BRUTEFORCE_CAP = 10**6


def _check_policy(aug: AugmentedMdp, policy: AugmentedPolicy) -> np.ndarray:
    want = (aug.horizon, aug.n_states, aug.y_levels, aug.n_actions)
    if policy.probs.shape != want:
        raise ContractError(f"policy shape {policy.probs.shape} does not match augmented model {want}")
    if abs(policy.eta - aug.eta) > 1e-12:
        raise ContractError(f"policy lattice {policy.eta} differs from model lattice {aug.eta}")
    return policy.probs


@dataclass(frozen=True, eq=False)
class ReturnTable:
    """``pmf[t-1, s, y, w]``: law of the return-to-go from step ``t`` at ``(s, y)``.

    Index ``t = T + 1`` holds the point mass at zero. Cells that no policy can
    reach may carry truncated (sub-stochastic) rows; they never feed a reachable one.
    """

    pmf: np.ndarray
    eta: float

    def distribution(self, t: int, s: int, y: int) -> DiscreteDistribution:
        return DiscreteDistribution.from_lattice(self.pmf[t - 1, s, y], self.eta)


def _return_pmf(aug: AugmentedMdp, probs: np.ndarray, reachable_only: bool) -> np.ndarray:
    """Backward recursion over return-to-go laws ``Z[t, s, y, w]``.

    Rewards per step are at most ``1/eta`` lattice steps, so before step ``t+1``
    at most ``t/eta`` has been collected and at most ``(T-t)/eta`` remains.
    With ``reachable_only`` rows beyond the first bound are skipped.
    """
    T, S, A, Y = aug.horizon, aug.n_states, aug.n_actions, aug.y_levels
    P = aug.base.trans.reshape(S * A, S)
    R = aug.base.reward_pmf
    top = R.shape[2] - 1
    levels = [i for i in range(R.shape[2]) if np.any(R[:, :, i] > 0)]
    Z = np.zeros((T + 1, S, Y, Y))
    Z[T, :, :, 0] = 1.0
    for t in range(T - 1, -1, -1):
        yn = min(t * top, Y - 1) + 1 if reachable_only else Y
        wn = min((T - t - 1) * top, Y - 1) + 1   # support of Z[t + 1] in w
        Q = np.zeros((S, A, yn, Y))
        for i in levels:
            shifted = np.zeros((S, yn, Y))
            ys = np.minimum(np.arange(yn) + i, Y - 1)
            shifted[:, :, i:i + wn] = Z[t + 1][:, ys, :wn][:, :, : Y - i]
            Q += (P @ shifted.reshape(S, yn * Y)).reshape(S, A, yn, Y) * R[:, :, i, None, None]
        Z[t, :, :yn] = np.einsum("sya,sayw->syw", probs[t, :, :yn], Q)
    return Z


def return_table(aug: AugmentedMdp, policy: AugmentedPolicy) -> ReturnTable:
    probs = _check_policy(aug, policy)
    return ReturnTable(_return_pmf(aug, probs, reachable_only=False), aug.eta)


def evaluate_policy_distribution(aug: AugmentedMdp, policy: AugmentedPolicy) -> DiscreteDistribution:
    """Exact law of the episode return, averaged over the initial distribution."""
    Z = _return_pmf(aug, _check_policy(aug, policy), reachable_only=True)
    return DiscreteDistribution.from_lattice(aug.base.init @ Z[0, :, 0, :], aug.eta)


def occupancy(aug: AugmentedMdp, policy: AugmentedPolicy) -> np.ndarray:
    """Forward state-distribution ``mu[t-1, s, y]`` for ``t = 1..T+1``."""
    probs = _check_policy(aug, policy)
    T, S, A, Y = aug.horizon, aug.n_states, aug.n_actions, aug.y_levels
    PT = aug.base.trans.reshape(S * A, S).T
    R = aug.base.reward_pmf
    mu = np.zeros((T + 1, S, Y))
    mu[0, :, 0] = aug.base.init
    for t in range(T):
        m = mu[t][:, :, None] * probs[t]  # (S, Y, A)
        for i in range(R.shape[2]):
            w = m * R[:, None, :, i]
            if not w.any():
                continue
            flow = PT @ w.transpose(0, 2, 1).reshape(S * A, Y)
            mu[t + 1, :, i:] += flow[:, : Y - i]
    return mu


def state_action_occupancy(aug: AugmentedMdp, policy: AugmentedPolicy) -> np.ndarray:
    """Expected visits ``d[t-1, s, a]``, marginalized over the cumulative index."""
    mu = occupancy(aug, policy)
    return np.einsum("tsy,tsya->tsa", mu[:-1], policy.probs)


# ---------------------------------------------------------------------------
# planners


@dataclass(frozen=True, eq=False)
class CvarPlanResult:
    policy: AugmentedPolicy
    rho_star: float
    value: float
    alpha: float
    eta: float
    rho_objective: np.ndarray = field(repr=False, default=None)
    var_alpha: float | None = None

    def to_dict(self) -> dict:
        return {"policy": self.policy.to_dict(), "rho_star": self.rho_star, "value": self.value,
                "alpha": self.alpha, "eta": self.eta}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _backward_utility(aug: AugmentedMdp, terminal: np.ndarray):
    """Scalar value iteration for a batch of terminal utilities ``terminal[b, y]``.

    Returns ``(V1[b, s, y], actions[t-1, b, s, y])``; ties go to the lowest action.
    """
    T, S, A, Y = aug.horizon, aug.n_states, aug.n_actions, aug.y_levels
    B = terminal.shape[0]
    P = aug.base.trans.reshape(S * A, S)
    R = aug.base.reward_pmf
    top = R.shape[2] - 1
    levels = [i for i in range(R.shape[2]) if np.any(R[:, :, i] > 0)]
    V = np.broadcast_to(terminal[:, None, :], (B, S, Y)).copy()
    actions = np.zeros((T, B, S, Y), dtype=np.int64)
    for t in range(T - 1, -1, -1):
        # only y <= t/eta can be occupied before step t+1; higher rows keep action 0
        yn = min(t * top, Y - 1) + 1
        ys = np.arange(yn)
        Q = np.zeros((S, A, B, yn))
        for i in levels:
            Vi = V[:, :, np.minimum(ys + i, Y - 1)].transpose(1, 0, 2).reshape(S, B * yn)
            Q += (P @ Vi).reshape(S, A, B, yn) * R[:, :, i, None, None]
        best = Q.max(axis=1)
        actions[t, :, :, :yn] = np.argmax(Q >= best[:, None] - TIE_TOL, axis=1).transpose(1, 0, 2)
        V = np.zeros((B, S, Y))
        V[:, :, :yn] = best.transpose(1, 0, 2)
    return V, actions


def plan_cvar(aug: AugmentedMdp, alpha: float) -> CvarPlanResult:
    """CVaR-optimal deterministic policy over augmented states (reward maximization)."""
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha!r}")
    Y, eta = aug.y_levels, aug.eta
    rho_idx = np.arange(Y)
    terminal = np.minimum(np.arange(Y)[None, :] - rho_idx[:, None], 0) * eta
    V1, actions = _backward_utility(aug, terminal)
    J = rho_idx * eta + (V1[:, :, 0] @ aug.base.init) / alpha
    best = int(np.argmax(J >= J.max() - TIE_TOL))
    policy = AugmentedPolicy.deterministic(actions[:, best], aug.n_actions, eta)
    dist = evaluate_policy_distribution(aug, policy)
    return CvarPlanResult(policy=policy, rho_star=best * eta, value=phi_quantile(dist, cvar_weighting(alpha)),
                          alpha=float(alpha), eta=eta, rho_objective=J, var_alpha=quantile(dist, alpha))


def plan_expected(aug: AugmentedMdp) -> tuple[AugmentedPolicy, float]:
    """Maximize the expected return (terminal utility ``y * eta``)."""
    terminal = (np.arange(aug.y_levels) * aug.eta)[None, :]
    V1, actions = _backward_utility(aug, terminal)
    policy = AugmentedPolicy.deterministic(actions[:, 0], aug.n_actions, aug.eta)
    return policy, float(aug.base.init @ V1[0, :, 0])


def plan_optimal(aug: AugmentedMdp, weighting: WeightingFunction) -> tuple[AugmentedPolicy, float]:
    """Dispatch to the exact planner for CVaR or expectation weightings."""
    if weighting.kind == "cvar":
        res = plan_cvar(aug, weighting.alpha)
        return res.policy, res.value
    if weighting.kind == "expectation":
        policy, _ = plan_expected(aug)
        return policy, phi_quantile(evaluate_policy_distribution(aug, policy), weighting)
    raise DomainError(f"no exact planner for weighting kind {weighting.kind!r}; use plan_bruteforce")


def plan_bruteforce(aug: AugmentedMdp, weighting: WeightingFunction,
                    cap: int = BRUTEFORCE_CAP) -> tuple[AugmentedPolicy, float]:
    """Best deterministic augmented-Markov policy by exhaustive search.

    Choices are only enumerated at cells reachable under the choices already
    made at earlier steps, so policies that differ only off-path are counted
    once. Enumeration order is lexicographic in (step, sorted cell) and the
    first maximizer wins.
    """
    T, A, Y = aug.horizon, aug.n_actions, aug.y_levels
    kern: dict[tuple[int, int, int], list] = {}

    def succ(s, y, a):
        key = (s, y, a)
        if key not in kern:
            kern[key] = aug.kernel(s, y, a)
        return kern[key]

    best = {"value": -np.inf, "choices": None}
    n_leaves = 0

    def rec(t: int, mass: dict, choices: list):
        nonlocal n_leaves
        if t > T:
            n_leaves += 1
            if n_leaves > cap:
                raise OracleTooLargeError(f"more than {cap} deterministic policies to enumerate")
            pmf = np.zeros(Y)
            for (_, y), m in mass.items():
                pmf[y] += m
            v = phi_quantile(DiscreteDistribution.from_lattice(pmf, aug.eta), weighting)
            if v > best["value"] + TIE_TOL:
                best["value"], best["choices"] = v, list(choices)
            return
        cells = sorted(mass)
        for combo in itertools.product(range(A), repeat=len(cells)):
            nxt: dict = {}
            for (s, y), a in zip(cells, combo):
                m = mass[(s, y)]
                for s2, y2, p in succ(s, y, a):
                    nxt[(s2, y2)] = nxt.get((s2, y2), 0.0) + m * p
            choices.append((t, cells, combo))
            rec(t + 1, nxt, choices)
            choices.pop()

    init = {(int(s), 0): float(aug.base.init[s]) for s in np.flatnonzero(aug.base.init > 0)}
    rec(1, init, [])
    actions = np.zeros((T, aug.n_states, Y), dtype=np.int64)
    for t, cells, combo in best["choices"]:
        for (s, y), a in zip(cells, combo):
            actions[t - 1, s, y] = a
    policy = AugmentedPolicy.deterministic(actions, A, aug.eta)
    return policy, phi_quantile(evaluate_policy_distribution(aug, policy), weighting)
