"""Tabular finite-horizon MDPs, episode simulation and an enumeration oracle.

Rewards live on a lattice ``{0, eta, 2 eta, ..., 1}`` and are stored as
probability tables over lattice indices, so cumulative rewards are exact
integers and never drift.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

from .errors import ContractError, DomainError, OracleTooLargeError
from .riskdist import DiscreteDistribution

PROB_TOL = 1e-12
LATTICE_TOL = 1e-9
ORACLE_CAP = 10**7


def lattice_steps(length: float, eta: float) -> int:
    """Integer ``length / eta``; raises unless the ratio is integral."""
    if not eta > 0:
        raise DomainError(f"lattice step must be positive, got {eta!r}")
    ratio = length / eta
    n = int(round(ratio))
    if abs(ratio - n) > LATTICE_TOL * max(1.0, abs(ratio)):
        raise DomainError(f"{length!r} is not an integer multiple of eta={eta!r}")
    return n


def lattice_index(value: float, eta: float) -> int:
    """Index of a value that must already sit on the lattice."""
    return lattice_steps(value, eta) if value != 0 else 0


def round_up_index(value: float, eta: float) -> int:
    """Index of ``eta * ceil(value / eta)``, tolerant to float noise at lattice points."""
    ratio = value / eta
    n = round(ratio)
    if abs(ratio - n) <= LATTICE_TOL * max(1.0, abs(ratio)):
        return int(n)
    return int(math.ceil(ratio))


def make_rng(seed, stream: int | None = None) -> np.random.Generator:
    """Counter-based generator; ``stream`` selects an independent substream of ``seed``."""
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    elif stream is None:
        ss = np.random.SeedSequence(int(seed))
    else:
        ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """``init[s]``, ``trans[s, a, s']`` and ``reward_pmf[s, a, i]`` (reward ``i * eta``)."""

    init: np.ndarray
    trans: np.ndarray
    reward_pmf: np.ndarray
    horizon: int
    eta: float

    def __post_init__(self):
        init = np.array(self.init, dtype=float)
        trans = np.array(self.trans, dtype=float)
        rew = np.array(self.reward_pmf, dtype=float)
        if trans.ndim != 3 or trans.shape[0] != trans.shape[2]:
            raise DomainError(f"trans must have shape (S, A, S), got {trans.shape}")
        S, A, _ = trans.shape
        levels = lattice_steps(1.0, self.eta) + 1
        if init.shape != (S,):
            raise DomainError("init must have one entry per state")
        if rew.shape != (S, A, levels):
            raise DomainError(f"reward_pmf must have shape {(S, A, levels)}, got {rew.shape}")
        if int(self.horizon) < 1:
            raise DomainError("horizon must be at least 1")
        for name, arr in (("init", init), ("trans", trans), ("reward_pmf", rew)):
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} has negative or non-finite entries")
            if np.any(np.abs(arr.sum(axis=-1) - 1.0) > PROB_TOL):
                raise DomainError(f"{name} rows must sum to 1")
        for arr in (init, trans, rew):
            arr.flags.writeable = False
        object.__setattr__(self, "init", init)
        object.__setattr__(self, "trans", trans)
        object.__setattr__(self, "reward_pmf", rew)
        object.__setattr__(self, "horizon", int(self.horizon))
        object.__setattr__(self, "eta", float(self.eta))

    @property
    def n_states(self) -> int:
        return self.trans.shape[0]

    @property
    def n_actions(self) -> int:
        return self.trans.shape[1]

    @property
    def n_reward_levels(self) -> int:
        return self.reward_pmf.shape[2]

    @property
    def return_levels(self) -> int:
        """Number of lattice points in ``[0, T]``."""
        return self.horizon * (self.n_reward_levels - 1) + 1

    def reward_distribution(self, s: int, a: int) -> DiscreteDistribution:
        return DiscreteDistribution.from_lattice(self.reward_pmf[s, a], self.eta)

    @classmethod
    def from_values(cls, init, trans, rewards, horizon: int, eta: float) -> "TabularMdp":
        """Build from ``rewards[s][a] = {value: prob}``; every value must be on the lattice."""
        trans = np.asarray(trans, dtype=float)
        S, A, _ = trans.shape
        levels = lattice_steps(1.0, eta) + 1
        pmf = np.zeros((S, A, levels))
        for s in range(S):
            for a in range(A):
                for v, p in dict(rewards[s][a]).items():
                    if not (-LATTICE_TOL <= v <= 1 + LATTICE_TOL):
                        raise DomainError(f"reward {v!r} outside [0, 1]")
                    pmf[s, a, lattice_index(v, eta)] += p
        return cls(init, trans, pmf, horizon, eta)

    def same_as(self, other: "TabularMdp", tol: float = 0.0) -> bool:
        return (self.horizon == other.horizon and math.isclose(self.eta, other.eta)
                and self.trans.shape == other.trans.shape
                and self.reward_pmf.shape == other.reward_pmf.shape
                and np.allclose(self.init, other.init, rtol=0, atol=tol)
                and np.allclose(self.trans, other.trans, rtol=0, atol=tol)
                and np.allclose(self.reward_pmf, other.reward_pmf, rtol=0, atol=tol))

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "T": self.horizon,
            "eta": self.eta,
            "init": self.init.tolist(),
            "trans": self.trans.tolist(),
            "rewards": self.reward_pmf.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TabularMdp":
        mdp = cls(d["init"], d["trans"], d["rewards"], d["T"], d["eta"])
        if (mdp.n_states, mdp.n_actions) != (d["n_states"], d["n_actions"]):
            raise DomainError("n_states/n_actions disagree with the tables")
        return mdp

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "TabularMdp":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class History:
    """``xi_t = ((s_1, a_1, r_1), ..., (s_{t-1}, a_{t-1}, r_{t-1}), s_t)``."""

    states: tuple[int, ...]
    actions: tuple[int, ...] = ()
    rewards: tuple[float, ...] = ()

    @property
    def t(self) -> int:
        return len(self.states)

    @property
    def state(self) -> int:
        return self.states[-1]

    def extend(self, a: int, r: float, s_next: int) -> "History":
        return History(self.states + (s_next,), self.actions + (a,), self.rewards + (r,))


class HistoryPolicy(Protocol):
    def __call__(self, t: int, history: History) -> np.ndarray: ...


def markov_policy(table) -> Callable[[int, History], np.ndarray]:
    """History policy reading ``table[t-1, s]`` (action probabilities)."""
    table = np.asarray(table, dtype=float)

    def policy(t: int, history: History) -> np.ndarray:
        return table[t - 1, history.state]

    return policy


def check_action_probs(p, n_actions: int) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (n_actions,) or np.any(p < -PROB_TOL) or abs(p.sum() - 1.0) > 1e-9:
        raise ContractError(f"policy returned an invalid action distribution: {p!r}")
    return p


@dataclass(frozen=True)
class Episode:
    states: tuple[int, ...]       # length T + 1
    actions: tuple[int, ...]      # length T
    reward_index: tuple[int, ...]  # lattice indices, length T
    eta: float
    seed: object = None

    @property
    def horizon(self) -> int:
        return len(self.actions)

    @property
    def rewards(self) -> np.ndarray:
        return np.asarray(self.reward_index, dtype=float) * self.eta

    @property
    def total_reward(self) -> float:
        return sum(self.reward_index) * self.eta

    def prefix(self, t: int) -> History:
        return History(self.states[:t], self.actions[: t - 1],
                       tuple(i * self.eta for i in self.reward_index[: t - 1]))


def _sample(cum: np.ndarray, rng: np.random.Generator) -> int:
    return int(min(np.searchsorted(cum, rng.random() * cum[-1], side="right"), cum.size - 1))


def rollout(mdp: TabularMdp, policy: HistoryPolicy, rng_seed) -> Episode:
    """Sample one episode: ``s_1 ~ D``, ``a_t ~ pi_t``, ``r_t ~ R(s_t, a_t)``, ``s_{t+1} ~ P``."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else make_rng(rng_seed)
    s = _sample(np.cumsum(mdp.init), rng)
    hist = History((s,))
    rew_idx = []
    for t in range(1, mdp.horizon + 1):
        p = check_action_probs(policy(t, hist), mdp.n_actions)
        a = _sample(np.cumsum(np.clip(p, 0, None)), rng)
        i = _sample(np.cumsum(mdp.reward_pmf[s, a]), rng)
        s_next = _sample(np.cumsum(mdp.trans[s, a]), rng)
        rew_idx.append(i)
        hist = hist.extend(a, i * mdp.eta, s_next)
        s = s_next
    return Episode(hist.states, hist.actions, tuple(rew_idx), mdp.eta,
                   None if isinstance(rng_seed, np.random.Generator) else rng_seed)


def walk_histories(mdp: TabularMdp, policy: HistoryPolicy, visit=None, cap: int = ORACLE_CAP) -> dict[int, float]:
    """Depth-first enumeration of every positive-probability trajectory.

    ``visit(t, history, prob, reward_index_sum, action_probs)`` is called at each
    decision point. Returns the leaf mass keyed by total reward lattice index.
    Raises :class:`OracleTooLargeError` once more than ``cap`` leaves appear.
    """
    leaves: dict[int, float] = {}
    n_leaves = 0
    T, A = mdp.horizon, mdp.n_actions
    eta = mdp.eta
    support = [[(np.flatnonzero(mdp.reward_pmf[s, a] > 0), np.flatnonzero(mdp.trans[s, a] > 0))
                for a in range(A)] for s in range(mdp.n_states)]

    def rec(hist: History, prob: float, y: int):
        nonlocal n_leaves
        t = hist.t
        if t > T:
            n_leaves += 1
            if n_leaves > cap:
                raise OracleTooLargeError(f"trajectory enumeration exceeds cap={cap}")
            leaves[y] = leaves.get(y, 0.0) + prob
            return
        s = hist.state
        p = check_action_probs(policy(t, hist), A)
        if visit is not None:
            visit(t, hist, prob, y, p)
        for a in np.flatnonzero(p > 0):
            a = int(a)
            r_idx, s_idx = support[s][a]
            for i in r_idx:
                pr = prob * p[a] * mdp.reward_pmf[s, a, i]
                for s2 in s_idx:
                    rec(hist.extend(a, int(i) * eta, int(s2)), pr * mdp.trans[s, a, s2], y + int(i))

    for s0 in np.flatnonzero(mdp.init > 0):
        rec(History((int(s0),)), float(mdp.init[s0]), 0)
    return leaves


def exact_return_distribution(mdp: TabularMdp, policy: HistoryPolicy, cap: int = ORACLE_CAP) -> DiscreteDistribution:
    """Exact law of ``sum_t r_t`` by enumerating all trajectories (oracle)."""
    leaves = walk_histories(mdp, policy, cap=cap)
    pmf = np.zeros(mdp.return_levels)
    for y, p in leaves.items():
        pmf[y] += p
    return DiscreteDistribution.from_lattice(pmf, mdp.eta)
