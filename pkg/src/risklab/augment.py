"""Cumulative-reward augmentation, reward discretization and policy adaptation.

An augmented state is ``(s, y)`` where ``y`` is the lattice index of the reward
collected so far. Policies over augmented states are dense arrays
``probs[t-1, s, y, a]``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError
from .mdp import (
    LATTICE_TOL,
    ORACLE_CAP,
    History,
    HistoryPolicy,
    TabularMdp,
    lattice_steps,
    round_up_index,
    walk_histories,
)


@dataclass(frozen=True, eq=False)
class AugmentedMdp:
    """Augmented view of ``base`` whose rewards already sit on the ``eta`` lattice.

    Transitions are implicit: ``(s, y) --a--> (s', y + i)`` with probability
    ``P(s'|s,a) * R(s,a)[i]``; the terminal payoff is ``y * eta``.
    """

    base: TabularMdp

    @property
    def eta(self) -> float:
        return self.base.eta

    @property
    def horizon(self) -> int:
        return self.base.horizon

    @property
    def n_states(self) -> int:
        return self.base.n_states

    @property
    def n_actions(self) -> int:
        return self.base.n_actions

    @property
    def y_levels(self) -> int:
        return self.base.return_levels

    @property
    def n_augmented_states(self) -> int:
        return self.n_states * self.y_levels

    def kernel(self, s: int, y: int, a: int) -> list[tuple[int, int, float]]:
        """Successors ``(s', y', prob)`` of augmented state ``(s, y)`` under action ``a``."""
        out = []
        for i in np.flatnonzero(self.base.reward_pmf[s, a] > 0):
            for s2 in np.flatnonzero(self.base.trans[s, a] > 0):
                out.append((int(s2), y + int(i), float(self.base.trans[s, a, s2] * self.base.reward_pmf[s, a, i])))
        return out

    def reachable(self) -> list[list[tuple[int, int]]]:
        """Cells ``(s, y)`` reachable at each step ``t = 1..T`` under some policy."""
        layers = [sorted({(int(s), 0) for s in np.flatnonzero(self.base.init > 0)})]
        for _ in range(1, self.horizon):
            nxt = set()
            for s, y in layers[-1]:
                for a in range(self.n_actions):
                    nxt.update((s2, y2) for s2, y2, _ in self.kernel(s, y, a))
            layers.append(sorted(nxt))
        return layers


@dataclass(frozen=True, eq=False)
class AugmentedPolicy:
    """``probs[t-1, s, y, a]`` for ``t = 1..T``."""

    probs: np.ndarray
    eta: float

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 4:
            raise DomainError("augmented policy table must be 4-dimensional (T, S, Y, A)")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=-1) - 1.0) > 1e-9):
            raise DomainError("every augmented policy entry must be a probability vector")
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "eta", float(self.eta))

    @property
    def horizon(self) -> int:
        return self.probs.shape[0]

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.probs.shape

    def action_probs(self, t: int, s: int, y: int) -> np.ndarray:
        return self.probs[t - 1, s, y]

    @classmethod
    def deterministic(cls, actions, n_actions: int, eta: float) -> "AugmentedPolicy":
        actions = np.asarray(actions, dtype=int)
        return cls(np.eye(n_actions)[actions], eta)

    @classmethod
    def uniform(cls, horizon: int, n_states: int, y_levels: int, n_actions: int, eta: float) -> "AugmentedPolicy":
        return cls(np.full((horizon, n_states, y_levels, n_actions), 1.0 / n_actions), eta)

    def greedy_actions(self) -> np.ndarray:
        return np.argmax(self.probs, axis=-1)

    def restrict_states(self, n_states: int) -> "AugmentedPolicy":
        """Drop trailing states, e.g. the optimism state of an optimistic model."""
        return AugmentedPolicy(self.probs[:, :n_states], self.eta)

    def to_dict(self) -> dict:
        T, S, Y, A = self.probs.shape
        return {"eta": self.eta, "T": T, "n_states": S, "y_levels": Y, "n_actions": A,
                "tables": self.probs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentedPolicy":
        return cls(np.asarray(d["tables"], dtype=float), d["eta"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def discretize_rewards(mdp: TabularMdp, eta: float) -> TabularMdp:
    """Push every reward law forward through ``r -> eta * ceil(r / eta)``."""
    if not eta > 0:
        raise DomainError(f"eta must be positive, got {eta!r}")
    levels = lattice_steps(1.0, eta) + 1
    pmf = np.zeros(mdp.reward_pmf.shape[:2] + (levels,))
    for i in range(mdp.n_reward_levels):
        j = round_up_index(i * mdp.eta, eta)
        pmf[:, :, j] += mdp.reward_pmf[:, :, i]
    return TabularMdp(mdp.init, mdp.trans, pmf, mdp.horizon, eta)


def build_augmented(mdp: TabularMdp, eta: float | None = None) -> AugmentedMdp:
    """Discretize rewards to ``eta`` (default: the MDP's own lattice) and augment."""
    eta = mdp.eta if eta is None else float(eta)
    if not eta > 0:
        raise DomainError(f"eta must be positive, got {eta!r}")
    lattice_steps(mdp.horizon, eta)
    return AugmentedMdp(discretize_rewards(mdp, eta))


@dataclass(frozen=True, eq=False)
class AdaptedPolicy:
    """Run an augmented policy on the original MDP.

    Each observed reward is rounded up to the ``eta`` lattice and added to an
    internal cumulative index. The index is recomputed from the history on every
    call, so one instance can be shared across rollouts.
    """

    policy: AugmentedPolicy
    eta: float

    def internal_y(self, history: History) -> int:
        y = 0
        for r in history.rewards:
            if not (-LATTICE_TOL <= r <= 1 + LATTICE_TOL):
                raise ContractError(f"observed reward {r!r} outside [0, 1]")
            y += round_up_index(max(r, 0.0), self.eta)
        return y

    def __call__(self, t: int, history: History) -> np.ndarray:
        y = self.internal_y(history)
        if y >= self.policy.probs.shape[2]:
            raise ContractError(f"cumulative index {y} beyond the policy's y-lattice")
        return self.policy.probs[t - 1, history.state, y]


def adapt_policy(aug_policy: AugmentedPolicy, eta: float | None = None) -> AdaptedPolicy:
    return AdaptedPolicy(aug_policy, aug_policy.eta if eta is None else float(eta))


def build_tilde_policy(mdp: TabularMdp, policy: HistoryPolicy, cap: int = ORACLE_CAP) -> AugmentedPolicy:
    """Average a history policy over all histories sharing ``(t, s, y)``.

    The weights are the history probabilities under ``policy`` itself, with
    exact equality on the lattice cumulative reward. Unreachable cells get the
    uniform distribution.
    """
    T, S, A, Y = mdp.horizon, mdp.n_states, mdp.n_actions, mdp.return_levels
    num = np.zeros((T, S, Y, A))
    den = np.zeros((T, S, Y))

    def visit(t, hist, prob, y, p):
        num[t - 1, hist.state, y] += prob * p
        den[t - 1, hist.state, y] += prob

    walk_histories(mdp, policy, visit=visit, cap=cap)
    probs = np.full((T, S, Y, A), 1.0 / A)
    seen = den > 0
    probs[seen] = num[seen] / den[seen][:, None]
    probs[seen] /= probs[seen].sum(axis=-1, keepdims=True)
    return AugmentedPolicy(probs, mdp.eta)
