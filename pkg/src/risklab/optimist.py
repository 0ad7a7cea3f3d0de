"""Visit counts, empirical estimates, confidence widths and the optimistic model.

The optimistic model adds one absorbing state (index ``n_states``) that pays
the maximum reward 1 on every step. Transition probabilities are shifted down
by the reward width, with the deficit sent to that state, and reward CDFs are
shifted down by the same width with the freed mass placed on reward 1.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError
from .mdp import Episode, TabularMdp, lattice_steps, round_up_index


@dataclass(frozen=True, eq=False)
class CountsModel:
    """``n_sas[s, a, s']`` transition counts and ``reward_hist[s, a, i]`` on the eta lattice."""

    n_sas: np.ndarray
    reward_hist: np.ndarray
    horizon: int
    eta: float
    episodes: int = 0

    @classmethod
    def empty(cls, n_states: int, n_actions: int, horizon: int, eta: float) -> "CountsModel":
        levels = lattice_steps(1.0, eta) + 1
        return cls(np.zeros((n_states, n_actions, n_states), dtype=np.int64),
                   np.zeros((n_states, n_actions, levels), dtype=np.int64), horizon, eta)

    @property
    def n_states(self) -> int:
        return self.n_sas.shape[0]

    @property
    def n_actions(self) -> int:
        return self.n_sas.shape[1]

    @property
    def n_sa(self) -> np.ndarray:
        return self.n_sas.sum(axis=2)

    def to_dict(self) -> dict:
        return {"n_sas": self.n_sas.tolist(), "reward_hist": self.reward_hist.tolist(),
                "T": self.horizon, "eta": self.eta, "episodes": self.episodes}

    @classmethod
    def from_dict(cls, d: dict) -> "CountsModel":
        return cls(np.asarray(d["n_sas"], dtype=np.int64), np.asarray(d["reward_hist"], dtype=np.int64),
                   d["T"], d["eta"], d["episodes"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def update_counts(counts: CountsModel, episode: Episode) -> CountsModel:
    """Return new counts with every step of ``episode`` added."""
    if episode.horizon != counts.horizon:
        raise ContractError(f"episode length {episode.horizon} != horizon {counts.horizon}")
    S, A = counts.n_states, counts.n_actions
    n_sas = counts.n_sas.copy()
    hist = counts.reward_hist.copy()
    for t in range(episode.horizon):
        s, a, s2 = episode.states[t], episode.actions[t], episode.states[t + 1]
        if not (0 <= s < S and 0 <= s2 < S and 0 <= a < A):
            raise ContractError(f"episode step {(s, a, s2)} outside the counts' shape {(S, A)}")
        n_sas[s, a, s2] += 1
        hist[s, a, round_up_index(episode.reward_index[t] * episode.eta, counts.eta)] += 1
    return CountsModel(n_sas, hist, counts.horizon, counts.eta, counts.episodes + 1)


def confidence_widths(counts: CountsModel, K: int, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """``(eps_P, eps_R)`` per state-action pair; infinite where nothing was observed.

    With ``L = log(6 |S| |A| K / delta)``: ``eps_P = sqrt(2 |S| L / N)`` bounds the
    L1 transition error and ``eps_R = sqrt(L / (2 N))`` the sup-norm CDF error.
    """
    if not (0.0 < delta <= 1.0):
        raise DomainError(f"delta must lie in (0, 1], got {delta!r}")
    if K < 1:
        raise DomainError(f"K must be at least 1, got {K!r}")
    S, A = counts.n_states, counts.n_actions
    L = math.log(6 * S * A * K / delta)
    n = counts.n_sa.astype(float)
    with np.errstate(divide="ignore"):
        eps_p = np.where(n > 0, np.sqrt(2 * S * L / np.where(n > 0, n, 1.0)), np.inf)
        eps_r = np.where(n > 0, np.sqrt(L / (2 * np.where(n > 0, n, 1.0))), np.inf)
    return eps_p, eps_r


@dataclass(frozen=True, eq=False)
class EmpiricalModel:
    """Empirical MDP plus the mask of pairs with data.

    Unvisited rows of ``mdp`` hold uniform transitions and zero reward so the
    model is usable on its own (the greedy baseline plans on it directly).
    """

    mdp: TabularMdp
    visited: np.ndarray


def empirical_model(counts: CountsModel, init: np.ndarray) -> EmpiricalModel:
    S, A = counts.n_states, counts.n_actions
    n = counts.n_sa
    visited = n > 0
    safe_n = np.where(visited, n, 1)[:, :, None]
    trans = np.where(visited[:, :, None], counts.n_sas / safe_n, 1.0 / S)
    rew = counts.reward_hist / safe_n
    rew[~visited] = 0.0
    rew[~visited, 0] = 1.0
    return EmpiricalModel(TabularMdp(init, trans, rew, counts.horizon, counts.eta), visited)


@dataclass(frozen=True, eq=False)
class OptimisticModel:
    mdp: TabularMdp          # n_states + 1 states; the last one is the optimism state
    eps_p: np.ndarray
    eps_r: np.ndarray

    @property
    def optimism_state(self) -> int:
        return self.mdp.n_states - 1


def shift_reward_pmf(pmf: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Shift lattice CDFs down by ``eps`` (clamped at 0) keeping ``F(1) = 1``."""
    cdf = np.cumsum(pmf, axis=-1)
    shifted = np.maximum(cdf - np.asarray(eps)[..., None], 0.0)
    shifted[..., -1] = 1.0
    out = np.diff(shifted, prepend=0.0, axis=-1)
    return np.maximum(out, 0.0)


def optimistic_model(empirical: EmpiricalModel, widths: tuple[np.ndarray, np.ndarray],
                     eta: float | None = None) -> OptimisticModel:
    """Build the optimistic MDP from empirical estimates and ``(eps_P, eps_R)``."""
    base = empirical.mdp
    eps_p, eps_r = (np.asarray(w, dtype=float) for w in widths)
    S, A = base.n_states, base.n_actions
    if eps_r.shape != (S, A) or eps_p.shape != (S, A):
        raise ContractError(f"widths must have shape {(S, A)}")
    if eta is not None and abs(eta - base.eta) > 1e-12:
        raise ContractError(f"eta {eta} differs from the empirical lattice {base.eta}")
    # unvisited pairs: everything goes to the optimism state
    eps = np.where(empirical.visited, eps_r, np.inf)
    p_tilde = np.where(empirical.visited[:, :, None], base.trans, 0.0)
    r_tilde = np.where(empirical.visited[:, :, None], base.reward_pmf, 0.0)

    trans = np.zeros((S + 1, A, S + 1))
    trans[:S, :, :S] = np.maximum(p_tilde - eps[:, :, None], 0.0)
    trans[:S, :, S] = np.maximum(1.0 - trans[:S, :, :S].sum(axis=2), 0.0)
    trans[S, :, S] = 1.0

    levels = base.n_reward_levels
    rew = np.zeros((S + 1, A, levels))
    rew[:S] = shift_reward_pmf(r_tilde, eps)
    rew[S, :, -1] = 1.0

    init = np.append(base.init, 0.0)
    return OptimisticModel(TabularMdp(init, trans, rew, base.horizon, base.eta), eps_p, eps_r)
