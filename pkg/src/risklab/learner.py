"""Episodic optimistic learning loop with exact regret bookkeeping."""
from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .augment import AugmentedMdp, AugmentedPolicy, adapt_policy, build_augmented
from .errors import DomainError
from .mdp import LATTICE_TOL, TabularMdp, lattice_steps, make_rng, rollout
from .optimist import CountsModel, confidence_widths, empirical_model, optimistic_model, update_counts
from .planner import evaluate_policy_distribution, plan_optimal
from .riskdist import WeightingFunction, make_weighting, phi_quantile

MODES = ("ucb", "greedy", "expected-ucb")
CSV_COLUMNS = ("k", "phi_true", "phi_opt", "regret_k", "regret_cum")


@dataclass(frozen=True)
class LearnerConfig:
    episodes: int
    weighting: WeightingFunction
    delta: float = 0.1
    eta: float | None = None
    mode: str = "ucb"
    seed: int = 0
    width_scale: float = 1.0

    def __post_init__(self):
        if self.episodes < 1:
            raise DomainError("episodes must be at least 1")
        if not (0.0 < self.delta <= 1.0):
            raise DomainError(f"delta must lie in (0, 1], got {self.delta!r}")
        if self.eta is not None and not self.eta > 0:
            raise DomainError("eta must be positive")
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.weighting.is_lipschitz:
            raise DomainError(f"{self.weighting.kind} weighting has no finite Lipschitz constant")
        if self.weighting.kind not in ("cvar", "expectation"):
            raise DomainError("learning supports CVaR and expectation weightings")
        if not self.width_scale >= 0:
            raise DomainError("width_scale must be nonnegative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weighting"] = self.weighting.to_dict()
        return d


@dataclass(eq=False)
class RegretTrace:
    config: LearnerConfig
    phi_star: float
    phi_true: np.ndarray
    phi_opt: np.ndarray
    actions: np.ndarray = field(repr=False)   # greedy action tables, (K, T, S, Y)
    meta: dict = field(default_factory=dict)

    @property
    def regret(self) -> np.ndarray:
        return self.phi_star - self.phi_true

    @property
    def cumulative_regret(self) -> np.ndarray:
        return np.cumsum(self.regret)

    @property
    def policy_ids(self) -> list[str]:
        return [hashlib.sha1(a.tobytes()).hexdigest()[:12] for a in self.actions]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        cum = self.cumulative_regret
        for k in range(len(self.phi_true)):
            w.writerow([k + 1, repr(float(self.phi_true[k])), repr(float(self.phi_opt[k])),
                        repr(float(self.regret[k])), repr(float(cum[k]))])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"phi_star": self.phi_star, "config": self.config.to_dict(),
                "totals": {"episodes": int(len(self.phi_true)),
                           "regret_cum": float(self.cumulative_regret[-1]),
                           "regret_last": float(self.regret[-1])},
                "meta": self.meta}

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)


def _plan(aug: AugmentedMdp, weighting: WeightingFunction, mode: str) -> tuple[AugmentedPolicy, float]:
    """Planned policy and its objective on ``aug`` measured with ``weighting``."""
    if mode == "expected-ucb" and weighting.kind != "expectation":
        policy, _ = plan_optimal(aug, make_weighting("expectation"))
        return policy, phi_quantile(evaluate_policy_distribution(aug, policy), weighting)
    return plan_optimal(aug, weighting)


def build_model(counts: CountsModel, init: np.ndarray, config: LearnerConfig, K: int) -> TabularMdp:
    """Model the agent plans on for the next episode."""
    emp = empirical_model(counts, init)
    if config.mode == "greedy":
        return emp.mdp
    eps_p, eps_r = confidence_widths(counts, K, config.delta)
    return optimistic_model(emp, (eps_p * config.width_scale, eps_r * config.width_scale)).mdp


def run_learning(true_mdp: TabularMdp, config: LearnerConfig) -> RegretTrace:
    """Run ``config.episodes`` episodes of plan-act-update against ``true_mdp``.

    Objectives are evaluated exactly on the true model; it is never shown to
    the agent.
    """
    eta = true_mdp.eta if config.eta is None else config.eta
    lattice_steps(1.0, eta)
    lattice_steps(true_mdp.horizon, eta)
    used = np.flatnonzero(true_mdp.reward_pmf.any(axis=(0, 1))) * true_mdp.eta / eta
    if np.any(np.abs(used - np.round(used)) > LATTICE_TOL):
        raise DomainError(f"true rewards do not lie on the learner's eta={eta} lattice")
    truth = build_augmented(true_mdp, eta)
    W = config.weighting
    K = config.episodes
    S, A, T, Y = true_mdp.n_states, true_mdp.n_actions, true_mdp.horizon, truth.y_levels

    _, phi_star = plan_optimal(truth, W)
    counts = CountsModel.empty(S, A, T, eta)
    phi_true = np.zeros(K)
    phi_opt = np.zeros(K)
    actions = np.zeros((K, T, S, Y), dtype=np.int8)
    for k in range(K):
        model = build_model(counts, true_mdp.init, config, K)
        aug = AugmentedMdp(model)
        policy, phi_opt[k] = _plan(aug, W, config.mode)
        on_truth = policy.restrict_states(S)
        phi_true[k] = phi_quantile(evaluate_policy_distribution(truth, on_truth), W)
        actions[k] = on_truth.greedy_actions()
        ep = rollout(true_mdp, adapt_policy(on_truth, eta), make_rng(config.seed, stream=k))
        counts = update_counts(counts, ep)
    meta = {}
    if config.mode == "expected-ucb":
        meta["note"] = "optimistic learner planning for expected return; regret measured in the configured objective"
    return RegretTrace(config, float(phi_star), phi_true, phi_opt, actions, meta)


@dataclass(frozen=True)
class AuditReport:
    n_episodes: int
    fraction_optimistic: float
    violations: tuple[int, ...]

    @property
    def violation_fraction(self) -> float:
        return 1.0 - self.fraction_optimistic


def optimism_audit(trace: RegretTrace, tol: float = 1e-9) -> AuditReport:
    """Episodes (1-based) where the planned model under-estimated the true objective."""
    bad = np.flatnonzero(trace.phi_opt < trace.phi_true - tol)
    n = len(trace.phi_true)
    return AuditReport(n, 1.0 - len(bad) / n, tuple(int(k) + 1 for k in bad))
