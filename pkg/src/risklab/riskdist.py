"""Discrete return distributions and quantile-weighted risk functionals.

A risk objective is a weighting ``G`` (a CDF over quantile levels) applied to
the quantile function of a return distribution::

    phi = integral_0^1 F^dagger(tau) dG(tau)

Two exact evaluators are provided: :func:`phi_quantile` sums the Stieltjes
integral directly, :func:`phi_cdf` uses the integrated weighted CDF form
``z_max - integral G(F(x)) dx``. They agree up to round-off for every valid
input and serve as oracles for each other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import DomainError

MASS_TOL = 1e-12
PRUNE_TOL = 1e-15


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Probability mass on a strictly increasing finite grid."""

    grid: np.ndarray
    mass: np.ndarray
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float).ravel()
        mass = np.array(self.mass, dtype=float).ravel()
        if grid.size == 0 or grid.shape != mass.shape:
            raise DomainError("grid and mass must be non-empty and equally long")
        if not np.all(np.isfinite(grid)):
            raise DomainError("grid values must be finite")
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise DomainError("grid must be strictly increasing")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise DomainError("mass must be finite and nonnegative")
        if abs(mass.sum() - 1.0) > MASS_TOL:
            raise DomainError(f"mass sums to {mass.sum()!r}, not 1")
        cum = np.cumsum(mass)
        # F(z_m) = 1 exactly; round-off must not push the top quantile off the grid
        cum[-1] = 1.0
        cum = np.minimum(cum, 1.0)
        grid.flags.writeable = False
        mass.flags.writeable = False
        cum.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "_cum", cum)

    # -- constructors -----------------------------------------------------

    @classmethod
    def point(cls, value: float) -> "DiscreteDistribution":
        return cls(np.array([float(value)]), np.array([1.0]))

    @classmethod
    def from_pairs(cls, pairs) -> "DiscreteDistribution":
        """Build from ``{value: prob}`` or an iterable of ``(value, prob)``; merges duplicates."""
        items = pairs.items() if isinstance(pairs, dict) else pairs
        acc: dict[float, float] = {}
        for v, p in items:
            acc[float(v)] = acc.get(float(v), 0.0) + float(p)
        keys = sorted(acc)
        return cls(np.array(keys), np.array([acc[k] for k in keys]))

    @classmethod
    def from_lattice(cls, pmf: Sequence[float], eta: float) -> "DiscreteDistribution":
        """Distribution with ``pmf[i]`` on the value ``i * eta``.

        Mass below 1e-15 is pruned and the rest renormalized, so backups that
        accumulate dust do not grow the support.
        """
        pmf = np.asarray(pmf, dtype=float)
        pmf = np.where(pmf < PRUNE_TOL, 0.0, pmf)
        total = pmf.sum()
        if total <= 0:
            raise DomainError("lattice pmf has no mass")
        idx = np.flatnonzero(pmf)
        return cls(idx * eta, pmf[idx] / total)

    # -- basic queries ----------------------------------------------------

    @property
    def cumulative(self) -> np.ndarray:
        """``F_j = sum_{i <= j} p_i`` at each grid point."""
        return self._cum

    @property
    def support_min(self) -> float:
        return float(self.grid[0])

    @property
    def support_max(self) -> float:
        """The essential supremum, i.e. ``quantile(1)``."""
        return float(self.grid[self._top_index()])

    def _top_index(self) -> int:
        return int(np.searchsorted(self._cum, 1.0, side="left"))

    def cdf(self, x):
        """Right-continuous CDF, vectorized over ``x``."""
        idx = np.searchsorted(self.grid, x, side="right")
        padded = np.concatenate(([0.0], self._cum))
        out = padded[idx]
        return float(out) if np.ndim(out) == 0 else out

    def mean(self) -> float:
        return float(self.grid @ self.mass)

    def __repr__(self) -> str:
        body = ", ".join(f"{z:g}: {p:.6g}" for z, p in zip(self.grid, self.mass))
        return f"DiscreteDistribution({{{body}}})"

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {"grid": self.grid.tolist(), "mass": self.mass.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DiscreteDistribution":
        return cls(np.asarray(d["grid"], dtype=float), np.asarray(d["mass"], dtype=float))


def cdf_sup_distance(a: DiscreteDistribution, b: DiscreteDistribution) -> float:
    """Kolmogorov distance; both CDFs are step functions so the union grid suffices."""
    pts = np.union1d(a.grid, b.grid)
    return float(np.max(np.abs(a.cdf(pts) - b.cdf(pts))))


# ---------------------------------------------------------------------------
# weighting functions


@dataclass(frozen=True)
class WeightingFunction:
    """A CDF ``G`` on [0, 1] over quantile levels.

    ``kind`` is one of ``"cvar"``, ``"var"``, ``"expectation"`` or
    ``"piecewise_linear"``. Use :func:`make_weighting` to construct.
    """

    kind: str
    alpha: float | None = None
    knots: tuple[tuple[float, float], ...] | None = None

    @property
    def lipschitz(self) -> float:
        if self.kind == "cvar":
            return 1.0 / self.alpha
        if self.kind == "expectation":
            return 1.0
        if self.kind == "var":
            return math.inf
        taus = np.array([k[0] for k in self.knots])
        vals = np.array([k[1] for k in self.knots])
        dt = np.diff(taus)
        dv = np.diff(vals)
        with np.errstate(divide="ignore"):
            slopes = np.where(dt > 0, dv / np.where(dt > 0, dt, 1.0), np.where(dv > 0, np.inf, 0.0))
        return float(slopes.max())

    @property
    def is_lipschitz(self) -> bool:
        return math.isfinite(self.lipschitz)

    def __call__(self, tau):
        t = np.asarray(tau, dtype=float)
        if self.kind == "cvar":
            out = np.minimum(t / self.alpha, 1.0)
        elif self.kind == "expectation":
            out = t.copy()
        elif self.kind == "var":
            # point mass at alpha: integral F^dagger dG = F^dagger(alpha)
            out = (t >= self.alpha).astype(float)
        else:
            taus = [k[0] for k in self.knots]
            vals = [k[1] for k in self.knots]
            out = np.interp(t, taus, vals)
        out = np.clip(out, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"kind": self.kind}
        if self.alpha is not None:
            d["alpha"] = self.alpha
        if self.knots is not None:
            d["knots"] = [list(k) for k in self.knots]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "WeightingFunction":
        kind = d["kind"]
        if kind in ("cvar", "var"):
            return make_weighting(kind, alpha=d["alpha"])
        if kind == "piecewise_linear":
            return make_weighting(kind, knots=d["knots"])
        return make_weighting(kind)


def make_weighting(kind: str, alpha: float | None = None,
                   knots: Iterable[Sequence[float]] | None = None) -> WeightingFunction:
    """Construct a validated weighting.

    >>> make_weighting("cvar", alpha=0.25)(0.1)
    0.4
    """
    kind = kind.lower().replace("-", "_")
    if kind in ("cvar", "var"):
        if alpha is None or not (0.0 < float(alpha) <= 1.0):
            raise DomainError(f"{kind} level alpha must lie in (0, 1], got {alpha!r}")
        return WeightingFunction(kind, alpha=float(alpha))
    if kind in ("expectation", "mean"):
        return WeightingFunction("expectation")
    if kind in ("piecewise_linear", "pwl"):
        if knots is None:
            raise DomainError("piecewise_linear weighting needs knots")
        pts = tuple((float(t), float(g)) for t, g in knots)
        taus = [p[0] for p in pts]
        vals = [p[1] for p in pts]
        if len(pts) < 2 or taus[0] != 0.0 or taus[-1] != 1.0:
            raise DomainError("knots must start at tau=0 and end at tau=1")
        if any(b < a for a, b in zip(taus, taus[1:])):
            raise DomainError("knot taus must be sorted")
        if vals[0] != 0.0 or vals[-1] != 1.0:
            raise DomainError("piecewise_linear weighting needs G(0)=0 and G(1)=1")
        if any(b < a for a, b in zip(vals, vals[1:])) or min(vals) < 0 or max(vals) > 1:
            raise DomainError("knot values must be nondecreasing within [0, 1]")
        return WeightingFunction("piecewise_linear", knots=pts)
    raise DomainError(f"unknown weighting kind {kind!r}")


def cvar_weighting(alpha: float) -> WeightingFunction:
    return make_weighting("cvar", alpha=alpha)


# ---------------------------------------------------------------------------
# quantile and risk functionals


def quantile(dist: DiscreteDistribution, tau):
    """Generalized inverse ``inf{x : F(x) >= tau}``; ``tau = 0`` gives the minimum support point.

    Accepts a scalar or an array of levels.
    """
    t = np.asarray(tau, dtype=float)
    if np.any(np.isnan(t)) or np.any((t < 0.0) | (t > 1.0)):
        raise DomainError(f"quantile level must lie in [0, 1], got {tau!r}")
    j = np.minimum(np.searchsorted(dist.cumulative, t, side="left"), dist.grid.size - 1)
    out = dist.grid[j]
    return float(out) if out.ndim == 0 else out


def phi_quantile(dist: DiscreteDistribution, weighting: WeightingFunction) -> float:
    """Stieltjes sum ``sum_j z_j (G(F_j) - G(F_{j-1}))``.

    The quantile function equals ``z_j`` on ``(F_{j-1}, F_j]`` so this is exact.
    """
    g = weighting(np.concatenate(([0.0], dist.cumulative)))
    return float(dist.grid @ np.diff(g))


def phi_cdf(dist: DiscreteDistribution, weighting: WeightingFunction) -> float:
    """Integrated weighted-CDF form ``z_max - integral_{z_1}^{z_max} G(F(x)) dx``."""
    top = dist._top_index()
    if top == 0:
        return float(dist.grid[0])
    gaps = np.diff(dist.grid[: top + 1])
    return float(dist.grid[top] - gaps @ weighting(dist.cumulative[:top]))


def cvar(dist: DiscreteDistribution, alpha: float) -> float:
    return phi_quantile(dist, cvar_weighting(alpha))
