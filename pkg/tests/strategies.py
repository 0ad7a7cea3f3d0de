"""Hypothesis strategies shared by the property tests."""
import numpy as np
from hypothesis import strategies as st

from risklab.riskdist import DiscreteDistribution, make_weighting


@st.composite
def distributions(draw, max_atoms=8, lattice=None):
    n = draw(st.integers(1, max_atoms))
    if lattice is None:
        pts = draw(st.lists(st.floats(-50, 50, allow_nan=False, allow_subnormal=False),
                            min_size=n, max_size=n, unique=True))
    else:
        pts = [i * lattice for i in draw(st.lists(st.integers(0, 40), min_size=n, max_size=n, unique=True))]
    w = draw(st.lists(st.floats(0.0, 1.0), min_size=n, max_size=n))
    w = np.asarray(w) + 1e-3
    order = np.argsort(pts)
    return DiscreteDistribution(np.asarray(pts)[order], (w / w.sum())[order])


@st.composite
def lipschitz_weightings(draw):
    kind = draw(st.sampled_from(["cvar", "expectation", "piecewise_linear"]))
    if kind == "cvar":
        return make_weighting("cvar", draw(st.floats(0.01, 1.0)))
    if kind == "expectation":
        return make_weighting("expectation")
    inner = sorted(draw(st.lists(st.floats(0.01, 0.99), min_size=0, max_size=4, unique=True)))
    vals = sorted(draw(st.lists(st.floats(0.0, 1.0), min_size=len(inner), max_size=len(inner))))
    return make_weighting("piecewise_linear", knots=[(0.0, 0.0), *zip(inner, vals), (1.0, 1.0)])
