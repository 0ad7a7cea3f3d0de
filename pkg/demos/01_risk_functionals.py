"""
Risk functionals on a discrete return law
=========================================

A weighting ``G`` over quantile levels turns a return distribution into a
single number. CVaR averages the worst ``alpha`` fraction, the expectation
weights every level equally, and VaR picks out one quantile.
"""
import numpy as np

from risklab import DiscreteDistribution, make_weighting, phi_cdf, phi_quantile, quantile

# %%
# A lottery that pays nothing 30% of the time.
lottery = DiscreteDistribution.from_pairs([(0.0, 0.3), (2.0, 0.5), (5.0, 0.2)])
print("grid", lottery.grid, "mass", lottery.mass, "mean", lottery.mean())

# %%
# The quantile function jumps at each cumulative mass.
for tau in (0.0, 0.3, 0.31, 0.8, 0.81, 1.0):
    print(f"F^dagger({tau}) = {quantile(lottery, tau)}")

# %%
# The same functional from two directions: a sum over quantile jumps and an
# integral of the weighted CDF. They agree to round-off.
for w in (make_weighting("cvar", 0.1), make_weighting("cvar", 0.5), make_weighting("expectation"),
          make_weighting("piecewise_linear", knots=[(0, 0), (0.2, 0.6), (1, 1)])):
    a, b = phi_quantile(lottery, w), phi_cdf(lottery, w)
    print(f"{w.to_dict()}: {a:.6f} vs {b:.6f} (L_G = {w.lipschitz})")

# %%
# VaR is a step weighting; it is fine for evaluation but has no finite
# Lipschitz constant, so the learner refuses it.
var = make_weighting("var", 0.3)
print("VaR_0.3 =", phi_quantile(lottery, var), "lipschitz", var.lipschitz)

# %%
# CVaR grows with alpha and meets the mean at alpha = 1.
alphas = np.linspace(0.05, 1, 8)
print([round(phi_quantile(lottery, make_weighting("cvar", a)), 3) for a in alphas])
