"""
From history-dependent policies to augmented states
===================================================

Any policy that looks at the whole history can be replaced by one that only
sees the current state and the reward collected so far, without changing the
return distribution. Coarser reward lattices cost at most ``T * eta``.
"""
import numpy as np

from risklab import (
    adapt_policy,
    build_augmented,
    build_tilde_policy,
    evaluate_policy_distribution,
    exact_return_distribution,
    make_weighting,
    plan_bruteforce,
    phi_quantile,
)
from risklab.envs import mdp_catalogue
from risklab.riskdist import cdf_sup_distance

mdp = mdp_catalogue()["drift"]


def whimsical(t, history):
    # prefers action 1 after an odd number of visits to state 1
    odd = sum(s == 1 for s in history.states) % 2
    return np.array([0.2, 0.8]) if odd else np.array([0.7, 0.3])


# %%
d_hist = exact_return_distribution(mdp, whimsical)
tilde = build_tilde_policy(mdp, whimsical)
d_tilde = evaluate_policy_distribution(build_augmented(mdp), tilde)
print("history policy law:", d_hist)
print("CDF gap to the augmented policy:", cdf_sup_distance(d_hist, d_tilde))

# %%
# Plan on coarser lattices and run the result on the original rewards.
w = make_weighting("cvar", 0.25)
_, exact = plan_bruteforce(build_augmented(mdp), w)
print(f"optimum on the native lattice: {exact:.4f}")
for eta in (0.5, 0.25, 0.125, 0.0625):
    pol, _ = plan_bruteforce(build_augmented(mdp, eta), w)
    got = phi_quantile(exact_return_distribution(mdp, adapt_policy(pol, eta)), w)
    print(f"eta={eta:<7} value {got:.4f}  loss {exact - got:.4f}  budget T*eta {mdp.horizon * eta:.4f}")
