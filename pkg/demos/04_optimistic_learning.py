"""
Learning the frozen lake with optimism
======================================

The learner starts with no knowledge of the lake. Each episode it builds an
optimistic model, plans a CVaR-optimal policy on it, and walks the lake once.
We compare it with a greedy learner that trusts its estimates.

Pass a number of episodes on the command line; the default is short.
"""
import sys
from collections import Counter
from pathlib import Path

from risklab import LearnerConfig, make_frozen_lake, make_weighting, optimism_audit, run_learning
from risklab.cli import regret_svg
from risklab.envs import planned_goal

K = int(sys.argv[1]) if len(sys.argv) > 1 else 300
mdp = make_frozen_lake()
w = make_weighting("cvar", 0.33)

groups = {}
for mode in ("ucb", "greedy"):
    for seed in (1, 2, 3):
        tr = run_learning(mdp, LearnerConfig(K, w, mode=mode, seed=seed))
        goals = Counter(planned_goal(None, a) for a in tr.actions[K // 2:])
        audit = optimism_audit(tr)
        print(f"{mode:6s} seed {seed}: regret {tr.cumulative_regret[-1]:7.2f}  "
              f"late corridors {dict(goals)}  optimistic in {audit.fraction_optimistic:.1%}")
        groups.setdefault((0.33, mode), []).append({"regret_cum": tr.cumulative_regret.tolist()})

# %%
# ``None`` marks plans that head for an unexplored move rather than a goal.
out = Path("regret_demo.svg")
out.write_text(regret_svg(groups))
print("wrote", out)
