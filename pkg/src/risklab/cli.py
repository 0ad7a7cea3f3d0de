"""Command-line harness: ``risklab plan | learn | eval | envs list``.

Every failure prints one JSON object to stderr, e.g.
``{"error": "...", "kind": "io"}``, and exits nonzero: 1 for domain or
contract errors, 2 for file-system errors.
"""
from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .augment import AugmentedPolicy, build_augmented
from .envs import FrozenLakeSpec, corridor_policy, list_envs, load_env
from .errors import ContractError, RiskLabError
from .learner import LearnerConfig, run_learning
from .planner import evaluate_policy_distribution, plan_bruteforce, plan_cvar
from .riskdist import DiscreteDistribution, WeightingFunction, make_weighting, phi_cdf, phi_quantile

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2


class ConfigError(RiskLabError, ValueError):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _read_config(path: str | None) -> tuple[dict, Path | None]:
    if path is None:
        return {}, None
    p = Path(path)
    text = p.read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{p}: top level must be an object")
    return cfg, p.parent


def _out_dir(args, cfg) -> Path:
    out = Path(args.out or cfg.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _weighting(args, cfg) -> WeightingFunction:
    if getattr(args, "alpha", None):
        return make_weighting("cvar", args.alpha[0])
    if "weighting" in cfg:
        return WeightingFunction.from_dict(cfg["weighting"])
    alpha = cfg.get("alpha", 1.0)
    return make_weighting("cvar", alpha[0] if isinstance(alpha, list) else alpha)


def _env(cfg, base_dir):
    return load_env(cfg.get("env", {"name": "frozen_lake"}), base_dir)


def _scaled(dist: DiscreteDistribution, scale: float) -> dict:
    return {"grid": [float(x) * scale for x in dist.grid], "mass": [float(m) for m in dist.mass]}


def _policy_table(policy: AugmentedPolicy, aug) -> str:
    lines = ["t\tstate\ty\tprobs"]
    for t, layer in enumerate(aug.reachable(), start=1):
        for s, y in layer:
            p = policy.action_probs(t, s, y)
            lines.append(f"{t}\t{s}\t{y}\t" + " ".join(f"{x:.6g}" for x in p))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------


def cmd_plan(args) -> int:
    cfg, base = _read_config(args.config)
    out = _out_dir(args, cfg)
    mdp, scale = _env(cfg, base)
    eta = args.eta if args.eta is not None else cfg.get("eta")
    aug = build_augmented(mdp, eta)
    w = _weighting(args, cfg)
    if w.kind == "cvar" and not cfg.get("bruteforce", False):
        res = plan_cvar(aug, w.alpha)
        doc = res.to_dict()
        doc["var_alpha"] = res.var_alpha
        policy, value = res.policy, res.value
    else:
        policy, value = plan_bruteforce(aug, w)
        doc = {"policy": policy.to_dict(), "value": value, "eta": aug.eta, "weighting": w.to_dict()}
    doc["return_scale"] = scale
    doc["value_scaled"] = value * scale
    (out / "plan.json").write_text(_dump(doc))
    (out / "policy.txt").write_text(_policy_table(policy, aug))
    print(json.dumps({"value": value, "value_scaled": value * scale}))
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg, base = _read_config(args.config)
    out = _out_dir(args, cfg)
    mdp, scale = _env(cfg, base)
    eta = args.eta if args.eta is not None else cfg.get("eta")
    aug = build_augmented(mdp, eta)
    if "policy_path" in cfg:
        path = Path(cfg["policy_path"])
        if base is not None and not path.is_absolute():
            path = base / path
        d = json.loads(path.read_text())
        policy = AugmentedPolicy.from_dict(d.get("policy", d))
    elif "corridor" in cfg:
        env = cfg.get("env", {})
        policy = corridor_policy(FrozenLakeSpec.from_dict(env, base), int(cfg["corridor"]))
    else:
        raise ConfigError("eval needs 'policy_path' or 'corridor' in the config")
    if policy.probs.shape[:2] != (aug.horizon, aug.n_states):
        raise ContractError(f"policy shape {policy.probs.shape} does not fit the environment")
    w = _weighting(args, cfg)
    dist = evaluate_policy_distribution(aug, policy)
    pq, pc = phi_quantile(dist, w), phi_cdf(dist, w)
    doc = {"distribution": _scaled(dist, scale), "phi_quantile": pq * scale, "phi_cdf": pc * scale,
           "abs_diff": abs(pq - pc) * scale, "return_scale": scale, "weighting": w.to_dict()}
    (out / "eval.json").write_text(_dump(doc))
    print(json.dumps({"phi_quantile": doc["phi_quantile"], "abs_diff": doc["abs_diff"]}))
    return EXIT_OK


def _learn_one(job: dict) -> dict:
    mdp, scale = load_env(job["env"], job["base_dir"])
    config = LearnerConfig(episodes=job["episodes"], weighting=make_weighting("cvar", job["alpha"]),
                           delta=job["delta"], eta=job["eta"], mode=job["mode"], seed=job["seed"],
                           width_scale=job["width_scale"])
    trace = run_learning(mdp, config)
    Path(job["csv"]).write_text(trace.to_csv())
    return {"alpha": job["alpha"], "mode": job["mode"], "seed": job["seed"], "csv": Path(job["csv"]).name,
            "phi_star": trace.phi_star, "return_scale": scale,
            "regret_cum": trace.cumulative_regret.tolist(), "meta": trace.meta}


def _workers() -> int:
    raw = os.environ.get("RISKLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"RISKLAB_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def _parse_list(raw, cast):
    if raw is None:
        return None
    if isinstance(raw, str):
        return [cast(x) for x in raw.split(",") if x.strip()]
    return [cast(x) for x in (raw if isinstance(raw, list) else [raw])]


def cmd_learn(args) -> int:
    cfg, base = _read_config(args.config)
    out = _out_dir(args, cfg)
    seeds = _parse_list(args.seeds, int) or _parse_list(cfg.get("seeds", [0]), int)
    alphas = args.alpha or _parse_list(cfg.get("alpha", [0.33]), float)
    modes = _parse_list(args.mode, str) or _parse_list(cfg.get("mode", cfg.get("modes", ["ucb"])), str)
    if not seeds:
        raise ConfigError("seeds must be non-empty")
    episodes = args.episodes if args.episodes is not None else int(cfg.get("episodes", 200))
    delta = args.delta if args.delta is not None else float(cfg.get("delta", 0.1))
    eta = args.eta if args.eta is not None else cfg.get("eta")
    env = cfg.get("env", {"name": "frozen_lake"})
    load_env(env, base)   # fail fast on a bad env before any work
    jobs = []
    for alpha in alphas:
        for mode in modes:
            for seed in seeds:
                name = f"trace_{mode}_a{alpha:g}_s{seed}.csv"
                jobs.append({"env": env, "base_dir": str(base) if base else None, "episodes": episodes,
                             "alpha": alpha, "delta": delta, "eta": eta, "mode": mode, "seed": seed,
                             "width_scale": float(cfg.get("width_scale", 1.0)), "csv": str(out / name)})
    # validate every config up front so errors surface before spawning workers
    for j in jobs:
        LearnerConfig(j["episodes"], make_weighting("cvar", j["alpha"]), j["delta"], j["eta"], j["mode"],
                      j["seed"], j["width_scale"])
    n = min(_workers(), len(jobs))
    if n > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(_learn_one, jobs))
    else:
        results = [_learn_one(j) for j in jobs]

    groups = {}
    for r in results:
        groups.setdefault((r["alpha"], r["mode"]), []).append(r)
    summary = {"config": {"episodes": episodes, "delta": delta, "eta": eta, "env": env, "seeds": seeds,
                          "alphas": alphas, "modes": modes},
               "runs": [{k: r[k] for k in ("alpha", "mode", "seed", "csv", "phi_star", "meta")}
                        | {"regret_cum": r["regret_cum"][-1]} for r in results],
               "totals": [{"alpha": a, "mode": m,
                           "regret_cum_mean": statistics.fmean(r["regret_cum"][-1] for r in rs),
                           "regret_cum_median": statistics.median(r["regret_cum"][-1] for r in rs)}
                          for (a, m), rs in groups.items()]}
    (out / "summary.json").write_text(_dump(summary))
    (out / "regret.svg").write_text(regret_svg(groups))
    print(json.dumps({"runs": len(results), "out": str(out)}))
    return EXIT_OK


def regret_svg(groups: dict, width: int = 640, height: int = 400) -> str:
    """Mean cumulative regret per (alpha, mode) with a one-stdev band."""
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    pad = 50
    curves = []
    for (alpha, mode), runs in sorted(groups.items()):
        arr = np.array([r["regret_cum"] for r in runs])
        curves.append((f"{mode} alpha={alpha:g}", arr.mean(axis=0), arr.std(axis=0)))
    k_max = max(len(c[1]) for c in curves)
    y_max = max(float((m + s).max()) for _, m, s in curves) or 1.0

    def xy(k, v):
        return (pad + (width - 2 * pad) * k / max(k_max - 1, 1),
                height - pad - (height - 2 * pad) * v / y_max)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
             f'<text x="{width / 2}" y="{height - 15}" text-anchor="middle" font-size="12">episode</text>',
             f'<text x="15" y="{height / 2}" font-size="12" transform="rotate(-90 15 {height / 2})" '
             f'text-anchor="middle">cumulative regret</text>',
             f'<text x="{pad - 5}" y="{pad + 4}" text-anchor="end" font-size="10">{y_max:.3g}</text>',
             f'<text x="{width - pad}" y="{height - pad + 15}" text-anchor="end" font-size="10">{k_max}</text>']
    for i, (label, mean, std) in enumerate(curves):
        col = palette[i % len(palette)]
        upper = [xy(k, v) for k, v in enumerate(mean + std)]
        lower = [xy(k, v) for k, v in enumerate(mean - std)][::-1]
        band = " ".join(f"{x:.2f},{y:.2f}" for x, y in upper + lower)
        line = " ".join(f"{x:.2f},{y:.2f}" for x, y in (xy(k, v) for k, v in enumerate(mean)))
        parts.append(f'<polygon points="{band}" fill="{col}" fill-opacity="0.15" stroke="none"/>')
        parts.append(f'<polyline points="{line}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        parts.append(f'<text x="{pad + 10}" y="{pad + 15 * (i + 1)}" fill="{col}" font-size="11">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_envs(args) -> int:
    print(_dump(list_envs()), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="risklab", description="Risk-sensitive tabular planning and learning.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output directory (default: config 'out' or .)")
        p.add_argument("--eta", type=float, help="lattice width for discretized rewards")
        p.add_argument("--alpha", type=lambda s: _parse_list(s, float), help="CVaR level(s), comma separated")

    p = sub.add_parser("plan", help="plan an optimal policy")
    common(p)
    p.set_defaults(func=cmd_plan)
    p = sub.add_parser("eval", help="evaluate a policy's return distribution")
    common(p)
    p.set_defaults(func=cmd_eval)
    p = sub.add_parser("learn", help="run the episodic learner")
    common(p)
    p.add_argument("--seeds", help="comma separated seeds")
    p.add_argument("--episodes", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--mode", help="ucb, greedy, expected-ucb (comma separated)")
    p.set_defaults(func=cmd_learn)
    p = sub.add_parser("envs", help="environment catalogue")
    p.add_argument("action", choices=["list"])
    p.set_defaults(func=cmd_envs)
    return parser


def _fail(kind: str, exc: BaseException, code: int) -> int:
    print(json.dumps({"error": str(exc), "kind": kind}), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_DOMAIN)
    except ContractError as exc:
        return _fail("contract", exc, EXIT_DOMAIN)
    except (RiskLabError, ValueError, KeyError, TypeError) as exc:
        return _fail("domain", exc, EXIT_DOMAIN)
    except OSError as exc:
        return _fail("io", exc, EXIT_IO)


if __name__ == "__main__":
    sys.exit(main())
