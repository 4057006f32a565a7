"""Command-line orchestration: normal forms, simulations, sampling, certification, plots.

Configuration is a flat key-value text file (``key = value`` per line, ``#``
comments); command-line flags override file values. Documented keys: sigma,
theta, eps, M, N, r, gamma, delta, dt, T, n_samples, seed, budget_terms.

Exit codes: 0 on success, 1 when a verification or verdict fails, 2 on
configuration or budget errors. Every run writes a manifest next to its
artifacts recording the subcommand, the configuration snapshot, the seed, the
code version, the output paths, and the wall time.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import BudgetError
from .gevrey import GevreyParams, norm_sigma, to_json as state_to_json
from . import dynamics
from . import modespace
from . import polyham
from . import rathom
from . import rational_nf
from . import resonance_sampler as sampler
from . import resonant_nf

CONFIG_KEYS = (
    "sigma",
    "theta",
    "eps",
    "M",
    "N",
    "r",
    "gamma",
    "delta",
    "dt",
    "T",
    "n_samples",
    "seed",
    "budget_terms",
)

DEFAULTS = {
    "sigma": 1.0,
    "theta": 0.5,
    "eps": 0.1,
    "M": 3,
    "N": 1,
    "r": 3,
    "gamma": 1e-4,
    "delta": None,
    "dt": 1e-3,
    "T": 100.0,
    "n_samples": 1000,
    "seed": 0,
    "budget_terms": 500_000,
}

_INT_KEYS = {"M", "N", "r", "n_samples", "seed", "budget_terms"}


def read_config(path: str | None) -> dict:
    cfg = dict(DEFAULTS)
    if path:
        with open(path) as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"malformed config line: {line!r}")
                key, value = (s.strip() for s in line.split("=", 1))
                if key not in CONFIG_KEYS:
                    raise ValueError(f"unknown config key: {key}")
                cfg[key] = value
    for k in _INT_KEYS:
        if cfg[k] is not None:
            cfg[k] = int(float(cfg[k]))
    for k in ("sigma", "theta", "eps", "gamma", "dt", "T"):
        if cfg[k] is not None:
            cfg[k] = float(cfg[k])
    if cfg["delta"] not in (None, "auto"):
        cfg["delta"] = float(cfg["delta"])
    return cfg


def _apply_overrides(cfg: dict, args: argparse.Namespace) -> dict:
    for key in CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _write_manifest(outdir: str, subcommand: str, cfg: dict, outputs: list[str], t0: float, extra=None) -> str:
    manifest = {
        "subcommand": subcommand,
        "config": {k: cfg.get(k) for k in CONFIG_KEYS},
        "seed": cfg.get("seed"),
        "version": __version__,
        "outputs": outputs,
        "wall_time_s": time.time() - t0,
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def cmd_nf(args) -> int:
    t0 = time.time()
    cfg = _apply_overrides(read_config(args.config), args)
    outdir = args.out
    os.makedirs(outdir, exist_ok=True)
    M, r, gamma = cfg["M"], cfg["r"], cfg["gamma"]
    res = resonant_nf.resonant_normal_form(M, r, budget_terms=cfg["budget_terms"])
    res_dir = os.path.join(outdir, "resonant")
    resonant_nf.save_result(res, res_dir)
    outputs = [os.path.relpath(res_dir, outdir)]
    rat = None
    if r >= 3:
        rat = rational_nf.rational_normal_form(res, r, gamma, budget_terms=cfg["budget_terms"])
        rat_dir = os.path.join(outdir, "rational")
        rational_nf.save_result(rat, rat_dir)
        outputs.append(os.path.relpath(rat_dir, outdir))
    checks = {}
    ok = True
    if args.check:
        checks["resonant"] = dict(res.diagnostics)
        ok = (
            res.diagnostics["homological_identity_exact"]
            and res.diagnostics["all_orders_resonant"]
            and res.diagnostics["reality_preserved"]
        )
        if rat is not None:
            checks["rational"] = {k: v for k, v in rat.diagnostics.items() if k != "norms"}
            ok = ok and (
                rat.diagnostics["all_orders_integrable"]
                and rat.diagnostics["generators_nonintegrable"]
                and rat.diagnostics["reality_preserved"]
            )
        checks["all_pass"] = ok
        check_path = os.path.join(outdir, "checks.json")
        with open(check_path, "w") as fh:
            json.dump(checks, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
        outputs.append("checks.json")
    _write_manifest(outdir, "nf", cfg, outputs, t0, extra={"checks_pass": ok} if args.check else None)
    print(f"normal forms written to {outdir} (minimal C: resonant {res.minimal_constant():.4g})")
    return 0 if ok else 1


def cmd_simulate(args) -> int:
    t0 = time.time()
    cfg = _apply_overrides(read_config(args.config), args)
    outdir = args.out
    os.makedirs(outdir, exist_ok=True)
    traj, verdicts = dynamics.run_experiment(
        eps=cfg["eps"],
        sigma=cfg["sigma"],
        theta=cfg["theta"],
        M=cfg["M"],
        T=cfg["T"],
        dt=cfg["dt"],
        seed=cfg["seed"],
        nonlinear=not args.linear,
    )
    csv_path = os.path.join(outdir, "trajectory.csv")
    traj.write_csv(csv_path)
    _write_manifest(outdir, "simulate", cfg, ["trajectory.csv"], t0, extra={"verdicts": verdicts})
    ok = verdicts["norm_bounded"] and verdicts["action_bounded"]
    print(
        f"simulated T={cfg['T']} at M={cfg['M']}: sup norm {verdicts['sup_norm']:.4g} "
        f"(bound {verdicts['norm_bound']:.4g}), sup action distance "
        f"{verdicts['sup_action_distance']:.4g} (bound {verdicts['action_bound']:.4g})"
    )
    return 0 if ok else 1


def cmd_sample(args) -> int:
    t0 = time.time()
    cfg = _apply_overrides(read_config(args.config), args)
    outdir = args.out
    os.makedirs(outdir, exist_ok=True)
    mode = args.mode
    ok = True
    if mode == "measure":
        L = args.L if args.L is not None else cfg["M"]
        delta = cfg["delta"]
        if delta in (None, "auto"):
            delta = sampler.measbis_delta(args.kappa, cfg["eps"], cfg["M"], L, cfg["r"], cfg["sigma"])
        result = sampler.measure_fraction(
            cfg["M"], L, cfg["r"], delta, cfg["eps"], cfg["n_samples"],
            seed=cfg["seed"], sigma=cfg["sigma"], theta=cfg["theta"],
        )
        ok = result["fraction"] >= 0.9
    elif mode == "proba":
        result = sampler.proba_experiment(
            cfg["eps"], cfg["n_samples"], r=cfg["r"], L=args.L if args.L is not None else 8,
            gamma_scale=args.gamma_scale, seed=cfg["seed"], sigma=cfg["sigma"], theta=cfg["theta"],
        )
        sd = math.sqrt(max(result["fraction"] * (1 - result["fraction"]), 1e-12) / result["n"])
        ok = result["fraction"] >= result["target"] - 3 * sd
    elif mode == "ball":
        states = sampler.sample_ball(
            cfg["M"], cfg["eps"], cfg["n_samples"], seed=cfg["seed"],
            sigma=cfg["sigma"], theta=cfg["theta"],
        )
        result = {
            "mode": "ball",
            "n": len(states),
            "max_norm": max(norm_sigma(s) for s in states),
            "seed": cfg["seed"],
        }
        with open(os.path.join(outdir, "samples.jsonl"), "w") as fh:
            for s in states:
                fh.write(state_to_json(s) + "\n")
    else:
        raise ValueError(f"unknown sample mode {mode}")
    result["config"] = {k: cfg.get(k) for k in CONFIG_KEYS}
    out_path = os.path.join(outdir, f"sample_{mode}.json")
    with open(out_path, "w") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(outdir, "sample", cfg, [os.path.basename(out_path)], t0)
    print(f"sample mode={mode}: " + (f"fraction {result['fraction']:.4f}" if "fraction" in result else "done"))
    return 0 if ok else 1


def _verify_reports(args, cfg) -> list[dict]:
    lemma = args.lemma
    reports = []
    if lemma in ("mu3", "all"):
        reports.append(modespace.check_mu3_bound(args.mmax, args.Mmax, args.ellmax))
    if lemma in ("explog", "powerlog", "concavity", "expdecay", "all"):
        aux = modespace.verify_auxiliary_inequalities(mu1_bound=min(args.Mmax, 12))
        wanted = {lemma} if lemma != "all" else {"explog", "powerlog", "concavity", "expdecay"}
        reports.extend(r for r in aux if r["lemma"] in wanted)
    if lemma in ("modfreq", "all"):
        violations = []
        checked = 0
        for m in range(2, args.mmax + 1):
            for ji in modespace.enumerate_resonant(m, min(args.Mmax, 10), nonintegrable=True):
                checked += 1
                try:
                    sampler.find_astar(ji)
                except AssertionError:
                    violations.append({"j": list(ji)})
        reports.append(
            {
                "lemma": "modfreq",
                "range": {"m_max": args.mmax, "M": min(args.Mmax, 10)},
                "checked": checked,
                "violations": violations,
                "min_margin": None,
            }
        )
    if lemma in ("highmodes", "all"):
        rng = np.random.default_rng(cfg["seed"])
        K = polyham.random_real_hamiltonian(3, 8, 40, rng, resonant=True)
        params = GevreyParams(cfg["sigma"], cfg["theta"])
        states = []
        for _ in range(10):
            z = (rng.normal(size=17) + 1j * rng.normal(size=17)) * 0.02
            from .gevrey import FourierState

            states.append(FourierState(8, z, params))
        reports.append(polyham.verify_high_mode_estimates(K, states, ell_max=12, N=1, r=1))
    if not reports:
        raise ValueError(f"unknown lemma token {lemma}")
    return reports


def cmd_verify(args) -> int:
    t0 = time.time()
    cfg = _apply_overrides(read_config(args.config), args)
    outdir = args.out
    os.makedirs(outdir, exist_ok=True)
    reports = _verify_reports(args, cfg)
    out_path = os.path.join(outdir, "verify.json")
    with open(out_path, "w") as fh:
        json.dump(reports, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(outdir, "verify", cfg, ["verify.json"], t0)
    n_viol = sum(len(r["violations"]) for r in reports)
    for r in reports:
        print(f"{r['lemma']}: {len(r['violations'])} violations")
    return 0 if n_viol == 0 else 1


def cmd_plot(args) -> int:
    t0 = time.time()
    outdir = os.path.dirname(os.path.abspath(args.out)) or "."
    os.makedirs(outdir, exist_ok=True)
    columns = {
        "norm_sigma": 2,
        "energy": 3,
        "mass": 4,
        "momentum": 5,
        "action_distance": 6,
    }
    col = columns.get(args.column, 2)
    lines = [
        "# gnuplot script generated by spnf plot",
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set xlabel 't'",
        f"set ylabel '{args.column}'",
        "set term pngcairo size 900,600" if args.png else "set term dumb",
        f"set output '{args.png}'" if args.png else "",
        "plot \\",
    ]
    plots = [f"  '{path}' using 1:{col} with lines title '{os.path.basename(path)}'" for path in args.inputs]
    lines.append(", \\\n".join(plots))
    with open(args.out, "w") as fh:
        fh.write("\n".join(line for line in lines if line != "") + "\n")
    print(f"plot script written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spnf",
        description="Normal-form engine and spectral simulator for the circle Schrodinger-Poisson system",
    )
    parser.add_argument("--version", action="version", version=f"spnf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value configuration file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--sigma", type=float, default=None)
        p.add_argument("--theta", type=float, default=None)
        p.add_argument("--threads", type=int, default=1, help="worker cap (advisory)")

    p = sub.add_parser("nf", help="build resonant and rational normal forms")
    common(p)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--budget-terms", dest="budget_terms", type=int, default=None)
    p.add_argument("--check", action="store_true", help="emit bound-check report")
    p.set_defaults(func=cmd_nf)

    p = sub.add_parser("simulate", help="long-time stability run")
    common(p)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--linear", action="store_true", help="disable the nonlinearity")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sample", help="measure/probability Monte-Carlo experiments")
    common(p)
    p.add_argument("--mode", choices=("measure", "proba", "ball"), default="measure")
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--L", type=int, default=None)
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--delta", default=None, help="threshold, or 'auto' for the admissible bound")
    p.add_argument("--kappa", type=float, default=0.1)
    p.add_argument("--gamma-scale", dest="gamma_scale", type=float, default=0.01)
    p.add_argument("--n", dest="n_samples", type=int, default=None)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("verify", help="finite certifications of the quantitative lemmas")
    common(p)
    p.add_argument(
        "--lemma",
        default="all",
        choices=("mu3", "expdecay", "explog", "powerlog", "concavity", "modfreq", "highmodes", "all"),
    )
    p.add_argument("--mmax", type=int, default=3)
    p.add_argument("--Mmax", type=int, default=15)
    p.add_argument("--ellmax", type=int, default=15)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot", help="emit a plain-text gnuplot script for trajectory CSVs")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out", default="plot.gp")
    p.add_argument("--column", default="energy")
    p.add_argument("--png", default=None, help="optional png output path in the script")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BudgetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
