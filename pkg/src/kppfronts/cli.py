"""Command line interface: experiment orchestration and result persistence.

Subcommands: eta, speed-curve, lambda-star, floquet, kappa, simulate,
oracle, verify. Every subcommand reads a JSON config (see ``config``),
writes CSV/JSON artifacts plus a manifest into the output directory, and is
deterministic given the config and seed. Numeric artifacts are
byte-reproducible; wall time lives only in the manifest.

Flags: --config <path>, --out <dir>, --threads <n>, --seed <u64>.
Environment overrides (prefix KPPFRONTS_): KPPFRONTS_OUT, KPPFRONTS_THREADS,
KPPFRONTS_SEED, and KPPFRONTS_BACKEND=numba|numpy for the kernel backend.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__, front, means, speed, verify
from .backends import BACKEND
from .config import ConfigError, Run, load
from .eta import compute_eta, harnack_report

ENV_PREFIX = "KPPFRONTS_"


def _fmt_num(v) -> str:
    if v is None:
        return "nan"
    f = float(v)
    if np.isnan(f):
        return "nan"
    return format(f, ".17g")


def write_csv(path, header, columns):
    """Plain CSV, '.' decimal separator, locale-free, %.17g numbers."""
    rows = zip(*columns)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_num(v) for v in row) + "\n")


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_manifest(out_dir, cfg, subcommand, seed, threads, wall_time):
    manifest = dict(cfg)
    manifest["_meta"] = {
        "tool": "kppfronts",
        "version": __version__,
        "backend": BACKEND,
        "subcommand": subcommand,
        "seed": seed,
        "threads": threads,
        "wall_time_s": wall_time,
    }
    write_json(os.path.join(out_dir, "manifest.json"), manifest)


def _summary_warnings(*sources):
    out = []
    for src in sources:
        out.extend(src or [])
    return out


def cmd_eta(run: Run, out_dir, opts):
    cf, rt = run.coefficients()
    grid = run.cell_grid()
    num = run.cfg["numerics"]
    lam = run.cfg["analysis"]["lambda"]
    if lam is None:
        _, lam = run.lambda_grid()
    es = compute_eta(cf, lam, num["horizon"], burn_in=num["burn_in"], grid=grid)
    rep = harnack_report(es, cf)
    lm = means.least_mean(es.speed_samples(), num["T_max"])
    um = means.upper_mean(es.speed_samples(), num["T_max"])
    write_csv(os.path.join(out_dir, "eta.csv"),
              ["n", "S_lambda", "c_lambda", "harnack_ratio"],
              [es.t_nodes,
               es.logS,
               np.concatenate([es.c_samples, [np.nan]]),
               es.harnack_ratios])
    if run.cfg["output"]["profile_snapshots"]:
        cols = [es.t_nodes] + [es.profiles[:, j] for j in range(grid.n_x)]
        write_csv(os.path.join(out_dir, "eta_profiles.csv"),
                  ["n"] + [f"x{j}" for j in range(grid.n_x)], cols)
    write_csv(os.path.join(out_dir, "mean_trace.csv"),
              ["T", "least_windowed", "upper_windowed"],
              [lm.trace[:, 0], lm.trace[:, 1], um.trace[:, 1]])
    return {"lambda": lam, "burn_in_used": es.burn_in,
            "least_mean_c": lm.value, "upper_mean_c": um.value,
            "inf_harnack": rep.inf_ratio, "beta": rep.beta,
            "warnings": [] if lm.converged else ["least mean convergence warning"]}


def _speed_curve(run: Run, opts):
    cf, _ = run.coefficients()
    grid = run.cell_grid()
    num = run.cfg["numerics"]
    ana = run.cfg["analysis"]
    lgrid, lam_hat = run.lambda_grid()
    sc = speed.speed_curve(cf, lgrid, num["horizon"], grid,
                           burn_in=num["burn_in"], k0=ana["k0"],
                           T_max=num["T_max"], threads=opts.threads,
                           delta_tol=ana["delta_tol"])
    return cf, grid, sc, lam_hat


def _eigen_if_periodic(run: Run, cf, grid, lam_hat):
    if cf.time_period is None:
        return None
    lgrid = np.geomspace(0.4 * lam_hat, 3.0 * lam_hat, 12)
    return speed.kappa_curve(cf, lgrid, grid)


def _write_curve_csv(out_dir, sc, eigen, cf, grid):
    k_col = np.full(sc.lambda_grid.size, np.nan)
    kap_col = np.full(sc.lambda_grid.size, np.nan)
    if eigen is not None:
        for i, lam in enumerate(sc.lambda_grid):
            k_col[i] = speed.floquet_k(cf, lam, grid, drift_sign=1.0).k
            kap_col[i] = -speed.floquet_k(cf, lam, grid, drift_sign=-1.0).k
    write_csv(os.path.join(out_dir, "speed_curve.csv"),
              ["lambda", "lm_c", "um_c", "D_k0", "D_k0_2", "D_k0_4",
               "k_lambda", "kappa_lambda"],
              [sc.lambda_grid, sc.lm_c, sc.um_c,
               sc.D[:, 0], sc.D[:, 1], sc.D[:, 2], k_col, kap_col])


def cmd_speed_curve(run: Run, out_dir, opts):
    cf, grid, sc, lam_hat = _speed_curve(run, opts)
    eigen = _eigen_if_periodic(run, cf, grid, lam_hat)
    _write_curve_csv(out_dir, sc, eigen, cf, grid)
    return {
        "lambda_hat": lam_hat,
        "lambda_star": None, "c_star": None,
        "c_star_floquet": None if eigen is None else eigen.c_star_floquet,
        "c_star_lower": None if eigen is None else eigen.c_star_lower,
        "failures": sc.failures,
        "warnings": _summary_warnings(sc.warnings,
                                      None if eigen is None else eigen.warnings),
    }


def cmd_lambda_star(run: Run, out_dir, opts):
    cf, grid, sc, lam_hat = _speed_curve(run, opts)
    lam_star, c_star = speed.find_lambda_star(sc, cf, run.refine_tol(lam_hat))
    eigen = _eigen_if_periodic(run, cf, grid, lam_hat)
    _write_curve_csv(out_dir, sc, eigen, cf, grid)
    return {
        "lambda_hat": lam_hat,
        "lambda_star": lam_star,
        "c_star": c_star,
        "c_star_floquet": None if eigen is None else eigen.c_star_floquet,
        "c_star_lower": None if eigen is None else eigen.c_star_lower,
        "failures": sc.failures,
        "warnings": _summary_warnings(sc.warnings,
                                      None if eigen is None else eigen.warnings),
    }


def cmd_floquet(run: Run, out_dir, opts):
    cf, _ = run.coefficients()
    grid = run.cell_grid()
    lgrid, lam_hat = run.lambda_grid()
    ks = np.array([speed.floquet_k(cf, lam, grid).k for lam in lgrid])
    write_csv(os.path.join(out_dir, "floquet.csv"),
              ["lambda", "k_lambda", "k_over_lambda"],
              [lgrid, ks, ks / lgrid])
    eigen = speed.kappa_curve(cf, lgrid, grid)
    return {"c_star_floquet": eigen.c_star_floquet,
            "lambda_floquet_min": eigen.lambda_floquet_min,
            "warnings": eigen.warnings}


def cmd_kappa(run: Run, out_dir, opts):
    cf, _ = run.coefficients()
    grid = run.cell_grid()
    lgrid, _ = run.lambda_grid()
    eigen = speed.kappa_curve(cf, lgrid, grid)
    write_csv(os.path.join(out_dir, "kappa.csv"),
              ["lambda", "k_lambda", "kappa_lambda", "kappa_plus_lambda"],
              [eigen.lambda_grid, eigen.k_vals, eigen.kappa_vals,
               eigen.kappa_plus_vals])
    return {"c_star_floquet": eigen.c_star_floquet,
            "c_star_lower": eigen.c_star_lower,
            "lambda_kappa_max": eigen.lambda_kappa_max,
            "warnings": eigen.warnings}


def cmd_simulate(run: Run, out_dir, opts):
    cf, rt = run.coefficients()
    sim = run.cfg["simulate"]
    grid = front.auto_line_grid(cf, sim["T_sim"], dx=sim["dx"],
                                c_max=sim["c_max"], sample_dt=sim["sample_dt"],
                                x0=sim["x0"])
    tr = front.simulate_front(cf, rt, sim["init"], sim["T_sim"], grid,
                              theta=sim["theta"], sample_dt=sim["sample_dt"],
                              lambda0=sim["lambda0"], x0=sim["x0"],
                              c_max=sim["c_max"],
                              store_profiles=sim["store_profiles"])
    write_csv(os.path.join(out_dir, "front.csv"),
              ["t", "X_theta", "inst_speed", "profile_width"],
              [tr.times, tr.X_theta,
               np.concatenate([tr.inst_speed, [np.nan]]), tr.profile_width])
    if run.cfg["output"]["profile_snapshots"] and tr.snapshots is not None:
        stride = max(1, tr.snapshots.shape[0] // 50)
        cols = [tr.times[::stride]] + [tr.snapshots[::stride, j]
                                       for j in range(0, grid.n_x, max(1, grid.n_x // 400))]
        write_csv(os.path.join(out_dir, "front_profiles.csv"),
                  ["t"] + [f"x{j}" for j in range(len(cols) - 1)], cols)
    summary = {"found_front": tr.found_front, "fitted_speed": tr.fitted_speed,
               "theta": tr.theta, "clip_total": tr.clip_total, "warnings": []}
    if tr.found_front:
        est, _ = front.measured_speed_analysis(tr)
        summary["least_mean_speed"] = est.value
        if not est.converged:
            summary["warnings"].append("measured speed least mean convergence warning")
    else:
        summary["warnings"].append("no front")
    return summary


def cmd_oracle(run: Run, out_dir, opts):
    block = run.cfg["coefficients"]
    if not block.get("family"):
        raise ConfigError("the oracle needs a builtin coefficient family")
    res = speed.oracle(block["family"], block["params"])
    return {"family": res.family, "lambda_star": res.lambda_star,
            "c_star": res.c_star, "c_lambda": res.c_lambda, **res.details}


def cmd_verify(run: Run, out_dir, opts):
    seed = opts.seed if opts.seed else verify.DEFAULT_SEED
    results = verify.run_all(verify.QUICK, report=print, seed=seed)
    payload = {
        "profile": "quick",
        "criteria": [{"name": r.name, "passed": r.passed, "seconds": r.seconds,
                      "details": {k: str(v) for k, v in r.details.items()}}
                     for r in results],
        "all_passed": all(r.passed for r in results),
    }
    write_json(os.path.join(out_dir, "verify.json"), payload)
    return payload


COMMANDS = {
    "eta": cmd_eta,
    "speed-curve": cmd_speed_curve,
    "lambda-star": cmd_lambda_star,
    "floquet": cmd_floquet,
    "kappa": cmd_kappa,
    "simulate": cmd_simulate,
    "oracle": cmd_oracle,
    "verify": cmd_verify,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kppfronts",
        description="Critical front speeds of heterogeneous Fisher-KPP equations",
        epilog="Environment overrides: KPPFRONTS_OUT, KPPFRONTS_THREADS, "
               "KPPFRONTS_SEED, KPPFRONTS_BACKEND=numba|numpy.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None,
                        help="JSON config path (defaults apply when omitted)")
        sp.add_argument("--out", default=os.environ.get(ENV_PREFIX + "OUT"),
                        help="output directory (default: config output.directory)")
        sp.add_argument("--threads", type=int,
                        default=int(os.environ.get(ENV_PREFIX + "THREADS", "1")))
        sp.add_argument("--seed", type=int,
                        default=int(os.environ.get(ENV_PREFIX + "SEED", "0")))
    return parser


def main(argv=None) -> int:
    opts = build_parser().parse_args(argv)
    try:
        if opts.config is not None:
            cfg = load(opts.config)
        else:
            cfg = load_default()
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    run = Run(cfg)
    out_dir = opts.out or cfg["output"]["directory"]
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.perf_counter()
    try:
        summary = COMMANDS[opts.command](run, out_dir, opts)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        print(f"{opts.command} failed: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    wall = time.perf_counter() - t0
    write_json(os.path.join(out_dir, "summary.json"), summary)
    write_manifest(out_dir, cfg, opts.command, opts.seed, opts.threads, wall)
    if opts.command == "verify" and not summary["all_passed"]:
        return 1
    return 0


def load_default():
    from .config import resolve
    return resolve({})


if __name__ == "__main__":
    raise SystemExit(main())
