"""Command-line front end.

    degen-mixed certify     --config cfg.json [--k 8] [--out dir]
    degen-mixed run         --config cfg.json [--dt 0.01] [--scheme crank-nicolson]
    degen-mixed convergence --config cfg.json [--k 4,8,16]
    degen-mixed demo        [--out dir]

Exit status: 0 on success, 2 when certification fails or the step matrix is
singular, 1 on I/O or numerical errors.
"""

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import dae, problems, storage
from . import linalg as la

log = logging.getLogger("degen_mixed")

EXIT_OK, EXIT_ERROR, EXIT_CERT = 0, 1, 2

CONFIG_KEYS = {"command", "recipe", "params", "seed", "dt", "scheme", "k_list", "dt_factor",
               "dt_list", "temporal_k", "out", "tolerances", "data_scale", "zero_B_row",
               "zero_data", "save_state", "save_system"}


class ConfigError(ValueError):
    pass


def load_config(path, overrides=None):
    """Read a flat JSON config; recipe parameters may sit at the top level or
    under "params". Command-line overrides win."""
    cfg = json.loads(Path(path).read_text()) if path else {}
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    recipe = cfg.get("recipe")
    if recipe not in problems.RECIPES:
        raise ConfigError(f"config needs 'recipe' in {problems.RECIPES}, got {recipe!r}")
    params = dict(cfg.get("params", {}))
    for key in list(cfg):
        if key in problems.DEFAULTS[recipe] and key not in CONFIG_KEYS:
            params[key] = cfg.pop(key)
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg["params"] = params
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "k":
            ks = [int(v) for v in str(value).split(",")]
            cfg["k_list"] = ks
            params["k"] = ks[-1]
        else:
            cfg[key] = value
    cfg.setdefault("scheme", "backward-euler")
    cfg.setdefault("out", "out")
    cfg.setdefault("seed", 0)
    if "dt" in cfg and not float(cfg["dt"]) > 0:
        raise ConfigError("dt must be positive")
    ks = cfg.get("k_list")
    if ks is not None:
        if any(k < 2 for k in ks) or any(b <= a for a, b in zip(ks, ks[1:])):
            raise ConfigError("k values must be >= 2 and increasing")
    if cfg["scheme"] not in dae.SCHEMES:
        raise ConfigError(f"scheme must be one of {dae.SCHEMES}")
    return cfg


def recipe_from_config(cfg, **changes):
    tol = cfg.get("tolerances", {})
    params = dict(cfg["params"])
    params.update(changes)
    return problems.ProblemRecipe(
        name=cfg["recipe"], params=params, seed=int(cfg.get("seed", 0)),
        data_scale=float(cfg.get("data_scale", 1.0)), zero_B_row=bool(cfg.get("zero_B_row")),
        u0_tol=float(tol.get("u0", 1e-8)))


def _build(cfg, **changes):
    sys_ = problems.build(recipe_from_config(cfg, **changes), gate=False)
    if cfg.get("zero_data"):
        sys_ = dae.zero_data(sys_)
        sys_.meta["certificate"] = dae.certify(sys_, **_certify_kwargs(cfg))
    return sys_


def _certify_kwargs(cfg):
    tol = cfg.get("tolerances", {})
    kw = {}
    for key, arg in (("u0", "u0_tol"), ("symmetry", "sym_tol"),
                     ("monotonicity", "mono_tol"), ("gdot", "gdot_rtol")):
        if key in tol:
            kw[arg] = float(tol[key])
    if "gamma_grid" in tol:
        kw["gamma_grid"] = tuple(float(g) for g in tol["gamma_grid"])
    return kw


def _certificate(cfg, sys_):
    if cfg.get("tolerances"):
        cert = dae.certify(sys_, **_certify_kwargs(cfg))
        sys_.meta["certificate"] = cert
    return sys_.meta["certificate"]


def _report_header(cfg, sys_):
    return {"recipe": cfg["recipe"], "params": cfg["params"], "seed": cfg.get("seed", 0),
            "n": sys_.n, "m": sys_.m, "T": sys_.T}


# ---------------------------------------------------------------- commands

def cmd_certify(cfg):
    out = Path(cfg["out"])
    sys_ = _build(cfg)
    cert = _certificate(cfg, sys_)
    storage.write_json(out / "certificate.json", {**_report_header(cfg, sys_),
                                                  "certificate": cert.to_dict()})
    if cfg.get("save_system"):
        storage.save_system(sys_, out / "system")
    print(f"{cfg['recipe']}: beta={cert.beta:.6g} gamma={cert.gamma:g} alpha={cert.alpha:.6g} "
          f"verdict={'PASS' if cert.passed else 'FAIL'}")
    for name, ok in cert.verdict.items():
        if not ok:
            print(f"  {name} failed")
    return EXIT_OK if cert.passed else EXIT_CERT


def _run_system(cfg, sys_):
    cert = _certificate(cfg, sys_)
    if not cert.passed:
        raise dae.CertificationFailed(cert)
    dt = float(cfg.get("dt", sys_.T / 64))
    traj = dae.integrate(sys_, dt, cfg["scheme"], certificate=cert)
    return cert, traj


def run_report(cfg, sys_, cert, traj):
    rule = "left" if traj.scheme == "backward-euler" else "trapezoid"
    lam_rec = dae.recover_multiplier(sys_, traj, rule=rule)
    rec = dae.Trajectory(traj.times, traj.u, lam_rec, traj.scheme, traj.dt)
    energy = dae.energy_report(sys_, traj).to_dict()
    res, gnorm = traj.constraint_residuals(sys_)
    energy.update(
        max_lambda_norm=float(traj.lam_norms(sys_.Mm).max()),
        max_lambda_norm_recovered=float(rec.lam_norms(sys_.Mm).max()),
        max_u_norm=float(traj.u_norms(sys_.Mx).max()),
        max_constraint_residual=float(res.max()),
        max_relative_constraint_residual=float((res / (1 + gnorm)).max()),
        dt=traj.dt, scheme=traj.scheme, steps=traj.steps,
        gamma=cert.gamma, alpha=cert.alpha, beta=cert.beta)
    if "exact" in sys_.meta and not cfg.get("zero_data"):
        energy["errors"] = {
            "velocity_H1_L2time": problems.l2_in_time(
                problems.velocity_errors(sys_, traj), traj.times),
            "pressure_L2_L2time": problems.l2_in_time(
                problems.pressure_errors(sys_, traj), traj.times[1:]),
        }
    return energy


def cmd_run(cfg):
    out = Path(cfg["out"])
    sys_ = _build(cfg)
    try:
        cert, traj = _run_system(cfg, sys_)
    except dae.CertificationFailed as exc:
        storage.write_json(out / "certificate.json", {**_report_header(cfg, sys_),
                                                      "certificate": exc.certificate.to_dict()})
        raise
    energy = run_report(cfg, sys_, cert, traj)
    storage.write_json(out / "certificate.json", {**_report_header(cfg, sys_),
                                                  "certificate": cert.to_dict()})
    storage.write_trajectory(out / "trajectory.csv", sys_, traj)
    if cfg.get("save_state"):
        storage.write_state(out / "state.csv", traj)
    storage.write_json(out / "energy.json", {**_report_header(cfg, sys_), "energy": energy})
    print(f"{cfg['recipe']}: {traj.steps} steps of {traj.scheme}, dt={traj.dt:g}, "
          f"empirical C={energy['empirical_C']:.6g}, max |lambda|_M={energy['max_lambda_norm']:.3e}")
    return EXIT_OK


def _rate(e_coarse, e_fine):
    if e_coarse > 0 and e_fine > 0:
        return math.log2(e_coarse / e_fine)
    return math.nan


def spatial_study(cfg, k_list, dt_factor=0.25):
    """Velocity L2(0,T;H1) error for each k with dt = dt_factor h^2."""
    rows = []
    for k in k_list:
        sys_ = _build(cfg, k=k)
        cert = _certificate(cfg, sys_)
        if not cert.passed:
            raise dae.CertificationFailed(cert)
        h = 1.0 / k
        dt = dt_factor * h * h
        steps = max(1, round(sys_.T / dt))
        traj = dae.integrate(sys_, sys_.T / steps, cfg["scheme"], certificate=cert)
        err = problems.l2_in_time(problems.velocity_errors(sys_, traj), traj.times)
        res, gnorm = traj.constraint_residuals(sys_)
        rows.append({"k": k, "h": h, "dt": traj.dt, "error": err,
                     "constraint": float((res / (1 + gnorm)).max())})
        log.info("k=%d dt=%g error=%.4e", k, traj.dt, err)
    for prev, row in zip([None] + rows, rows):
        row["rate"] = math.nan if prev is None else _rate(prev["error"], row["error"])
    return rows


def temporal_study(cfg, k, dt_list):
    """Richardson study at fixed mesh: differences of successive dt-halvings
    in L2(0,T;X); rate = log2(d_j / d_{j+1})."""
    sys_ = _build(cfg, k=k)
    cert = _certificate(cfg, sys_)
    if not cert.passed:
        raise dae.CertificationFailed(cert)
    trajs = [dae.integrate(sys_, dt, cfg["scheme"], certificate=cert) for dt in dt_list]
    rows = []
    for a, b in zip(trajs, trajs[1:]):
        res, gnorm = b.constraint_residuals(sys_)
        rows.append({"k": k, "h": 1.0 / k, "dt": a.dt,
                     "error": dae.l2_time_distance(a, b, sys_.Mx),
                     "constraint": float((res / (1 + gnorm)).max())})
    for prev, row in zip([None] + rows, rows):
        row["rate"] = math.nan if prev is None else _rate(prev["error"], row["error"])
    return rows


RATES_HEADER = ["study", "k", "h", "dt", "error", "rate", "max_constraint_residual"]


def rates_table(spatial, temporal):
    rows = []
    for study, data in (("spatial", spatial), ("temporal", temporal)):
        for r in data:
            rows.append([study, str(r["k"]), r["h"], r["dt"], r["error"], r["rate"],
                         r["constraint"]])
    return rows


def format_rates(rows):
    lines = [f"{'study':<9} {'k':>4} {'h':>9} {'dt':>10} {'error':>12} {'rate':>7} "
             f"{'constraint':>11}"]
    for study, k, h, dt, err, rate, con in rows:
        rate_s = "-" if math.isnan(rate) else f"{rate:.3f}"
        lines.append(f"{study:<9} {k:>4} {h:>9.5f} {dt:>10.3e} {err:>12.4e} {rate_s:>7} "
                     f"{con:>11.2e}")
    return "\n".join(lines) + "\n"


def cmd_convergence(cfg):
    if cfg["recipe"] not in ("stokes-mms", "stokes-nonsolenoidal"):
        raise ConfigError("convergence needs a recipe with an exact solution "
                          "(stokes-mms or stokes-nonsolenoidal)")
    out = Path(cfg["out"])
    k_list = cfg.get("k_list", [4, 8, 16])
    spatial = spatial_study(cfg, k_list, float(cfg.get("dt_factor", 0.25)))
    T = float(cfg["params"].get("T", problems.DEFAULTS[cfg["recipe"]]["T"]))
    dt_list = cfg.get("dt_list", [T / 10, T / 20, T / 40, T / 80])
    temporal = temporal_study(cfg, int(cfg.get("temporal_k", k_list[-1])), dt_list)
    rows = rates_table(spatial, temporal)
    storage.write_csv(out / "rates.csv", RATES_HEADER, rows)
    text = format_rates(rows)
    storage.atomic_write_text(out / "rates.txt", text)
    print(text, end="")
    return EXIT_OK


def cmd_demo(cfg):
    """Certify and run a small Stokes and eddy-current case."""
    base = Path(cfg.get("out", "out"))
    status = EXIT_OK
    for recipe, params, dt in (("stokes-mms", {"k": 8, "T": 0.5}, 1 / 64),
                               ("eddy2d-conductor", {"k": 8, "T": 1.0}, 1 / 64)):
        sub = dict(recipe=recipe, params=params, dt=dt, scheme=cfg.get("scheme", "backward-euler"),
                   out=str(base / recipe), seed=0)
        status = max(status, cmd_certify(sub))
        status = max(status, cmd_run(sub))
    return status


COMMANDS = {"certify": cmd_certify, "run": cmd_run, "convergence": cmd_convergence,
            "demo": cmd_demo}


def make_parser():
    p = argparse.ArgumentParser(prog="degen-mixed",
                                description="Certify and integrate degenerate mixed "
                                            "parabolic systems.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON config file (required except for demo)")
    p.add_argument("--dt", type=float)
    p.add_argument("--k", help="mesh parameter, or comma-separated list for convergence")
    p.add_argument("--scheme", choices=dae.SCHEMES)
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    overrides = {"dt": args.dt, "k": args.k, "scheme": args.scheme, "out": args.out}
    try:
        if args.command == "demo" and not args.config:
            cfg = {"out": args.out or "out", "scheme": args.scheme or "backward-euler"}
        else:
            if not args.config:
                raise ConfigError(f"{args.command} needs --config")
            cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except dae.CertificationFailed as exc:
        print(f"certification failed: {exc}", file=sys.stderr)
        return EXIT_CERT
    except dae.StepMatrixSingular as exc:
        print(f"step matrix singular: {exc}", file=sys.stderr)
        return EXIT_CERT
    except (OSError, ValueError, la.LinAlgError, np.linalg.LinAlgError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
