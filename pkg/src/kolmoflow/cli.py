"""Command-line front end: ``kolmoflow <command> [flags]``.

Exit status: 0 all checks passed, 2 configuration error, 3 numerical
failure, 4 a check failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from . import io, ns, rigidity, stationary, verification
from .config import ConfigError, RunConfig, parse_config
from .spectral import DomainSpec, apply_multiplier, resample

log = logging.getLogger("kolmoflow")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CHECK = 0, 2, 3, 4
NUMERICAL_ERRORS = (
    ns.NumericalError,
    FloatingPointError,
    stationary.ConvergenceError,
    stationary.DegeneracyError,
    stationary.XMembershipError,
    np.linalg.LinAlgError,
)


def _version() -> str:
    try:
        return metadata.version("kolmoflow")
    except metadata.PackageNotFoundError:
        return "unknown"


def _status(checks: dict[str, bool]) -> int:
    return EXIT_OK if all(checks.values()) else EXIT_CHECK


# ---------------------------------------------------------------------------
# commands; each returns (exit status, deterministic report dict)


def _construct(p: dict, out: Path, seed: int):
    eps_list = p["epsilon"]
    runs, psis, checks = [], [], {}
    for eps in eps_list:
        Psi, F, rep = stationary.construct_fixed_point(eps, tol=p["tol"], max_iter=p["max_iter"], n=p["n"])
        sub = out / f"eps={eps!r}"
        sub.mkdir(parents=True, exist_ok=True)
        io.write_snapshot(sub / "Psi.kolm", Psi)
        io.write_snapshot(sub / "psi.kolm", rep.psi)
        l2, linf = verification.stationarity_residual(Psi)
        rel = l2 / verification.gradient_laplacian_norm(Psi)
        cat = verification.catseye_projection(Psi)
        expected = -(eps**2) * np.pi**2 / 128
        entry = {
            "epsilon": eps,
            "fixed_point": rep.to_dict(),
            "F_coefficients": F.full_coefficients(eps),
            "catseye": cat,
            "catseye_expected": expected,
            "catseye_ratio": cat / expected if eps > 0 else None,
            "stationarity_l2": l2,
            "stationarity_linf": linf,
            "stationarity_relative": rel,
            "equation_residual": verification.equation_residual(Psi, (F, eps)),
        }
        c = {
            f"eps={eps}: converged": rep.converged,
            f"eps={eps}: equation residual < 1e-10": rep.equation_residual < 1e-10,
            f"eps={eps}: stationarity < 1e-9": rel < 1e-9,
        }
        if eps > 0:
            c[f"eps={eps}: catseye ratio in [0.95, 1.05]"] = 0.95 <= entry["catseye_ratio"] <= 1.05
        if 0 < eps <= 0.02:
            c[f"eps={eps}: contraction <= 0.8"] = rep.contraction_factor <= 0.8
        entry["checks"] = c
        io.write_json(sub / "report.json", entry)
        checks.update(c)
        runs.append(entry)
        psis.append(rep.psi)
    report = {"runs": runs}
    if len(set(eps_list)) >= 3:
        fit = stationary.extrapolate_expansion(eps_list, psis)
        report["expansion"] = fit.as_dict()
    report["checks"] = checks
    return _status(checks), report


def _verify(p: dict, out: Path, seed: int):
    Psi = io.read_snapshot(p["snapshot"])
    l2, linf = verification.stationarity_residual(Psi)
    rel = l2 / verification.gradient_laplacian_norm(Psi)
    report = {
        "snapshot": str(p["snapshot"]),
        "stationarity_l2": l2,
        "stationarity_linf": linf,
        "stationarity_relative": rel,
    }
    checks = {f"stationarity < {p['stationarity_tol']}": rel < p["stationarity_tol"]}
    d = Psi.domain
    if d.kind == "torus" and d.delta == 1.0:
        report["catseye"] = verification.catseye_projection(Psi)
        shear_part = stationary.cos_amplitude(Psi, 0, 1)
        rest = Psi - stationary.cos_mode(d, 0, 1) * shear_part
        try:
            lam, res = verification.gevrey_radius_fit(rest)
            report["gevrey_lambda"], report["gevrey_fit_residual"] = lam, res
        except ValueError as e:
            report["gevrey_error"] = str(e)
    if p["report"]:
        meta = json.loads(Path(p["report"]).read_text())
        coeffs = meta["F_coefficients"]
        r = verification.equation_residual(Psi, coeffs)
        report["equation_residual"] = r
        checks["equation residual < 1e-9"] = r < 1e-9
    report["checks"] = checks
    return _status(checks), report


def _initial(p: dict):
    d = DomainSpec("torus", p["delta"], p["n"], p["n"])
    eps = p["epsilon"]
    init = p["initial"]
    if init == "stationary":
        if p["delta"] != 1.0:
            raise ConfigError("initial = stationary needs delta = 1", key="initial")
        Psi, _, _ = stationary.construct_fixed_point(eps, n=64)
        return apply_multiplier(resample(Psi, p["n"]), "laplacian")
    bar = stationary.cos_mode(d, 0, 1) * -1.0
    sinsin = ns._sin_sin(d, 1, 1)
    return {"bar": bar, "bar_sinsin": bar - sinsin * eps, "sinsin": sinsin}[init]


def _simulate(p: dict, out: Path, seed: int):
    omega0 = _initial(p)
    cfg = ns.SimConfig(
        nu=p["nu"], dt=p["dt"], t_end=p["t_end"], domain=omega0.domain, mode=p["mode"],
        record_every=p["record_every"], epsilon=p["epsilon"],
    )
    ckdir = out / "checkpoints"

    def save(step, t, f):
        ckdir.mkdir(parents=True, exist_ok=True)
        io.write_snapshot(ckdir / f"omega_{step:08d}.kolm", f)

    rec = ns.run(omega0, cfg, checkpoint_every=p["checkpoint_every"], on_checkpoint=save)
    io.write_csv(out / "series.csv", ns.SimulationRecord.CSV_COLUMNS, rec.rows())
    io.write_snapshot(out / "omega_final.kolm", rec.final)
    report = {
        "steps": int(round(p["t_end"] / p["dt"])),
        "final_l2_PD": rec.l2_PD[-1],
        "final_l2_PK": rec.l2_PK[-1],
        "max_heat_deviation": max(rec.heat_deviation),
        "checks": {},
    }
    return EXIT_OK, report


def _nodecay(p: dict, out: Path, seed: int):
    res = ns.no_decay_experiment(p["epsilon"], p["nu"], p["n"], dt=p["dt"], control=p["control"])
    io.write_csv(out / "series.csv", ns.SimulationRecord.CSV_COLUMNS, res.record.rows())
    if res.control_record is not None:
        io.write_csv(out / "control_series.csv", ns.SimulationRecord.CSV_COLUMNS, res.control_record.rows())
    report = res.summary()
    checks = {f"min_ratio >= {p['threshold']}": res.min_ratio >= p["threshold"]}
    if res.control_min_ratio is not None:
        checks["control ratio below stationary-data ratio"] = res.control_min_ratio < res.min_ratio
    checks["heat deviation <= epsilon/100"] = res.max_heat_deviation <= res.epsilon / 100
    report["checks"] = checks
    return _status(checks), report


def _ratefit(p: dict, out: Path, seed: int):
    nus = p["nus"]
    recs = [ns.linear_bar_run(nu, delta=p["delta"], ny=p["ny"]) for nu in nus]
    heat = [ns.linear_bar_run(nu, delta=p["delta"], ny=p["ny"], initial="shear") for nu in nus]
    for nu, r in zip(nus, recs):
        io.write_csv(out / f"linear_bar_nu={nu!r}.csv", ns.SimulationRecord.CSV_COLUMNS, r.rows())
    expo, pref = ns.decay_rate_fit(recs, nus)
    hexpo, hpref = ns.decay_rate_fit(heat, nus, use="total")
    report = {
        "delta": p["delta"],
        "nus": nus,
        "rates": [ns.decay_rate(r, nu) for r, nu in zip(recs, nus)],
        "exponent": expo,
        "prefactor": pref,
        "heat_exponent": hexpo,
        "heat_prefactor": hpref,
    }
    checks = {
        f"exponent within {p['target_tol']} of {p['target']}": abs(expo - p["target"]) <= p["target_tol"],
        f"heat exponent within {p['heat_tol']} of 1": abs(hexpo - 1) <= p["heat_tol"],
    }
    report["checks"] = checks
    return _status(checks), report


def _coercivity(p: dict, out: Path, seed: int):
    if p["channel"]:
        s = rigidity.coercivity_test(p["samples"], p["epsilon"], seed=seed)
        cols = rigidity.CSV_COLUMNS
        io.write_csv(out / "samples.csv", cols, ([r[c] for c in cols] for r in s.rows))
        report = s.to_dict()
        checks = {"no inequality violations": s.passes}
    else:
        if p["delta"] <= 0:
            raise ConfigError("coercivity needs delta > 0 or channel = true", key="delta")
        c, mode = rigidity.coercivity_constant(p["delta"], p["kmax"])
        report = {"delta": p["delta"], "c_delta": c, "c_delta_exact": str(rigidity.coercivity_constant_exact(p["delta"], p["kmax"])), "attaining_mode": list(mode)}
        checks = {"c_delta > 0": c > 0}
    report["checks"] = checks
    return _status(checks), report


HANDLERS = {
    "construct": _construct,
    "verify": _verify,
    "simulate": _simulate,
    "nodecay": _nodecay,
    "ratefit": _ratefit,
    "coercivity": _coercivity,
}


def _sweep_one(args):
    cmd, params, out, seed = args
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        status, report = HANDLERS[cmd](params, out, seed)
    except NUMERICAL_ERRORS as e:
        status, report = EXIT_NUMERICAL, {"error": f"{type(e).__name__}: {e}"}
    io.write_json(out / "report.json", report)
    return status, report


def _sweep(cfg: RunConfig, out: Path):
    sw = cfg.sweep
    jobs = []
    for v in sw["values"]:
        params = dict(cfg.params)
        key = sw["parameter"]
        params[key] = [v] if isinstance(params[key], list) else type(params[key])(v)
        jobs.append((sw["command"], params, str(out / f"{key}={v!r}"), cfg.seed))
    with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs))) as pool:
        results = list(pool.map(_sweep_one, jobs))
    statuses = [s for s, _ in results]
    report = {
        "command": sw["command"],
        "parameter": sw["parameter"],
        "values": sw["values"],
        "runs": [{"value": v, "status": s, "report": r} for v, (s, r) in zip(sw["values"], results)],
    }
    if sw["command"] == "construct" and sw["parameter"] == "epsilon" and len(set(sw["values"])) >= 3:
        psis = [io.read_snapshot(out / f"epsilon={v!r}" / f"eps={v!r}" / "psi.kolm") for v in sw["values"]]
        report["expansion"] = stationary.extrapolate_expansion(sw["values"], psis).as_dict()
    if any(s == EXIT_NUMERICAL for s in statuses):
        return EXIT_NUMERICAL, report
    return (EXIT_OK if all(s == EXIT_OK for s in statuses) else EXIT_CHECK), report


def execute(cfg: RunConfig, argv: list[str] | None = None) -> int:
    """Run one configured command, writing report.json, manifest.json and
    config.ini (plus command-specific data) into ``cfg.out``."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    error = None
    try:
        if cfg.command == "sweep":
            status, report = _sweep(cfg, out)
        else:
            status, report = HANDLERS[cfg.command](cfg.params, out, cfg.seed)
    except NUMERICAL_ERRORS as e:
        status, report, error = EXIT_NUMERICAL, {"error": f"{type(e).__name__}: {e}"}, str(e)
        log.error("numerical failure: %s", e)
    report = {"command": cfg.command, "config": cfg.echo(), "status": status, **report}
    io.write_json(out / "report.json", report)
    ini = cfg.to_ini()
    (out / "config.ini").write_text(ini)
    manifest = {
        "command": cfg.command,
        "config": cfg.echo(),
        "config_ini": ini,
        "provenance": f"kolmoflow {_version()} config-sha1:{hashlib.sha1(ini.encode()).hexdigest()[:12]}",
        "versions": {"kolmoflow": _version(), "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()},
        "seed": cfg.seed,
        "argv": argv if argv is not None else sys.argv[1:],
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
        "wall_time_s": time.perf_counter() - t0,
        "exit_status": status,
        "error": error,
    }
    io.write_json(out / "manifest.json", manifest)
    for name, ok in report.get("checks", {}).items():
        log.info("%s %s", "PASS" if ok else "FAIL", name)
    return status


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kolmoflow", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI config file; flags override it")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("construct", parents=[common], help="build stationary states")
    s.add_argument("--epsilon", help="one value or a comma-separated list")
    s.add_argument("--tol", type=float)
    s.add_argument("--n", type=int)
    s.add_argument("--max-iter", dest="max_iter", type=int)

    s = sub.add_parser("verify", parents=[common], help="check a stored stream function")
    s.add_argument("--snapshot")
    s.add_argument("--report", help="construct report.json providing F")
    s.add_argument("--stationarity-tol", dest="stationarity_tol", type=float)

    s = sub.add_parser("simulate", parents=[common], help="Navier-Stokes / linear bar / heat runs")
    s.add_argument("--nu", type=float)
    s.add_argument("--t-end", dest="t_end", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--mode")
    s.add_argument("--delta", type=float)
    s.add_argument("--n", type=int)
    s.add_argument("--initial")
    s.add_argument("--epsilon", type=float)
    s.add_argument("--record-every", dest="record_every", type=int)
    s.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)

    s = sub.add_parser("nodecay", parents=[common], help="run from the stationary data and a generic control")
    s.add_argument("--nu", type=float)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--n", type=int)
    s.add_argument("--dt", type=float)
    s.add_argument("--threshold", type=float)
    s.add_argument("--no-control", dest="control", action="store_const", const=False)

    s = sub.add_parser("ratefit", parents=[common], help="decay exponent of the linear bar problem")
    s.add_argument("--delta", type=float)
    s.add_argument("--nus", help="comma-separated viscosities")
    s.add_argument("--ny", type=int)

    s = sub.add_parser("coercivity", parents=[common], help="torus constant or channel campaign")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--delta", type=float)
    g.add_argument("--channel", action="store_const", const=True)
    s.add_argument("--samples", type=int)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--kmax", type=int)

    sub.add_parser("sweep", parents=[common], help="parallel runs over one parameter (needs --config)")
    return ap


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    skip = {"command", "config", "verbose"}
    overrides = {k: v for k, v in vars(args).items() if k not in skip and v is not None}
    try:
        text = args.config.read_text() if args.config else ""
        if args.command == "sweep" and not args.config:
            raise ConfigError("sweep needs --config")
        cfg = parse_config(text, command=args.command, overrides=overrides)
    except OSError as e:
        print(f"kolmoflow: cannot read config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as e:
        print(f"kolmoflow: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return execute(cfg, argv)
    except ConfigError as e:
        print(f"kolmoflow: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
