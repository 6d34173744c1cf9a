"""Command line: check | verify | rho | energy | step3.

Exit codes: 0 when every selected check passes, 1 when one fails, 2 for an
unreadable or invalid configuration and for infeasible parameters.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .conditions import check_b, check_c, check_e, z_range
from .config import RunConfig, load_config
from .divergence import check_divergence
from .dscan import check_d_global
from .energy import minimality_experiment
from .errors import CalibError, ConfigError, InfeasibleParams
from .field import CalibrationField
from .harmonic import GEOMETRY, SQRT3, check_hypotheses
from .oracles import characteristic_oracles, rho_oracles
from .params import select_params
from .report import ConditionResult, VerificationReport, _clean
from .step3 import Step3Geometry, check_m_functions, delta_range, step3_containment

log = logging.getLogger("mscalib")

ALL_CONDITIONS = ("a", "b", "c", "d", "e", "oracles", "step3")
EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _setup_logging() -> None:
    level = os.environ.get("CALIB_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out or cfg.data["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _plots_enabled(args, cfg: RunConfig) -> bool:
    return cfg.data["plots"] and not args.no_plots


def _seed(args, cfg: RunConfig) -> int:
    return cfg.seed if args.seed is None else args.seed


def _build_field(cfg: RunConfig):
    triple = cfg.triple()
    params = select_params(triple, cfg.overrides)
    return triple, params, CalibrationField(triple, params)


# ----------------------------------------------------------------------

def cmd_check(args, cfg: RunConfig) -> int:
    triple = cfg.triple()
    rep = check_hypotheses(triple, tol=cfg.section("tolerances")["hypotheses"])
    payload = {"triple": triple.to_dict(), "hypotheses": rep.to_dict()}
    print(json.dumps(_clean(payload), indent=2, sort_keys=True))
    if args.out:
        _write_json(_out_dir(args, cfg) / "check.json", payload)
    return EXIT_PASS if rep.passed else EXIT_FAIL


def _parse_conditions(text: str | None) -> list[str]:
    if not text:
        return list(ALL_CONDITIONS)
    items = [c.strip() for c in text.split(",") if c.strip()]
    bad = [c for c in items if c not in ALL_CONDITIONS]
    if bad:
        raise ConfigError(f"unknown condition(s) {bad}; choose from {','.join(ALL_CONDITIONS)}")
    return [c for c in ALL_CONDITIONS if c in items]


def _step3_condition(field: CalibrationField, delta: float, tol: float, m_points: int):
    geom = Step3Geometry(field.params.epsilon, delta)
    geo = step3_containment(geom)
    m = check_m_functions(field, delta, n=m_points, tol=tol)
    passed = geo.passed and m["pass"]
    worst = max(v["max"] for v in m["M"].values())
    return ConditionResult(
        name="step3", passed=bool(passed), margin=min(geo.min_slack, 1 - tol - worst),
        tolerance=tol, samples=3 * (m_points + 1),
        witness=max(m["M"].values(), key=lambda v: v["max"]),
        details={"geometry": geo.to_dict(), "m_functions": m})


def cmd_verify(args, cfg: RunConfig) -> int:
    conds = _parse_conditions(args.conditions)
    out = _out_dir(args, cfg)
    tol = cfg.section("tolerances")
    scan = cfg.section("scan")
    seed = _seed(args, cfg)
    grid = args.grid or scan["grid"]
    refine = scan["refine"] if args.refine is None else args.refine
    brute = scan["brute"] if args.brute is None else args.brute
    triple, params, field = _build_field(cfg)
    report = VerificationReport(params.to_dict(), triple.to_dict())
    report.extra["conditions_run"] = conds
    try:
        for c in conds:
            log.info("running %s", c)
            if c == "a":
                report.conditions["a"] = check_divergence(
                    field, scan["n_boxes"], tol["divergence"], seed, scan["per_family"])
            elif c == "b":
                report.conditions["b"] = check_b(field, scan["n_samples"], seed, tol["b"])
            elif c == "c":
                report.conditions["c"] = check_c(field, scan["n_samples"], seed, tol["c"])
            elif c == "d":
                report.conditions["d"] = check_d_global(
                    field, grid, refine, tol["d"], brute=brute or None,
                    threads=max(1, args.threads))
            elif c == "e":
                report.conditions["e"] = check_e(field, scan["per_ray"], tol.get("e"))
            elif c == "oracles":
                report.oracles.update(rho_oracles(field, tol["oracle_rel"], tol["oracle_abs"]))
                report.oracles.update(characteristic_oracles(field, tol["oracle_rel"]))
            elif c == "step3":
                delta = cfg.section("step3").get("delta", params.epsilon / 2)
                report.conditions["step3"] = _step3_condition(field, delta, tol["m"],
                                                              scan["m_points"])
    except CalibError as exc:
        report.extra["error"] = f"{type(exc).__name__}: {exc}"
        log.error("verification aborted: %s", exc)
    finally:
        (out / "report.json").write_text(report.dumps() + "\n")
        _write_csv(out / "witnesses.csv", ["condition", "pass", "margin", "tolerance", "witness"],
                   [[k, v.passed, v.margin, v.tolerance, json.dumps(_clean(v.witness), sort_keys=True)]
                    for k, v in report.conditions.items()])
        if report.oracles:
            _write_csv(out / "oracles.csv",
                       ["oracle", "computed", "expected", "error", "tolerance", "kind", "pass",
                        "in_acceptance"],
                       [[k, o.computed, o.expected, o.error, o.tolerance, o.kind, o.passed,
                         o.in_acceptance] for k, o in report.oracles.items()])
        if "a" in report.conditions and report.conditions["a"].table:
            _write_csv(out / "divergence_boxes.csv",
                       ["family", "x0", "x1", "y0", "y1", "z0", "z1", "flux", "flux_over_area"],
                       report.conditions["a"].table)
    for k, v in report.conditions.items():
        print(f"{k:8s} {'PASS' if v.passed else 'FAIL'}  margin={v.margin:.3e}  tol={v.tolerance:.1e}")
    if report.oracles:
        bad = [k for k, o in report.oracles.items() if o.in_acceptance and not o.passed]
        print(f"oracles  {'PASS' if not bad else 'FAIL ' + ','.join(bad)}")
    if "d" in report.conditions:
        d = report.conditions["d"].details
        print(f"max rho = {d['max_rho']:.15f} (on jump set: {d['argmax_on_jump']})")
    if _plots_enabled(args, cfg):
        from . import plotting
        plotting.region_section(field, out / "regions.png")
        if "a" in report.conditions and report.conditions["a"].table:
            t = report.conditions["a"].table
            plotting.divergence_fluxes([r[0] for r in t], [r[-1] for r in t],
                                       tol["divergence"], out / "divergence.png")
        if "d" in report.conditions:
            w = report.conditions["d"].details["off_jump_argmax"]
            t1, t2, rho = _rho_slice(field, (w["x"], w["y"]), 121)
            plotting.rho_slice(t1, t2, rho, out / "rho_slice.png", (w["x"], w["y"]))
    print(f"report written to {out / 'report.json'}")
    if "error" in report.extra:
        return EXIT_FAIL
    return EXIT_PASS if report.passed else EXIT_FAIL


def _rho_slice(field: CalibrationField, point, n: int):
    lo, hi = z_range(field)
    t = np.linspace(lo, hi, n)
    pd = field.point_data(point[0], point[1])
    A = field.antiderivative(pd, t[None, :])[0]
    rho = np.linalg.norm(A[None, :, :] - A[:, None, :], axis=-1)
    return t, t, rho


def cmd_rho(args, cfg: RunConfig) -> int:
    out = _out_dir(args, cfg)
    rc = cfg.section("rho")
    mode = args.mode or rc["mode"]
    triple, params, field = _build_field(cfg)
    r = params.u_radius
    n = rc["n"]
    if mode == "along-ray":
        ray = args.ray or rc["ray"]
        i, j = GEOMETRY.ray_sectors(ray)
        d = GEOMETRY.ray_direction(ray)
        s = r * np.linspace(0.0, 1.0, n)
        pd = field.point_data(s * d[0], s * d[1])
        I = field.band_integral(pd, pd.u[i], pd.u[j])
        rho = np.linalg.norm(I, axis=-1)
        _write_csv(out / f"rho_{ray}.csv", ["s", "x", "y", "t1", "t2", "rho"],
                   zip(s.tolist(), pd.x.tolist(), pd.y.tolist(), pd.u[i].tolist(),
                       pd.u[j].tolist(), rho.tolist()))
        summary = {"mode": mode, "ray": ray, "max_abs_rho_minus_1": float(np.max(np.abs(rho - 1)))}
        if _plots_enabled(args, cfg):
            from . import plotting
            plotting.rho_along_ray(s, rho, out / f"rho_{ray}.png", ray)
    else:
        point = rc.get("point") or [0.25 * r, 0.1 * r]
        if math.hypot(*point) > r:
            raise ConfigError(f"rho.point {point} lies outside U (radius {r:.4g})")
        t1, t2, rho = _rho_slice(field, point, n)
        T1, T2 = np.meshgrid(t1, t2, indexing="ij")
        _write_csv(out / "rho_slice.csv", ["x", "y", "t1", "t2", "rho"],
                   ([point[0], point[1], a, b, v] for a, b, v in
                    zip(T1.ravel().tolist(), T2.ravel().tolist(), rho.ravel().tolist())))
        summary = {"mode": mode, "point": point, "max_rho": float(rho.max()),
                   "max_diagonal": float(np.max(np.abs(np.diag(rho))))}
        if _plots_enabled(args, cfg):
            from . import plotting
            plotting.rho_slice(t1, t2, rho, out / "rho_slice.png", point)
    summary["u_radius"] = r
    _write_json(out / "rho.json", summary)
    print(json.dumps(_clean(summary), sort_keys=True))
    return EXIT_PASS


def cmd_energy(args, cfg: RunConfig) -> int:
    out = _out_dir(args, cfg)
    ec = cfg.section("energy")
    triple = cfg.triple()
    params = select_params(triple, cfg.overrides)
    rep = minimality_experiment(triple, params.u_radius, ec["n_competitors"], _seed(args, cfg),
                                ec["mesh_n"], ec["erasure_n"], ec["slack_rel"])
    rep.write_csv(out / "energy.csv")
    summary = rep.to_dict()
    exp_ok = rep.exponent is not None and 1.8 <= rep.exponent <= 2.2
    summary["bump_exponent_in_range"] = bool(exp_ok)
    _write_json(out / "energy.json", summary)
    if _plots_enabled(args, cfg):
        from . import plotting
        plotting.energy_gaps(rep, out / "energy.png")
    print(f"E(u) = {rep.energy_u.total:.12g}  min gap = {rep.min_gap:.3e}  "
          f"slack = {rep.slack:.1e}  status = {rep.status}  bump exponent = {rep.exponent:.4f}")
    return EXIT_PASS if rep.passed and exp_ok else EXIT_FAIL


def cmd_step3(args, cfg: RunConfig) -> int:
    out = _out_dir(args, cfg)
    sc = cfg.section("step3")
    results, rows = [], []
    ok = True
    for eps in sc["epsilons"]:
        for frac in sc["delta_fractions"]:
            rep = step3_containment(Step3Geometry(eps, frac * eps))
            d = rep.to_dict()
            results.append(d)
            for name, c in d["checks"].items():
                rows.append([eps, frac * eps, name, c["status"], c["slack"]])
            if eps < SQRT3:
                ok &= rep.passed
    payload = {"cases": results}
    if args.delta_range or sc["delta_range"]:
        _, params, field = _build_field(cfg)
        payload["delta_range"] = delta_range(field)
    _write_json(out / "step3.json", payload)
    _write_csv(out / "step3.csv", ["epsilon", "delta", "check", "status", "slack"], rows)
    for r in rows:
        print(f"eps={r[0]:<6g} delta={r[1]:<8.4g} {r[2]:18s} {r[3]:14s} slack={r[4]: .3e}")
    if _plots_enabled(args, cfg):
        from . import plotting
        for eps in sc["epsilons"]:
            plotting.step3_sets(Step3Geometry(eps, eps / 2), out / f"step3_eps{eps:g}.png")
    return EXIT_PASS if ok else EXIT_FAIL


# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mscalib",
                                description="Calibration checks for Mumford-Shah triple junctions")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON run configuration")
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=1, help="worker threads for scans")
    common.add_argument("--no-plots", action="store_true", help="skip PNG figures")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("check", parents=[common], help="validate the candidate triple")
    v = sub.add_parser("verify", parents=[common], help="build the field and run the checks")
    v.add_argument("--conditions", default=None,
                   help=f"comma list from {','.join(ALL_CONDITIONS)} (default: all)")
    v.add_argument("--grid", type=int, default=None, help="points per axis of the coarse rho scan")
    v.add_argument("--refine", type=int, default=None, help="refinement rounds of the rho scan")
    v.add_argument("--brute", type=int, default=None,
                   help="points per axis of the brute-force cross-check (0 disables)")
    r = sub.add_parser("rho", parents=[common], help="sample rho for plotting")
    r.add_argument("--mode", choices=["along-ray", "slice"], default=None)
    r.add_argument("--ray", choices=["S_01", "S_12", "S_02"], default=None)
    sub.add_parser("energy", parents=[common], help="competitor energy experiment")
    s = sub.add_parser("step3", parents=[common], help="polygon containments")
    s.add_argument("--delta-range", action="store_true", help="also bisect the admissible delta")
    return p


COMMANDS = {"check": cmd_check, "verify": cmd_verify, "rho": cmd_rho,
            "energy": cmd_energy, "step3": cmd_step3}


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleParams as exc:
        print(f"infeasible parameters: {exc}", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
