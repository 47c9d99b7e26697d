"""Command-line driver: ``relaxctl {certify,chatter,calcvar,gradcheck} --config run.json``.

Exit codes: 0 when every requested check passes, 1 on a mathematical
failure, 2 on malformed input.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import calcvar, library
from .certificate import CertifyOptions, certify
from .chattering import convergence_report
from .errors import InputError, NormalityError, PreconditionError
from .ode import Trajectory
from .problem import check_gradients, random_samples
from .relaxed import RelaxedControl, decompose_along_trajectory

log = logging.getLogger("relaxctl")

BUILTINS = ("example1", "example2", "quadratic_cv")


@dataclass
class RunConfig:
    builtin: str
    params: dict = field(default_factory=dict)
    control_bound: float = 10.0
    grid: int = 1000
    tolerances: dict = field(default_factory=lambda: {"tol_cert": 1e-6, "tol_max": 1e-6, "tol_cv": 1e-8})
    control_grid_points: int = 2001
    Ns: list = field(default_factory=lambda: [4, 16, 64, 256])
    options: dict = field(default_factory=dict)
    trajectory_csv: str | None = None
    relaxed_control_csv: str | None = None
    seed: int = 0
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, data: dict, grid: int | None = None, seed: int | None = None) -> "RunConfig":
        if not isinstance(data, dict):
            raise InputError("config must be a JSON object")
        data = json.loads(json.dumps(data))
        if grid is not None:
            data["grid"] = grid
        if seed is not None:
            data["seed"] = seed
        builtin = data.get("builtin")
        if builtin not in BUILTINS:
            raise InputError(f"'builtin' must be one of {BUILTINS}, got {builtin!r}")
        tol = {"tol_cert": 1e-6, "tol_max": 1e-6, "tol_cv": 1e-8}
        tol.update(data.get("tolerances", {}))
        cfg = cls(
            builtin=builtin,
            params=dict(data.get("params", {})),
            control_bound=float(data.get("control_bound", 10.0)),
            grid=int(data.get("grid", 1000)),
            tolerances=tol,
            control_grid_points=int(data.get("control_grid_points", 2001)),
            Ns=list(data.get("Ns", [4, 16, 64, 256])),
            options=dict(data.get("options", {})),
            trajectory_csv=data.get("trajectory_csv"),
            relaxed_control_csv=data.get("relaxed_control_csv"),
            seed=int(data.get("seed", 0)),
            raw=data,
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.grid < 10:
            raise InputError(f"grid size M must be >= 10, got {self.grid}")
        for k, v in self.tolerances.items():
            if not (isinstance(v, (int, float)) and v > 0):
                raise InputError(f"tolerance {k} must be positive, got {v!r}")
        if not self.Ns or any(not isinstance(n, int) or n < 1 for n in self.Ns):
            raise InputError(f"Ns must be positive integers, got {self.Ns}")
        if any(b <= a for a, b in zip(self.Ns, self.Ns[1:])):
            raise InputError(f"Ns must be strictly increasing, got {self.Ns}")
        if self.control_bound <= 0 or self.control_grid_points < 2:
            raise InputError("control_bound must be positive and control_grid_points >= 2")

    @property
    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True).encode()).hexdigest()

    def certify_options(self) -> CertifyOptions:
        return CertifyOptions(
            tol_cert=self.tolerances["tol_cert"],
            tol_max=self.tolerances["tol_max"],
            control_points=self.control_grid_points,
        )


# ----------------------------------------------------------------------
# building problems from configs


def _lagrangian(cfg: RunConfig):
    p = cfg.params
    if cfg.builtin == "example2":
        return library.example2_from_name(p.get("L", "x_udot_sq"))
    spec = library.lookup(library.L_SPECS, p.get("L", "udot_sq"), "L_spec")
    return library.lagrangian_problem(
        spec, p.get("t0", 0.0), p.get("t1", 1.0), p.get("x0", 0.0), p.get("x1", 1.0), name="quadratic_cv"
    )


def _lagrangian_candidate(cfg: RunConfig, lp):
    if cfg.trajectory_csv:
        traj = Trajectory.from_csv(cfg.trajectory_csv)
    else:
        traj = library.straight_line(lp, cfg.grid)
    if cfg.relaxed_control_csv:
        return traj, RelaxedControl.from_csv(cfg.relaxed_control_csv)
    vertices = cfg.options.get("vertices")
    if vertices is None:
        return traj, RelaxedControl.ordinary(traj.grid, traj.velocity())
    rc, bad = decompose_along_trajectory(traj, np.asarray(vertices, dtype=float).reshape(len(vertices), -1), lp)
    if rc is None:
        raise InputError(f"vertices do not decompose the trajectory at nodes {bad[:10]}")
    return traj, rc


def build_control(cfg: RunConfig):
    """Problem, candidate trajectory, relaxed control, and default chatter mode."""
    p = cfg.params
    if cfg.builtin == "example1":
        problem = library.example1_from_names(
            p.get("f", "linear_half"), p.get("g", "square"), int(p.get("m", 2)), cfg.control_bound
        )
        if cfg.trajectory_csv and cfg.relaxed_control_csv:
            traj = Trajectory.from_csv(cfg.trajectory_csv)
            rc = RelaxedControl.from_csv(cfg.relaxed_control_csv)
        else:
            traj, rc = library.example1_candidate(
                problem, cfg.grid, float(p.get("perturbation", 0.0)), float(p.get("offset", 0.0))
            )
        return problem, traj, rc, "example1"
    lp = _lagrangian(cfg)
    line, rc = _lagrangian_candidate(cfg, lp)
    problem = library.lagrangian_to_control(lp, cfg.control_bound)
    return problem, library.lagrangian_candidate(lp, line, rc), rc, "generic"


# ----------------------------------------------------------------------
# commands


def _header(cfg: RunConfig, command: str) -> dict:
    return {"command": command, "config_hash": cfg.digest, "grid": cfg.grid, "tolerances": cfg.tolerances}


def _floats(a) -> list:
    return [float(v) for v in np.ravel(a)]


def cmd_certify(cfg: RunConfig, out: Path | None = None):
    problem, traj, rc, _ = build_control(cfg)
    cert = certify(problem, traj, rc, cfg.certify_options())
    cands = []
    for mt, rep in zip(cert.candidates, cert.reports):
        cands.append(
            {
                "lambda0": float(mt.lambda0),
                "lambda_f": _floats(mt.lambda_f),
                "lambda_g": _floats(mt.lambda_g),
                "normalized": True,
                "passed": rep.passed,
                "conditions": rep.as_dict(),
            }
        )
    normality = cert.normality
    report = _header(cfg, "certify")
    report.update(
        {
            "nullspace_dim": cert.nullspace_dim,
            "candidates": cands,
            "normality": "no_certificate" if normality == "no_certificate" else normality == "normal",
            "note": f"normality is numerical at resolution M={traj.grid.M}",
        }
    )
    if out is not None:
        traj.to_csv(out / "trajectory.csv")
        rc.to_csv(out / "relaxed_control.csv")
        if cert.passing:
            cert.candidates[cert.passing[0]].adjoint.to_csv(out / "adjoint.csv")
    return (0 if cert.passing else 1), report


def _bound(spec, N):
    return float(spec["coef"]) / float(N) ** float(spec["power"])


def cmd_chatter(cfg: RunConfig, out: Path | None = None, override_normality: bool = False):
    problem, traj, rc, default_mode = build_control(cfg)
    mode = cfg.options.get("mode", default_mode)
    gap_spec = cfg.options.get("gap_bound", {"coef": 4.0, "power": 2})
    dev_spec = cfg.options.get("dev_bound", {"coef": 2.0, "power": 1})
    report = _header(cfg, "chatter")
    normality = None
    if not override_normality:
        cert = certify(problem, traj, rc, cfg.certify_options())
        normality = cert.normality == "normal"
        report["normality"] = cert.normality
    try:
        conv = convergence_report(
            problem,
            traj,
            rc,
            cfg.Ns,
            J_star=cfg.options.get("J_star"),
            mode=mode,
            q=int(cfg.options.get("q", 16)),
            normality=normality,
            override_normality=override_normality,
        )
    except NormalityError as exc:
        report.update({"pass": False, "error": str(exc)})
        return 1, report
    rows = []
    ok = True
    for r in conv.rows:
        gb, db = _bound(gap_spec, r.N), _bound(dev_spec, r.N)
        row_ok = r.gap <= gb and r.sup_dev <= db
        ok &= row_ok
        rows.append(
            {"N": r.N, "sup_dev": r.sup_dev, "cost": r.cost, "gap": r.gap, "gap_bound": gb, "dev_bound": db, "pass": row_ok}
        )
    report.update(
        {"mode": mode, "J_star": conv.J_star, "rows": rows, "ratios": conv.ratios(), "monotone": conv.monotone(), "pass": ok}
    )
    if out is not None:
        conv.to_csv(out / "chatter.csv")
    return (0 if ok else 1), report


def cmd_calcvar(cfg: RunConfig, out: Path | None = None):
    if cfg.builtin == "example1":
        raise InputError("calcvar needs a variational problem (example2 or quadratic_cv)")
    lp = _lagrangian(cfg)
    traj, rc = _lagrangian_candidate(cfg, lp)
    tol = cfg.tolerances["tol_cv"]
    checks = cfg.options.get("checks", ["euler", "weierstrass", "legendre", "falsifier"])
    report = _header(cfg, "calcvar")
    verdicts = {}
    if "euler" in checks:
        r = calcvar.generalized_euler_residual(lp, traj, rc)
        sup = float(np.abs(r).max())
        j = int(np.argmax(np.abs(r).max(axis=1)))
        verdicts["euler"] = {"sup_residual": sup, "witness_t": float(traj.grid.nodes[j]), "pass": sup <= tol}
    if "weierstrass" in checks:
        w = calcvar.weierstrass_check(lp, traj, rc, bound=float(cfg.options.get("weierstrass_bound", 5.0)), tol=tol)
        node, i, u = w.witness
        verdicts["weierstrass"] = {
            "min_excess": w.min_excess,
            "witness": {"t": float(traj.grid.nodes[node]), "vertex": i + 1, "u": _floats(u)},
            "bound": w.bound,
            "pass": w.passed,
        }
    if "legendre" in checks:
        lg = calcvar.legendre_check(lp, traj, rc, tol=tol)
        verdicts["legendre"] = {"min_eigenvalue": lg.minimum, "pass": lg.passed}
    if "falsifier" in checks:
        fg = cfg.options.get("falsifier_grid", {})
        grid = calcvar.falsifier_grid(int(fg.get("count", 101)), float(fg.get("lo", 1e-3)), float(fg.get("hi", 1.0)))
        try:
            fr = calcvar.linearity_falsifier(lp, grid, tol=tol)
            verdicts["falsifier"] = {"u1": fr.u1, "u2": fr.u2, "residual": fr.residual, "pass": fr.passed}
        except PreconditionError as exc:
            verdicts["falsifier"] = {"skipped": str(exc)}
    report["checks"] = verdicts
    ok = all(v.get("pass", True) for v in verdicts.values())
    report["pass"] = ok
    if out is not None:
        traj.to_csv(out / "trajectory.csv")
        rc.to_csv(out / "relaxed_control.csv")
    return (0 if ok else 1), report


def cmd_gradcheck(cfg: RunConfig, out: Path | None = None):
    opts = cfg.options
    count, h, tol = int(opts.get("samples", 100)), float(opts.get("h", 1e-5)), float(opts.get("tol", 1e-5))
    report = _header(cfg, "gradcheck")
    if cfg.builtin == "example1":
        problem = build_control(cfg)[0]
    else:
        lp = _lagrangian(cfg)
        problem = library.lagrangian_to_control(lp, cfg.control_bound)
        rng = np.random.default_rng(cfg.seed)
        samples = [
            (rng.uniform(lp.t0, lp.t1), rng.normal(size=lp.n), rng.uniform(-3, 3, size=lp.n)) for _ in range(count)
        ]
        errs, ok = calcvar.check_lagrangian_gradients(lp, samples, h, tol)
        report["lagrangian"] = {"max_errors": errs, "pass": ok}
    rep = check_gradients(problem, random_samples(problem, count, cfg.seed), h, tol)
    report["control"] = {"max_errors": rep.max_errors, "pass": rep.passed}
    ok = rep.passed and report.get("lagrangian", {}).get("pass", True)
    report["pass"] = ok
    return (0 if ok else 1), report


COMMANDS = {"certify": cmd_certify, "chatter": cmd_chatter, "calcvar": cmd_calcvar, "gradcheck": cmd_gradcheck}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relaxctl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", help="directory for JSON/CSV outputs")
        sp.add_argument("--grid", type=int, help="override the grid size M")
        sp.add_argument("--seed", type=int, help="random seed (gradcheck samples)")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "chatter":
            sp.add_argument("--override-normality", action="store_true")
    return parser


def run(argv=None) -> tuple[int, dict]:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        with open(args.config) as fh:
            data = json.load(fh)
        cfg = RunConfig.from_dict(data, grid=args.grid, seed=args.seed)
        out = None
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
        kwargs = {"override_normality": args.override_normality} if args.command == "chatter" else {}
        code, report = COMMANDS[args.command](cfg, out, **kwargs)
    except (InputError, OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        return 2, {"command": args.command, "error": f"{type(exc).__name__}: {exc}"}
    if out is not None:
        (out / f"{args.command}.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    return code, report


def main(argv=None) -> int:
    code, report = run(argv)
    print(json.dumps(report, sort_keys=True, indent=2))
    return code


if __name__ == "__main__":
    sys.exit(main())
