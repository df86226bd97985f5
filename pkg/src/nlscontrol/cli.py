"""Command line entry point: ``nlscontrol {forward,optimize,gradcheck,diagnose,stability}``.

Every output file is named ``<stem>-<config hash>-seed<base seed>.<ext>``;
JSON outputs additionally echo the effective config.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .forward import BlowUpError, solve_forward
from .norms import NormSpec, subcritical_pair, trajectory_norm
from .optimize import optimize
from .stochastic import PhaseField, write_path_csv
from .studies import gradient_check, stability_sweep
from .trajectory import read_binary, write_binary, write_csv
from .variation import GaugeSpec, SampledPath, besov_embedding_check, temporal_regularity, vp_norm

log = logging.getLogger("nlscontrol")

SUBCOMMANDS = ("forward", "optimize", "gradcheck", "diagnose", "stability")


class Run:
    def __init__(self, cfg, out: Path):
        self.cfg = cfg
        self.out = out
        self.hash = cfgmod.config_hash(cfg)
        self.seed = cfg["mc"]["base_seed"]

    def file(self, stem, ext) -> Path:
        return self.out / f"{stem}-{self.hash}-seed{self.seed}.{ext}"

    def header(self):
        return {"config_hash": self.hash, "base_seed": self.seed, "config": self.cfg}

    def write_json(self, stem, payload):
        path = self.file(stem, "json")
        body = dict(self.header())
        body.update(payload)
        path.write_text(json.dumps(body, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        return path

    def write_rows(self, stem, header, rows):
        path = self.file(stem, "csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
        return path


def _first_phase(problem):
    phase = problem.phases()[0]
    return phase


def cmd_forward(run: Run):
    cfg = run.cfg
    problem = cfgmod.build_problem(cfg)
    u = cfgmod.initial_control(cfg, problem)
    phase = _first_phase(problem)
    traj = solve_forward(problem.X0, problem.params, u, phase, T=problem.T, grid=problem.grid, stride=cfg["time"]["stride"])
    write_csv(traj, run.file("forward", "csv"))
    write_binary(traj, run.file("forward", "bin"))
    if phase is not None:
        write_path_csv(phase.path, run.file("path", "csv"))
    p, q = subcritical_pair(problem.params.alpha, problem.grid.d)
    masses = traj.masses()
    summary = {
        "mass_drift": float(np.max(np.abs(masses / masses[0] - 1))),
        "Linf_L2": trajectory_norm(traj, NormSpec("LqLp", p=2, q=np.inf)),
        "strichartz_pair": [p, q],
        "Lq_Lp": trajectory_norm(traj, NormSpec("LqLp", p=p, q=q, strichartz=True)),
        "local_smoothing": trajectory_norm(traj, NormSpec("LocalSmoothing")),
        "path_seed": None if phase is None else int(phase.path.seed),
    }
    run.write_json("forward", summary)


def cmd_optimize(run: Run):
    cfg = run.cfg
    problem = cfgmod.build_problem(cfg)
    u0 = cfgmod.initial_control(cfg, problem)
    opt = cfg["optimizer"]
    report = optimize(u0, problem, method=opt["method"], theta=opt["theta"], tol=opt["tol"], max_iter=opt["max_iter"])
    report.config = run.header()
    run.file("report", "json").write_text(report.to_json() + "\n", encoding="utf-8")
    m = problem.params.m
    rows = [(float(t),) + tuple(float(x) for x in row) for t, row in zip(problem.times, report.final_control())]
    run.write_rows("control", ["t"] + [f"u_{j + 1}" for j in range(m)], rows)
    log.info("optimize: %s after %d iterations, residual %.3e", report.status, len(report.iterations) - 1, report.residual)


def cmd_gradcheck(run: Run):
    cfg = run.cfg
    problem = cfgmod.build_problem(cfg)
    u = cfgmod.initial_control(cfg, problem)
    gc = cfg["gradcheck"]
    nodes = np.unique(np.linspace(0, problem.M, min(gc["nodes"], problem.M + 1)).round().astype(int))
    rows = gradient_check(problem, u, eps=gc["eps"], nodes=nodes)
    run.write_rows("gradcheck", ["node", "t", "adjoint", "finite_difference", "abs_err", "rel_err"], rows)


def cmd_diagnose(run: Run, trajectory=None):
    cfg = run.cfg
    if trajectory is not None:
        traj = read_binary(trajectory)
        gauge = GaugeSpec()
    else:
        problem = cfgmod.build_problem(cfg)
        u = cfgmod.initial_control(cfg, problem)
        phase = _first_phase(problem)
        traj = solve_forward(problem.X0, problem.params, u, phase, T=problem.T, grid=problem.grid)
        gauge = GaugeSpec(phase=phase)
    path = SampledPath.from_trajectory(traj)
    ratio, ok = besov_embedding_check(path, 2)
    payload = {"v2_norm": vp_norm(path, 2), "besov_max_ratio": ratio, "besov_pass": ok}
    if gauge.constant and traj.stride == 1:
        sup, table = temporal_regularity(traj, gauge)
        payload["temporal_sup"] = sup
        payload["h_profile"] = [list(r) for r in table]
    else:
        payload["temporal_sup"] = None
        payload["h_profile"] = []
    run.write_json("diagnostics", payload)


def cmd_stability(run: Run):
    cfg = run.cfg
    problem = cfgmod.build_problem(cfg)
    u = cfgmod.initial_control(cfg, problem)
    st = cfg["stability"]
    direction = cfgmod.control_values(st["direction"], problem.times, problem.params.m)
    rows = stability_sweep(
        problem.X0, problem.params, problem.grid, problem.T, u, direction, _first_phase(problem), st["levels"], st["delta0"]
    )
    run.write_rows("stability", ["level", "delta", "perturbation", "error_Linf_L2"], rows)


def build_parser():
    ap = argparse.ArgumentParser(prog="nlscontrol", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="run configuration (JSON)")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--seed", type=int, help="override mc.base_seed")
    ap.add_argument("--paths", type=int, help="override mc.paths")
    ap.add_argument("--trajectory", help="diagnose: binary trajectory dump instead of a fresh run")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        raw.setdefault("mc", {})
        if args.seed is not None:
            raw["mc"]["base_seed"] = args.seed
        if args.paths is not None:
            raw["mc"]["paths"] = args.paths
        cfg = cfgmod.validate(raw)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run = Run(cfg, out)
    try:
        if args.command == "diagnose":
            cmd_diagnose(run, args.trajectory)
        else:
            globals()[f"cmd_{args.command}"](run)
    except BlowUpError as exc:
        print(f"numerical blow-up: last valid time t={exc.last_valid_time:g}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
