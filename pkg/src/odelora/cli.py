"""Experiment runner CLI.

Verbs:

* ``run``             one trajectory from a config, CSV + meta + plot script
* ``sweep``           grid over one parameter x all seven solver schemes
* ``order``           discretization-order measurement for the flow steppers
* ``feature-scaling`` output-contribution norms across model dimensions

All randomness flows from the config seeds through numpy's PCG64 generator,
so identical invocations produce byte-identical CSVs except for the
``wall_nanos`` column. Floats are written with 17 significant digits and a
``.`` decimal point regardless of locale; missing diagnostics are emitted
as empty fields. Exit codes: 0 completed (divergence is data, not failure),
2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, OutOfRange, parse_config, serialize_config
from .core import LoRAFactors, effective_weight
from .diagnostics import (
    estimate_order,
    feature_scaling_experiment,
    rate_fit,
    reference_trajectory,
    sensing_eps_certificate,
)
from .metrics import NonPositiveGap, WindowTooShort
from .problems import (
    balanced_init,
    make_regression_instance,
    make_sensing_instance,
    perturbed_balanced_init,
    quadratic_objective,
    regression_objective,
    sensing_objective,
    zero_b_init,
)
from .solvers import Scheme, SolverConfig, TrajectoryLog, run_trajectory

__all__ = ["main", "cmd_run", "cmd_sweep", "cmd_order", "cmd_feature_scaling"]

ORDER_H_LIST = (0.2, 0.1, 0.05, 0.025)
ORDER_HORIZON = 1.0
TRAJECTORY_HEADER = "iter,loss,grad_norm,balance_defect,eps_ratio,dist_to_opt,wall_nanos"


def _fmt(value) -> str:
    """CSV cell: empty for missing, 17 significant digits for floats."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float) or isinstance(value, np.floating):
        return format(float(value), ".17g")
    return str(value)


class Experiment:
    """A resolved config: objective, frozen base weight, and initial state."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        prob = cfg.problem
        self.sensing = None
        if prob.kind == "sensing":
            self.sensing = make_sensing_instance(
                prob.m, prob.n, prob.o, prob.r, prob.delta, prob.seed
            )
            self.objective = sensing_objective(self.sensing)
            self.w_pt = self.sensing.w_pt
            self._align = None
        elif prob.kind == "quadratic":
            rng = np.random.default_rng(prob.seed)
            w_pt = rng.standard_normal((prob.m, prob.n)) / np.sqrt(prob.n)
            target = rng.standard_normal((prob.m, prob.r)) @ rng.standard_normal((prob.r, prob.n))
            sigma_r = np.linalg.svd(target, compute_uv=False)[prob.r - 1]
            star = balanced_init(target / sigma_r, prob.r)
            self.objective = quadratic_objective(w_pt + star.b @ star.a, mu=1.0)
            self.w_pt = w_pt
            self._align = None
        elif prob.kind == "regression":
            regression = make_regression_instance(prob.n, prob.m, prob.seed)
            self.objective = regression_objective(regression)
            self.w_pt = regression.w_pt
            self._align = regression.s
        else:  # pragma: no cover - guarded by config validation
            raise OutOfRange("problem.kind", prob.kind)
        self.factors = self._initial_factors()

    def _initial_factors(self) -> LoRAFactors:
        cfg = self.cfg
        prob, init = cfg.problem, cfg.init
        if init.scheme == "zero_b":
            return zero_b_init(prob.n, prob.m, prob.r, init.seed, align=self._align)
        if self.sensing is not None:
            return perturbed_balanced_init(self.sensing, init.scale, init.perturbation, init.seed)
        if self.objective.optimum_w is not None:
            target = self.objective.optimum_w - self.w_pt
        else:
            rng = np.random.default_rng(init.seed)
            target = rng.standard_normal((prob.m, prob.n))
            target *= 1.0 / np.linalg.norm(target)
        rng = np.random.default_rng(init.seed)
        noise = rng.standard_normal((prob.m, prob.n))
        noise *= np.linalg.norm(target) / np.linalg.norm(noise)
        return balanced_init(init.scale * target + init.perturbation * noise, prob.r)

    def initial_state(self, scheme: Scheme):
        if scheme is Scheme.FULL_FT:
            return effective_weight(self.w_pt, self.factors)
        return self.factors

    def run(self, solver: SolverConfig | None = None) -> TrajectoryLog:
        solver = solver or self.cfg.solver
        return run_trajectory(
            self.initial_state(solver.scheme), self.objective, solver, w_pt=self.w_pt
        )

    def certificate(self) -> float | None:
        if self.sensing is None:
            return None
        return sensing_eps_certificate(self.sensing, self.factors)


def _write_trajectory_csv(path: Path, log: TrajectoryLog, cfg: ExperimentConfig) -> None:
    diag = cfg.diagnostics
    lines = [TRAJECTORY_HEADER]
    for row in log.rows:
        lines.append(
            ",".join(
                [
                    _fmt(row.iter),
                    _fmt(row.loss),
                    _fmt(row.grad_norm),
                    _fmt(row.balance_defect) if diag.balance else "",
                    _fmt(row.eps_ratio) if diag.eps_ratio else "",
                    _fmt(row.dist_to_opt),
                    _fmt(row.wall_nanos),
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n")


_PLOT_SCRIPT = """\
# gnuplot script: loss trajectory
set datafile separator ','
set logscale y
set xlabel 'iteration'
set ylabel 'loss'
set key left bottom
plot 'trajectory.csv' every ::1 using 1:2 with lines title '{label}'
"""


def _run_into(cfg: ExperimentConfig, out_dir: Path) -> tuple[TrajectoryLog, Experiment]:
    out_dir.mkdir(parents=True, exist_ok=True)
    experiment = Experiment(cfg)
    log = experiment.run()
    _write_trajectory_csv(out_dir / "trajectory.csv", log, cfg)
    meta = [serialize_config(cfg).rstrip("\n"), ""]
    meta.append(f"final_loss = {_fmt(log.final_loss)}")
    meta.append(f"diverged = {_fmt(log.diverged)}")
    cert = experiment.certificate() if cfg.diagnostics.certificate else None
    if cert is not None:
        meta.append(f"eps_certificate = {_fmt(cert)}")
    (out_dir / "meta.txt").write_text("\n".join(meta) + "\n")
    (out_dir / "plot.gnuplot").write_text(_PLOT_SCRIPT.format(label=cfg.output.run_label))
    return log, experiment


def cmd_run(cfg: ExperimentConfig, out_dir: Path) -> int:
    _run_into(cfg, out_dir)
    return 0


def _cell_config(cfg: ExperimentConfig, scheme: Scheme, param: str, value: float) -> ExperimentConfig:
    solver = replace(cfg.solver, scheme=scheme)
    if param == "h":
        solver = replace(solver, step_size=value)
        return replace(cfg, solver=solver)
    if param == "delta":
        return replace(cfg, solver=solver, problem=replace(cfg.problem, delta=value))
    raise OutOfRange("sweep.param", f"must be 'h' or 'delta', got {param!r}")


def _contraction_of(log: TrajectoryLog, optimum_loss: float | None) -> float | None:
    if optimum_loss is None or log.diverged:
        return None
    try:
        return rate_fit(log.losses(), optimum_loss).contraction
    except (WindowTooShort, NonPositiveGap):
        return None


def cmd_sweep(cfg: ExperimentConfig, param: str, values, out_dir: Path, jobs: int = 1) -> int:
    """One subdirectory per (scheme x value) cell, plus summary.csv."""
    cells = [(scheme, float(value)) for scheme in Scheme for value in values]

    def run_cell(cell):
        scheme, value = cell
        cell_cfg = _cell_config(cfg, scheme, param, value)
        cell_dir = out_dir / f"{scheme.value}_{value:g}"
        log, experiment = _run_into(cell_cfg, cell_dir)
        return scheme, value, log, experiment.objective.optimum_loss

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_cell, cells))
    else:
        results = [run_cell(cell) for cell in cells]

    lines = ["scheme,value,final_loss,diverged,contraction"]
    for scheme, value, log, optimum_loss in results:
        contraction = _contraction_of(log, optimum_loss)
        lines.append(
            ",".join(
                [scheme.value, _fmt(value), _fmt(log.final_loss), _fmt(log.diverged),
                 _fmt(contraction)]
            )
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "summary.csv").write_text("\n".join(lines) + "\n")
    return 0


def cmd_order(cfg: ExperimentConfig, out_dir: Path) -> int:
    """Measure observed orders for the three flow steppers on one problem."""
    experiment = Experiment(cfg)
    reference = reference_trajectory(
        experiment.factors,
        experiment.w_pt,
        experiment.objective,
        ORDER_HORIZON,
        min(ORDER_H_LIST) / 100.0,
        cfg.solver.eps_reg,
    )
    lines = ["scheme,h,defect,observed_order"]
    for scheme in (Scheme.ODE_EULER, Scheme.ODE_RK2, Scheme.ODE_RK4):
        report = estimate_order(
            experiment.factors,
            experiment.w_pt,
            experiment.objective,
            scheme,
            ORDER_HORIZON,
            ORDER_H_LIST,
            cfg.solver.eps_reg,
            reference=reference,
        )
        for h, defect in zip(report.step_sizes, report.defects):
            lines.append(
                ",".join([scheme.value, _fmt(h), _fmt(defect), _fmt(report.observed_order)])
            )
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "order.csv").write_text("\n".join(lines) + "\n")
    return 0


def cmd_feature_scaling(out_dir: Path, n_list, seeds: int, steps: int, h: float) -> int:
    """Dimension-scaling sweep for the RK4 flow and plain factor descent."""
    out_dir.mkdir(parents=True, exist_ok=True)
    phi_lines = ["scheme,n,seed,step,component,norm"]
    slope_lines = ["scheme,component,slope"]
    for scheme in (Scheme.ODE_RK4, Scheme.CLASSICAL_GD):
        result = feature_scaling_experiment(n_list, steps, h, seeds, scheme=scheme)
        for n, seed, step, comp, norm in result.rows:
            phi_lines.append(
                ",".join([scheme.value, str(n), str(seed), str(step), str(comp), _fmt(norm)])
            )
        if len(n_list) < 2:
            slope_lines.append(f"# warning: {len(n_list)} dimension(s); need >= 2 to fit slopes")
            continue
        for comp in sorted(result.slopes):
            slope_lines.append(
                ",".join([scheme.value, str(comp), _fmt(result.slopes[comp])])
            )
    (out_dir / "phi.csv").write_text("\n".join(phi_lines) + "\n")
    (out_dir / "slopes.csv").write_text("\n".join(slope_lines) + "\n")
    return 0


def _load_config(path: str | None, seed: int | None) -> ExperimentConfig:
    text = Path(path).read_text() if path else ""
    cfg = parse_config(text)
    if seed is not None:
        cfg = replace(
            cfg,
            problem=replace(cfg.problem, seed=seed),
            init=replace(cfg.init, seed=seed),
        )
    return cfg


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="odelora", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="config file path (omit for all defaults)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override the config seeds")
        p.add_argument("--jobs", type=int, default=1, help="concurrent sweep cells")

    run_p = sub.add_parser("run", help="run one trajectory")
    common(run_p)

    sweep_p = sub.add_parser("sweep", help="sweep one parameter over all schemes")
    common(sweep_p)
    sweep_p.add_argument("--param", required=True, choices=("h", "delta"))
    sweep_p.add_argument("--values", required=True, help="comma-separated values")

    order_p = sub.add_parser("order", help="measure discretization orders")
    common(order_p)

    fs_p = sub.add_parser("feature-scaling", help="dimension-scaling experiment")
    fs_p.add_argument("--out", required=True)
    fs_p.add_argument("--n-list", default="64,128,256,512,1024")
    fs_p.add_argument("--seeds", type=int, default=5)
    fs_p.add_argument("--steps", type=int, default=20)
    fs_p.add_argument("--h", type=float, default=0.1)
    fs_p.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = _load_config(args.config, args.seed)
            return cmd_run(cfg, Path(args.out))
        if args.command == "sweep":
            cfg = _load_config(args.config, args.seed)
            values = [float(v) for v in args.values.split(",") if v.strip()]
            if not values:
                raise OutOfRange("sweep.values", "no values given")
            return cmd_sweep(cfg, args.param, values, Path(args.out), jobs=args.jobs)
        if args.command == "order":
            cfg = _load_config(args.config, args.seed)
            return cmd_order(cfg, Path(args.out))
        if args.command == "feature-scaling":
            n_list = [int(v) for v in args.n_list.split(",") if v.strip()]
            return cmd_feature_scaling(
                Path(args.out), n_list, args.seeds, args.steps, args.h
            )
        raise AssertionError(args.command)  # pragma: no cover
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"io error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
