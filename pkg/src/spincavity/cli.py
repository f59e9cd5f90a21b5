"""Command-line interface: simulate, sweep, validate, budget.

Exit codes: 0 success; 1 failed validation check; 2 config parse/vocabulary
error; 3 physics-validation error (e.g. nonpositive detuning, Q <= 0);
4 propagation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import (
    ConfigError,
    PhysicsValidationError,
    RunConfig,
    load_config_file,
    resolve_config,
)
from .engine import PropagationError
from .hilbert import LayoutError, TruncationError
from .model import ModelError
from .protocol import GateReport, ProtocolError, decoherence_budget, run_ghz_protocol

EXIT_OK = 0
EXIT_VALIDATE_FAIL = 1
EXIT_CONFIG = 2
EXIT_PHYSICS = 3
EXIT_PROPAGATION = 4

_FLOAT_FMT = "{:.12e}"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return _FLOAT_FMT.format(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _budget_payload(cfg: RunConfig) -> dict | None:
    params = cfg.sim_params()
    if params.lambda_params is None or params.lambda_params.gamma0 is None \
            or params.lambda_params.q_factor is None:
        return None
    b = decoherence_budget(params)
    return {
        "eta_rad_per_ns": b.eta,
        "gate_time_ns": b.gate_time,
        "gamma_eff_rad_per_ns": b.gamma_eff,
        "kappa_rad_per_ns": b.kappa,
        "q_factor": b.q_factor,
        "omega_c_rad_per_ns": b.omega_c,
        "t_gamma_eff_n": b.t_gamma_eff_n,
        "t_kappa_thermal": b.t_kappa_thermal,
    }


def _summary_payload(cfg: RunConfig, report: GateReport) -> dict:
    r_delta, r_omega, ok = report.commensurability
    payload = {
        "gamma_achieved": report.gamma_achieved,
        "gamma_model": report.gamma_model,
        "total_duration_ns": report.total_duration,
        "commensurability": {
            "delta_t_mod_2pi": r_delta,
            "omega_t_mod_4pi": r_omega,
            "satisfied": ok,
        },
        "per_fock_fidelity": {str(n): v for n, v in report.per_fock_fidelity.items()},
        "diagnostics": {
            "max_norm_defect": report.max_norm_defect,
            "max_top_fock_pop": report.max_top_fock_pop,
            "steps_taken": report.steps_taken,
            "fidelity_mode": report.fidelity_mode,
        },
        "warnings": list(report.warnings),
        "budget": _budget_payload(cfg),
        "config": cfg.raw,
    }
    # entanglement fidelity fields exist only when a multi-qubit target exists
    if report.final_fidelity is not None:
        payload["final_fidelity"] = report.final_fidelity
        payload["final_fidelity_composite"] = report.final_fidelity_composite
    return payload


def _trajectory_rows(report: GateReport) -> list[list]:
    rows = []
    for i, t in enumerate(report.times):
        fid = None if report.fidelity_series is None else float(report.fidelity_series[i])
        rows.append([
            float(t),
            fid,
            float(report.f_in_series[i]),
            float(report.norm_defect_series[i]),
            float(report.top_fock_series[i]),
        ])
    return rows


def cmd_simulate(cfg: RunConfig, out_dir: Path) -> int:
    report = run_ghz_protocol(
        cfg.sim_params(),
        source=cfg.source,
        settings=cfg.settings(),
        k=cfg.k,
        n_time_samples=cfg.n_time_samples,
        fidelity_mode=cfg.fidelity_mode,
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out_dir / "trajectory.csv",
        ["t_ns", "fidelity", "F_in_model", "norm_defect", "top_fock_pop"],
        _trajectory_rows(report),
    )
    _write_json(out_dir / "summary.json", _summary_payload(cfg, report))
    return EXIT_OK


def _sweep_point(args: tuple) -> list:
    cfg_raw, names, values = args
    cfg = RunConfig(raw=cfg_raw)
    overrides = {}
    for name, value in zip(names, values):
        overrides[name] = int(value) if name in ("N", "n_max", "k") else float(value)
    k = int(overrides.pop("k", cfg.k))
    params = cfg.sim_params(**overrides)
    report = run_ghz_protocol(
        params,
        source=cfg.source,
        settings=cfg.settings(),
        k=k,
        n_time_samples=cfg.n_time_samples,
        fidelity_mode=cfg.fidelity_mode,
    )
    fid = report.final_fidelity
    return list(values) + [
        fid,
        None if fid is None else 1.0 - fid,
        report.gamma_achieved,
        report.max_norm_defect,
        report.max_top_fock_pop,
    ]


def cmd_sweep(cfg: RunConfig, out_dir: Path, jobs: int) -> int:
    axes = cfg.sweep_axes()
    if not 1 <= len(axes) <= 2:
        raise ConfigError("sweep requires exactly 1 or 2 axes")
    names = [ax.name for ax in axes]
    grid: list[tuple] = []
    if len(axes) == 1:
        grid = [(v,) for v in axes[0].values]
    else:
        grid = [(v1, v2) for v1 in axes[0].values for v2 in axes[1].values]

    tasks = [(cfg.raw, names, values) for values in grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]

    out_dir.mkdir(parents=True, exist_ok=True)
    header = names + [
        "final_fidelity", "final_infidelity", "gamma_achieved",
        "max_norm_defect", "max_top_fock_pop",
    ]
    _write_csv(out_dir / "sweep.csv", header, rows)
    return EXIT_OK


def cmd_budget(cfg: RunConfig, out_dir: Path) -> int:
    payload = _budget_payload(cfg)
    if payload is None:
        missing = []
        params = cfg.sim_params()
        if params.lambda_params is None:
            missing.append("lambda_params")
        else:
            if params.lambda_params.gamma0 is None:
                missing.append("lambda_params.gamma0")
            if params.lambda_params.q_factor is None:
                missing.append("lambda_params.q_factor")
        raise ConfigError(f"budget requires field(s): {missing}")
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "budget.json", payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_validate(level: str, seed: int) -> int:
    from .validate import format_table, run_validation

    results = run_validation(level=level, seed=seed)
    print(format_table(results))
    return EXIT_OK if all(r.passed for r in results if r.gating) else EXIT_VALIDATE_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spincavity",
        description="Collective-spin entangling-gate simulator on a cavity bus",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", type=str, default=None, help="JSON config path")
        p.add_argument("--preset", type=str, default=None,
                       help="bundled preset name (paper_n2, paper_n4)")
        p.add_argument("--out", type=str, default="out", help="output directory")

    p_sim = sub.add_parser("simulate", help="run one protocol simulation")
    add_common(p_sim)

    p_sweep = sub.add_parser("sweep", help="grid of protocol runs")
    add_common(p_sweep)
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel workers")

    p_val = sub.add_parser("validate", help="run the cross-validation suite")
    p_val.add_argument("--level", choices=("fast", "full"), default="fast")
    p_val.add_argument("--seed", type=int, default=0)

    p_budget = sub.add_parser("budget", help="report coupling and decoherence figures")
    add_common(p_budget)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "validate":
        return cmd_validate(args.level, args.seed)

    try:
        data = load_config_file(args.config) if args.config else None
        if data is None and args.preset is None:
            raise ConfigError("provide --config and/or --preset")
        cfg = resolve_config(data, preset_name=args.preset)
    except PhysicsValidationError as exc:
        print(f"physics validation error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except (ConfigError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out)
    try:
        if args.command == "simulate":
            return cmd_simulate(cfg, out_dir)
        if args.command == "sweep":
            return cmd_sweep(cfg, out_dir, jobs=max(1, args.jobs))
        if args.command == "budget":
            return cmd_budget(cfg, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ModelError, ProtocolError, PhysicsValidationError,
            TruncationError, LayoutError) as exc:
        print(f"physics validation error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except PropagationError as exc:
        print(f"propagation error: {exc}", file=sys.stderr)
        return EXIT_PROPAGATION
    parser.error(f"unknown command {args.command}")
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
