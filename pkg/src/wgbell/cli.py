"""Command-line entry point: run an experiment config and write CSV files.

Usage::

    wgbell --preset fig5c --out results/fig5c --workers 4
    wgbell --config my.cfg --seed 7 --observables-only
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, oracles
from .config import Mode, SimConfig, dump_config, from_mapping, parse_config
from .ensemble import EnsembleResult, run_ensemble
from .errors import WgbellError
from .lindblad import evolve_array, steady_state_residual
from .measures import Terminal, concurrence_pure, observables, trace_distance
from .model import StateLabel, named_state
from .trajectories import TrajectoryRecord, initial_state, no_jump_propagate

log = logging.getLogger("wgbell")

STATE_COLUMNS = ("t", "concurrence", "p00", "p11", "p22", "p33", "re_rho03", "im_rho03", "re_rho12", "im_rho12")
JUMP_COLUMNS = STATE_COLUMNS + ("click_l", "click_r")
HOMODYNE_COLUMNS = STATE_COLUMNS + ("I_l", "I_r")
ENSEMBLE_COLUMNS = ("t", "mean_concurrence", "stderr")

_FIG5 = {"mode": Mode.HOMODYNE, "eta_l": 0.0, "t_max": 15.0, "n_traj": 2000, "store_states": False}

PRESETS: dict[str, dict] = {
    "fig2a": {"mode": Mode.JUMP, "eta_l": 1.0, "eta_r": 1.0, "n_traj": 12, "n_save": 12},
    "fig2b": {"mode": Mode.JUMP, "eta_l": 0.9, "eta_r": 0.9, "n_traj": 12, "n_save": 12},
    "fig4": {"mode": Mode.JUMP, "eta_l": 1.0, "eta_r": 1.0, "n_traj": 1, "n_save": 1},
    "fig5a": {**_FIG5, "eta_r": 1.0},
    "fig5b": {**_FIG5, "eta_r": 0.9},
    "fig5c": {**_FIG5, "eta_r": 0.75},
    "fig5d": {**_FIG5, "eta_r": 0.5},
    "fig6": {**_FIG5, "eta_r": 1.0, "n_traj": 200},
}

# the initial-state comparison writes one subdirectory per starting state
FIG6_INITIAL = (StateLabel.GG, StateLabel.GE, StateLabel.EG, StateLabel.EE)


def fmt(x) -> str:
    """12 significant digits, locale independent."""
    return format(float(x), ".12g")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _state_rows(times, obs):
    for k, t in enumerate(times):
        p = obs.populations[k]
        yield [
            fmt(t),
            fmt(obs.concurrence[k]),
            fmt(p[0]),
            fmt(p[1]),
            fmt(p[2]),
            fmt(p[3]),
            fmt(obs.rho03[k].real),
            fmt(obs.rho03[k].imag),
            fmt(obs.rho12[k].real),
            fmt(obs.rho12[k].imag),
        ]


def write_trajectory_csv(path: Path, record: TrajectoryRecord) -> None:
    rows = list(_state_rows(record.times, record.observables))
    if record.mode is Mode.JUMP:
        for row, counts in zip(rows, record.click_counts):
            row.extend(str(int(c)) for c in counts)
        header = JUMP_COLUMNS
    else:
        for row, currents in zip(rows, record.current_means):
            row.extend(fmt(c) for c in currents)
        header = HOMODYNE_COLUMNS
    _write_csv(path, header, rows)


def write_ensemble_csv(path: Path, result: EnsembleResult) -> None:
    series = result.mean_concurrence
    rows = ([fmt(t), fmt(m), fmt(e)] for t, m, e in zip(series.times, series.values, series.stderr))
    _write_csv(path, ENSEMBLE_COLUMNS, rows)


def write_terminal_csv(path: Path, result: EnsembleResult) -> None:
    counts = result.terminal_counts
    _write_csv(path, ("label", "count"), ([label.value, str(counts[label])] for label in Terminal))


def write_manifest(path: Path, cfg: SimConfig, extra: dict[str, str]) -> None:
    lines = [f"# wgbell {__version__}", "# times in units of T1 = 1/gamma"]
    lines += [f"# {key}: {value}" for key, value in extra.items()]
    text = "\n".join(lines) + "\n" + dump_config(cfg)
    path.write_text(text, encoding="utf-8", newline="\n")


def _run_conditional(cfg: SimConfig, out: Path, workers: int) -> dict[str, str]:
    result = run_ensemble(cfg.model(), cfg, workers=workers)
    for i in sorted(result.records):
        write_trajectory_csv(out / f"trajectory_{i}.csv", result.records[i])
    write_ensemble_csv(out / "ensemble.csv", result)
    write_terminal_csv(out / "terminal.csv", result)
    extra = {"trajectory seeds": " ".join(str(result.seeds[i]) for i in sorted(result.records))}
    if cfg.t_max < 10:
        extra["note"] = "terminal labels taken before 10 T1 describe transient states"
    return extra


def _run_lindblad(cfg: SimConfig, out: Path) -> dict[str, str]:
    model = cfg.model()
    times, states = evolve_array(model, initial_state(cfg), cfg.dt_phys, cfg.t_max_phys)
    stride = cfg.record_every
    obs = observables(states[::stride])
    _write_csv(out / "lindblad.csv", STATE_COLUMNS, _state_rows(times[::stride] * model.gamma, obs))
    ss = oracles.steady_state_rho().mat
    return {"final trace distance to steady state": fmt(trace_distance(states[-1], ss))}


def oracle_table(cfg: SimConfig, workers: int = 1) -> list[tuple[str, float]]:
    """Max |numeric - closed form| for each reference result."""
    model = cfg.replace(mode=Mode.JUMP, eta_l=1.0, eta_r=1.0, omega_tilde=0.0).model()
    grid = np.linspace(0.0, 10.0, 1000)
    psi0 = named_state(StateLabel.GG)
    numeric = np.array([no_jump_propagate(model, psi0, t / model.gamma) for t in grid])
    exact = np.array([oracles.no_jump_state(1.0, t) for t in grid])
    # fix the global phase by the first amplitude, which stays positive
    phases = numeric[:, :1] / np.abs(numeric[:, :1])
    state_err = float(np.max(np.abs(numeric / phases - exact)))
    conc_err = float(np.max(np.abs(concurrence_pure(numeric) - oracles.no_jump_concurrence(1.0, grid))))

    hcfg = cfg.replace(mode=Mode.HOMODYNE, initial=StateLabel.GG, n_save=0)
    result = run_ensemble(hcfg.model(), hcfg, workers=workers)
    mean = result.mean_concurrence
    closed_form = oracles.mean_homodyne_concurrence(
        1.0, mean.times, initial=hcfg.initial, eta_l=hcfg.eta_l, eta_r=hcfg.eta_r, kd_parity=hcfg.kd_parity
    )
    qnd_mean = oracles.mean_homodyne_concurrence_qnd(1.0, mean.times, hcfg.eta_l, hcfg.eta_r)
    residual = steady_state_residual(cfg.model(), oracles.steady_state_rho().mat)
    return [
        ("no_jump_state", state_err),
        ("no_jump_concurrence", conc_err),
        ("homodyne_mean_closed_form", float(np.max(np.abs(mean.values - closed_form)))),
        ("homodyne_mean_exact", float(np.max(np.abs(mean.values - qnd_mean)))),
        ("homodyne_mean_max_stderr", float(np.max(mean.stderr))),
        ("steady_state_residual", residual),
    ]


def _run_oracle_check(cfg: SimConfig, out: Path, workers: int) -> dict[str, str]:
    table = oracle_table(cfg, workers)
    _write_csv(out / "oracle_check.csv", ("quantity", "max_abs_error"), ([k, fmt(v)] for k, v in table))
    width = max(len(k) for k, _ in table)
    for key, value in table:
        print(f"{key:<{width}}  {fmt(value)}")
    return {}


def run_experiment(cfg: SimConfig, workers: int = 1) -> int:
    """Run one configuration and write its outputs into ``cfg.output_dir``."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.mode in (Mode.JUMP, Mode.HOMODYNE):
        extra = _run_conditional(cfg, out, workers)
    elif cfg.mode is Mode.LINDBLAD:
        extra = _run_lindblad(cfg, out)
    else:
        extra = _run_oracle_check(cfg, out, workers)
    write_manifest(out / "manifest.txt", cfg, extra)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wgbell", description="Conditional two-qubit waveguide dynamics to CSV.")
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--config", type=Path, help="experiment file of 'key = value' lines")
    source.add_argument("--preset", choices=sorted(PRESETS), help="named figure configuration")
    parser.add_argument("--out", help="output directory (overrides output_dir)")
    parser.add_argument("--seed", type=lambda s: int(s, 0), help="master seed (overrides master_seed)")
    parser.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")
    parser.add_argument("--observables-only", action="store_true", help="do not keep density matrices")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _resolve(args) -> list[SimConfig]:
    overrides = {}
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.observables_only:
        overrides["store_states"] = False
    if args.config is not None:
        cfg = parse_config(args.config.read_text(encoding="utf-8"))
        return [cfg.replace(**overrides)] if overrides else [cfg]
    values = dict(PRESETS.get(args.preset, {}))
    if args.preset is not None:
        values.setdefault("output_dir", args.preset)
    values.update(overrides)
    cfg = from_mapping(values)
    if args.preset == "fig6":
        base = Path(cfg.output_dir)
        return [cfg.replace(initial=lbl, output_dir=str(base / lbl.name.lower())) for lbl in FIG6_INITIAL]
    return [cfg]


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    try:
        for cfg in _resolve(args):
            run_experiment(cfg, args.workers)
    except WgbellError as exc:
        where = ""
        if getattr(exc, "trajectory_index", None) is not None:
            where += f" (trajectory {exc.trajectory_index}"
            where += f", t = {exc.time:g} T1)" if getattr(exc, "time", None) is not None else ")"
        print(f"wgbell: {type(exc).__name__}: {exc}{where}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"wgbell: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
