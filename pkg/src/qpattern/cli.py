"""Command-line experiment runner.

Verbs: generate, run, sweep, localise, spectrum. Every verb reads an
optional INI config (--config) and accepts --section-key flags that
mirror config keys, e.g. --grid-width 64 or --detect-tau 8. Outputs
carry a '# key=value' provenance header with the config hash and seed;
the run report JSON is byte-identical across reruns of one config
(wall time goes to stdout, never into artifacts).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace

import numpy as np

from . import recognize
from .config import (
    ConfigError,
    DetectConfig,
    ExperimentConfig,
    GridConfig,
    OutputConfig,
    PatternConfig,
    RunConfig,
    _FIELD_KINDS,
    _OPTIONAL_KEYS,
    build_policy,
    build_specs,
    config_hash,
    load_config,
    rng_for,
    validate_config,
)
from .grid import CellGrid, generate_grid, read_grid, transpose_grid, write_grid
from .qsim import (
    MAX_STATE_QUBITS,
    qft_gate_total,
    run_pipeline,
    samples_to_array,
)
from .spectral import exact_distribution, write_spectrum_csv


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI config file")
    for (section, key), kind in _FIELD_KINDS.items():
        flag = f"--{section}-{key}".replace("_", "-")
        if kind is bool:
            parser.add_argument(
                flag, dest=f"{section}.{key}", choices=("true", "false")
            )
        else:
            parser.add_argument(flag, dest=f"{section}.{key}")


_SECTION_TYPES = {
    "grid": GridConfig,
    "pattern": PatternConfig,
    "run": RunConfig,
    "detect": DetectConfig,
    "output": OutputConfig,
}


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    from .config import _parse_value

    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides: dict[str, dict] = {}
    for dest, raw in vars(args).items():
        if "." not in dest or raw is None:
            continue
        section, key = dest.split(".", 1)
        overrides.setdefault(section, {})[key] = _parse_value(
            section, key, raw, _FIELD_KINDS[(section, key)]
        )
    updated = {}
    for section, values in overrides.items():
        current = getattr(cfg, section)
        if current is None:  # pattern section materialized by flags
            current = _SECTION_TYPES[section]()
        updated[section] = replace(current, **values)
    if updated:
        cfg = replace(cfg, **updated)
    validate_config(cfg)
    return cfg


def _meta(cfg: ExperimentConfig) -> dict:
    return {"config_hash": config_hash(cfg), "seed": cfg.grid.seed}


def _out_path(cfg: ExperimentConfig, suffix: str) -> str:
    os.makedirs(cfg.output.dir, exist_ok=True)
    return os.path.join(cfg.output.dir, f"{cfg.output.prefix}_{suffix}")


def write_samples_csv(samples, path, meta: dict | None = None) -> None:
    """CSV of (shot, k) with '# key=value' provenance header lines."""
    with open(path, "w") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key}={value}\n")
        fh.write("shot,k\n")
        for s in samples:
            fh.write(f"{s.shot},{s.k}\n")


def _grid_for(cfg: ExperimentConfig) -> CellGrid:
    background, pattern = build_specs(cfg)
    return generate_grid(cfg.grid.width, cfg.grid.height, background, pattern)


def _cluster_records(report) -> list[dict]:
    return [
        {
            "k_low": int(c.k_low),
            "k_high": int(c.k_high),
            "center": float(c.weighted_center),
            "mass": float(c.mass),
            "count": int(c.sample_count),
        }
        for c in report.clusters
    ]


def cmd_generate(cfg: ExperimentConfig) -> int:
    g = _grid_for(cfg)
    path = _out_path(cfg, "grid.txt")
    write_grid(g, path, meta=_meta(cfg))
    print(f"wrote {path} ({g.n_cols}x{g.m_rows}, {g.white_count} white)")
    return 0


def cmd_spectrum(cfg: ExperimentConfig, grid_file: str | None) -> int:
    g = read_grid(grid_file) if grid_file else _grid_for(cfg)
    spectrum = exact_distribution(g, cfg.run.encoding)
    path = _out_path(cfg, "spectrum.csv")
    write_spectrum_csv(spectrum, path, meta=_meta(cfg))
    print(f"wrote {path} (S={spectrum.size})")
    return 0


def cmd_run(cfg: ExperimentConfig) -> int:
    t_start = time.perf_counter()
    g = _grid_for(cfg)
    gt = transpose_grid(g)
    policy = build_policy(cfg)
    meta = _meta(cfg)
    run = cfg.run
    artifacts: dict[str, str] = {}
    counters = {"oracle_queries": 0, "quantum_gates": 0, "classical_ops": 0,
                "trials": 0}
    success_probability = None

    if run.mode == "oracle":
        spec_o = exact_distribution(g, run.encoding)
        counters["classical_ops"] += spec_o.classical_ops
        counters["oracle_queries"] += 1  # one classical pass reads every cell
        report = recognize.detect_peaks(spec_o, policy)
        path = _out_path(cfg, "spectrum.csv")
        write_spectrum_csv(spec_o, path, meta=meta)
        artifacts["spectrum"] = path
        report_t = None
        if run.transpose:
            spec_t = exact_distribution(gt, run.encoding)
            counters["classical_ops"] += spec_t.classical_ops
            counters["oracle_queries"] += 1
            report_t = recognize.detect_peaks(spec_t, policy)
            path_t = _out_path(cfg, "spectrum_t.csv")
            write_spectrum_csv(spec_t, path_t, meta=meta)
            artifacts["spectrum_transposed"] = path_t
        present = bool(report.clusters)
        chi_min = None
        total_for_chi = report
    else:
        result = run_pipeline(
            g, run.shots, rng_for(cfg, 0), run.encoding, run.sampler
        )
        counters["oracle_queries"] += result.counters.queries
        counters["quantum_gates"] += result.counters.gates
        counters["trials"] += result.counters.trials
        success_probability = result.success_probability
        report = recognize.detect_peaks(
            result.samples, policy, size=g.size, m_rows=g.m_rows
        )
        path = _out_path(cfg, "samples.csv")
        write_samples_csv(result.samples, path, meta=meta)
        artifacts["samples"] = path
        report_t = None
        if run.transpose:
            result_t = run_pipeline(
                gt, run.shots, rng_for(cfg, 1), run.encoding, run.sampler
            )
            counters["oracle_queries"] += result_t.counters.queries
            counters["quantum_gates"] += result_t.counters.gates
            counters["trials"] += result_t.counters.trials
            report_t = recognize.detect_peaks(
                result_t.samples, policy, size=gt.size, m_rows=gt.m_rows
            )
            path_t = _out_path(cfg, "samples_t.csv")
            write_samples_csv(result_t.samples, path_t, meta=meta)
            artifacts["samples_transposed"] = path_t
        present = bool(report.clusters)
        chi_min = 1.0 / math.sqrt(run.shots)
        total_for_chi = report

    estimate_record = None
    estimate_error = None
    if run.transpose and report_t is not None and (
        report.clusters or report_t.clusters
    ):
        chi_hint = (
            cfg.pattern.chi
            if cfg.pattern is not None and cfg.pattern.chi is not None
            else cfg.detect.chi_target
        )
        try:
            est = recognize.estimate_parameters(
                report, report_t, g.n, g.m, chi_hint=chi_hint
            )
            estimate_record = {
                "d_hat": est.d_hat,
                "theta_hat": est.theta_hat,
                "delta_k": est.delta_k,
                "delta_k_transposed": est.delta_k_transposed,
                "uncertainty_d": est.uncertainty_d,
                "uncertainty_theta": est.uncertainty_theta,
                "confidence": est.confidence,
                "ambiguous": est.ambiguous,
            }
        except recognize.InconsistentPeaksError as exc:
            estimate_error = str(exc)

    chi_record = None
    if present:
        chi_est = recognize.estimate_chi(total_for_chi, rho=cfg.grid.rho)
        chi_record = {"value": chi_est.value, "label": chi_est.label}

    localise_record = None
    if run.localise:
        loc = recognize.localise(
            g,
            chi_target=run.chi_target,
            policy=policy,
            mode=run.mode,
            shots=run.shots,
            rng=rng_for(cfg, 2) if run.mode == "sample" else None,
            encoding=run.encoding,
        )
        counters["oracle_queries"] += loc.queries_used
        localise_record = {
            "regions": [list(r) for r in loc.regions],
            "queries_used": loc.queries_used,
            "complete": loc.complete,
            "evaluations": loc.evaluations,
        }

    report_doc = {
        "config_hash": meta["config_hash"],
        "seed": cfg.grid.seed,
        "mode": run.mode,
        "encoding": run.encoding,
        "grid": {
            "n_cols": g.n_cols,
            "m_rows": g.m_rows,
            "rho": cfg.grid.rho,
            "white_count": int(g.white_count),
        },
        "detection": {
            "present": present,
            "chi_min": chi_min,
            "clusters": _cluster_records(report),
            "clusters_transposed": (
                _cluster_records(report_t) if report_t is not None else None
            ),
        },
        "estimate": estimate_record,
        "estimate_error": estimate_error,
        "chi_estimate": chi_record,
        "localise": localise_record,
        "counters": counters,
        "success_probability": success_probability,
        "artifacts": artifacts,
    }
    report_path = _out_path(cfg, "report.json")
    with open(report_path, "w") as fh:
        json.dump(report_doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    wall = time.perf_counter() - t_start
    print(f"wrote {report_path}")
    print(f"present={present} wall_time={wall:.3f}s")
    if estimate_record is not None and estimate_record["d_hat"] is not None:
        print(
            "estimate: d=%.3f theta=%.4f (+-%.3f, +-%.4f)"
            % (
                estimate_record["d_hat"],
                estimate_record["theta_hat"],
                estimate_record["uncertainty_d"] or 0.0,
                estimate_record["uncertainty_theta"] or 0.0,
            )
        )
    return 0


def _sweep_row(task: tuple[int, int, int]) -> dict:
    s, seed, shots = task
    n = (s + 1) // 2
    m = s // 2
    rng = np.random.default_rng([seed, 3, s])
    cells = (rng.random(1 << s) < 0.5).astype(np.uint8)
    if not cells.any():
        cells[0] = 1
    g = CellGrid(n=n, m=m, cells=cells)
    amp = run_pipeline(g, shots, np.random.default_rng([seed, 4, s]))
    phase = run_pipeline(
        g, shots, np.random.default_rng([seed, 5, s]), encoding="phase"
    )
    # the per-shot semiclassical cost is deterministic, so a handful of
    # shots fixes the counter; its sampler loops per shot in python
    semi_shots = min(shots, 8)
    semi = run_pipeline(
        g, semi_shots, np.random.default_rng([seed, 6, s]), sampler="semiclassical"
    )
    spectrum = exact_distribution(g)
    semi_gates = semi.counters.gates - semi.counters.trials * s  # QFT part only
    return {
        "s": s,
        "size": 1 << s,
        "qft_gates_per_shot": qft_gate_total(s),
        "semiclassical_ops_per_shot": semi_gates / semi_shots,
        "amplitude_queries_per_shot": amp.counters.queries / shots,
        "phase_queries_per_shot": phase.counters.queries / shots,
        "classical_transform_ops": spectrum.classical_ops,
    }


def cmd_sweep(cfg: ExperimentConfig, sizes: list[int], jobs: int) -> int:
    for s in sizes:
        if s < 2 or s > MAX_STATE_QUBITS:
            raise ConfigError(f"sweep size s={s} outside 2..{MAX_STATE_QUBITS}")
    tasks = [(s, cfg.grid.seed, cfg.run.shots) for s in sizes]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_row, tasks))
    else:
        rows = [_sweep_row(t) for t in tasks]
    header = [
        "s",
        "size",
        "qft_gates_per_shot",
        "semiclassical_ops_per_shot",
        "amplitude_queries_per_shot",
        "phase_queries_per_shot",
        "classical_transform_ops",
    ]
    path = _out_path(cfg, "sweep.csv")
    meta = _meta(cfg)
    with open(path, "w") as fh:
        for key, value in meta.items():
            fh.write(f"# {key}={value}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(row[h]) for h in header) + "\n")
    widths = [max(len(h), 12) for h in header]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in rows:
        print("  ".join(str(row[h]).ljust(w) for h, w in zip(header, widths)))
    print(f"wrote {path}")
    return 0


def cmd_localise(cfg: ExperimentConfig, budget: int | None) -> int:
    g = _grid_for(cfg)
    policy = build_policy(cfg)
    loc = recognize.localise(
        g,
        chi_target=cfg.run.chi_target,
        budget=budget,
        policy=policy,
        mode=cfg.run.mode,
        shots=cfg.run.shots,
        rng=rng_for(cfg, 2) if cfg.run.mode == "sample" else None,
        encoding=cfg.run.encoding,
    )
    doc = {
        "config_hash": config_hash(cfg),
        "seed": cfg.grid.seed,
        "regions": [list(r) for r in loc.regions],
        "queries_used": loc.queries_used,
        "budget": loc.budget,
        "complete": loc.complete,
        "evaluations": loc.evaluations,
    }
    path = _out_path(cfg, "localise.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {path}")
    for region in loc.regions:
        print(f"region x0={region[0]} y0={region[1]} w={region[2]} h={region[3]}")
    if not loc.regions:
        print("no pattern evidence")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpattern",
        description="Pattern recognition experiments on binary cell arrays",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("generate", "run", "sweep", "localise", "spectrum"):
        p = sub.add_parser(verb)
        _add_config_flags(p)
        if verb == "sweep":
            p.add_argument(
                "--sizes",
                default="8,10,12,14,16",
                help="comma-separated qubit counts s",
            )
            p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
        if verb == "localise":
            p.add_argument("--budget", type=int, default=None)
        if verb == "spectrum":
            p.add_argument("--grid-file", help="read this grid instead of generating")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.verb == "generate":
            return cmd_generate(cfg)
        if args.verb == "run":
            return cmd_run(cfg)
        if args.verb == "sweep":
            sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
            return cmd_sweep(cfg, sizes, args.jobs)
        if args.verb == "localise":
            return cmd_localise(cfg, args.budget)
        if args.verb == "spectrum":
            return cmd_spectrum(cfg, args.grid_file)
        raise AssertionError(args.verb)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
