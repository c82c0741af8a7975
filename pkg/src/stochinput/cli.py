"""Command-line entry point.

Subcommands: ``recover`` (input-statistics recovery), ``filter`` (state
estimation, optionally an NSR sweep), ``reduce`` (balanced model
reduction), ``pipeline`` (all stages).  Outputs are CSV/JSON files plus a
run manifest; plotting is left to external tools.

Exit codes: 0 success, 1 numerical-stage failure, 2 config/usage failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys as _sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, bench, filtering, realization
from .exceptions import StochInputError

log = logging.getLogger("stochinput")


@dataclass
class RunManifest:
    """Reproducibility record written next to every command's artifacts."""

    command: str
    config: dict
    version: str = __version__
    seed: int = 0
    wall_times: dict = field(default_factory=dict)
    files: list = field(default_factory=list)

    def add(self, path):
        self.files.append(os.path.basename(path))
        return path

    def write(self, out_dir):
        path = os.path.join(out_dir, "manifest.json")
        self.files.append("manifest.json")
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
        return path


def _load_config(args):
    cfg = bench.PipelineConfig()
    if args.config is not None:
        try:
            with open(args.config) as fh:
                cfg = bench.PipelineConfig.from_json(json.load(fh))
        except FileNotFoundError:
            raise UsageError(f"config file not found: {args.config}")
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            raise UsageError(f"invalid config file {args.config}: {exc}")
    if getattr(args, "method", None):
        cfg.method = args.method
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


class UsageError(Exception):
    pass


def _prepare_out(args):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_filter_csv(path, run):
    """Per-step rows: step, component, truth, estimate, |error|, 3 sigma."""
    truth, est = run["truth"], run["estimates"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["step", "component", "truth_re", "truth_im", "est_re", "est_im", "err_abs", "sigma3"]
        )
        T, n = truth.shape
        for k in range(T):
            for i in range(n):
                writer.writerow(
                    [
                        k,
                        i,
                        repr(float(truth[k, i].real)),
                        repr(float(truth[k, i].imag)),
                        repr(float(est[k, i].real)),
                        repr(float(est[k, i].imag)),
                        repr(float(run["errors"][k, i])),
                        repr(float(run["sigma3"][k, i])),
                    ]
                )


def cmd_recover(args):
    cfg = _load_config(args)
    out = _prepare_out(args)
    manifest = RunManifest(command="recover", config=cfg.to_json(), seed=cfg.seed)
    start = time.perf_counter()
    result = bench.run_pipeline(cfg)
    manifest.wall_times = dict(result["wall_times"])
    manifest.wall_times["total"] = time.perf_counter() - start
    result["input_autocorr"].write_csv(manifest.add(os.path.join(out, "recovered_input_autocorr.csv")))
    result["true_input_autocorr"].write_csv(manifest.add(os.path.join(out, "true_input_autocorr.csv")))
    result["input_errors"].write_csv(manifest.add(os.path.join(out, "input_autocorr_relative_error.csv")))
    info = dict(result["solve_info"])
    info["ar_order"] = result["ar_order"]
    with open(manifest.add(os.path.join(out, "solver_diagnostics.json")), "w") as fh:
        json.dump(info, fh, indent=2)
    manifest.write(out)
    log.info("recovery done: max relative error %.3e", result["input_errors"].max_relative())
    return 0


def cmd_filter(args):
    cfg = _load_config(args)
    out = _prepare_out(args)
    manifest = RunManifest(command="filter", config=cfg.to_json(), seed=cfg.seed)
    start = time.perf_counter()
    if args.sweep == "nsr":
        rows = bench.nsr_sweep(cfg)
        path = manifest.add(os.path.join(out, "nsr_sweep.csv"))
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["nsr", "armse_ar_based", "armse_assumed_model"])
            for row in rows:
                writer.writerow(
                    [repr(row["nsr"]), repr(row["armse_ar_based"]), repr(row["armse_assumed_model"])]
                )
        summary = {"rows": rows}
    else:
        result = bench.run_pipeline(cfg)
        run = result["filter_run"]
        _write_filter_csv(manifest.add(os.path.join(out, "filter_steps.csv")), run)
        assumed = filtering.build_augmented_from_input_model(
            result["plant"], bench.reference_perturbed_input_model()
        )
        baseline = filtering.run_filter(assumed, run["measurements"])
        n = result["plant"].n
        summary = {
            "armse_ar_based": run["armse"],
            "armse_assumed_model": filtering.armse(
                baseline["means"][:, :n], run["truth"]
            ),
            "nsr": bench.nsr_for_component(
                result["plant"],
                result["input_model"],
                0,
                float(result["plant"].Omega[0, 0].real),
            ),
            "coverage_3sigma": [float(c) for c in run["coverage"]],
            "innovation_whiteness": [float(v) for v in run["innovation_whiteness"]],
        }
    with open(manifest.add(os.path.join(out, "filter_summary.json")), "w") as fh:
        json.dump(summary, fh, indent=2)
    manifest.wall_times["total"] = time.perf_counter() - start
    manifest.write(out)
    return 0


def cmd_reduce(args):
    cfg = _load_config(args)
    out = _prepare_out(args)
    if cfg.rom_order is None or cfg.rom_order < 1:
        raise UsageError("reduce requires a positive rom_order in the config")
    manifest = RunManifest(command="reduce", config=cfg.to_json(), seed=cfg.seed)
    start = time.perf_counter()
    sys_full = bench.build_heat_system(bench.HeatModel(**cfg.heat))
    rom, _ = realization.bpod_reduce(sys_full, cfg.rom_order)
    with open(manifest.add(os.path.join(out, "rom.json")), "w") as fh:
        json.dump(rom.to_json(), fh)
    with open(manifest.add(os.path.join(out, "hankel_singular_values.csv")), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "singular_value"])
        for i, s in enumerate(rom.singular_values):
            writer.writerow([i, repr(float(s))])
    count = min(cfg.markov_count, 200)
    from .lti import markov_parameters

    h_full = markov_parameters(sys_full, count)
    h_rom = rom.markov_parameters(count)
    with open(manifest.add(os.path.join(out, "rom_markov_error.csv")), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "relative_error"])
        for i in range(count):
            ref = np.linalg.norm(h_full.h[i])
            err = np.linalg.norm(h_full.h[i] - h_rom.h[i])
            writer.writerow([i + 1, repr(err / ref if ref > 0 else err)])
    manifest.wall_times["total"] = time.perf_counter() - start
    manifest.write(out)
    return 0


def cmd_pipeline(args):
    cfg = _load_config(args)
    out = _prepare_out(args)
    manifest = RunManifest(command="pipeline", config=cfg.to_json(), seed=cfg.seed)
    start = time.perf_counter()
    result = bench.run_pipeline(cfg)
    manifest.wall_times = dict(result["wall_times"])
    result["input_autocorr"].write_csv(manifest.add(os.path.join(out, "recovered_input_autocorr.csv")))
    result["true_input_autocorr"].write_csv(manifest.add(os.path.join(out, "true_input_autocorr.csv")))
    result["input_errors"].write_csv(manifest.add(os.path.join(out, "input_autocorr_relative_error.csv")))
    with open(manifest.add(os.path.join(out, "innovations_model.json")), "w") as fh:
        json.dump(result["innovations"].to_json(), fh)
    with open(manifest.add(os.path.join(out, "ar_model.json")), "w") as fh:
        json.dump(result["ar_model"].to_json(), fh)
    run = result["filter_run"]
    _write_filter_csv(manifest.add(os.path.join(out, "filter_steps.csv")), run)
    summary = {
        "armse": run["armse"],
        "max_input_relative_error": result["input_errors"].max_relative(),
        "ar_order": result["ar_order"],
        "innovations_order": result["innovations"].order,
        "coverage_3sigma": [float(c) for c in run["coverage"]],
    }
    with open(manifest.add(os.path.join(out, "pipeline_summary.json")), "w") as fh:
        json.dump(summary, fh, indent=2)
    manifest.wall_times["total"] = time.perf_counter() - start
    manifest.write(out)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stochinput",
        description="Unknown-input statistics recovery, realization, and filtering",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("recover", cmd_recover),
        ("filter", cmd_filter),
        ("reduce", cmd_reduce),
        ("pipeline", cmd_pipeline),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON scenario config")
        p.add_argument("--out", help="output directory (default: current)")
        p.add_argument("--method", choices=["direct", "cg"], help="least-squares solver")
        p.add_argument("--seed", type=int, help="root seed overriding the config")
        if name == "filter":
            p.add_argument("--sweep", choices=["nsr"], help="run a noise-level sweep")
        p.set_defaults(func=fn)
    return parser


def main(argv=None):
    level = os.environ.get("STOCHINPUT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        parser.print_usage(_sys.stderr)
        return 2
    except StochInputError as exc:
        print(f"numerical failure: {exc}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
