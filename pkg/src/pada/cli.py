"""Experiment harness CLI.

Subcommands: pretrain, make-donor, run, compare-masks, report.  Every
subcommand is deterministic given its config file and inputs; outputs are
written atomically.  PADA_THREADS caps how many (strategy x frequency x seed)
cells run in parallel (default 1).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from .config import ExperimentConfig, load_config
from .data import gen_domain_shift
from .metrics import layerwise_report, report_to_csv, report_to_json
from .params import (
    FormatError,
    StructureMismatchError,
    atomic_write_text,
    load_checkpoint,
    save_checkpoint,
)
from .pruning import load_mask
from .schedule import (
    ConfigError,
    PadaRunLog,
    ScheduleError,
    read_log_jsonl,
    run_dft,
    run_pada,
    write_log_jsonl,
)
from .strategies import StrategySpec
from .trainer import TrainingDivergedError, finetune_supervised, pretrain_denoising


class RunFailure(Exception):
    """A grid cell failed; the message carries the run identity."""


def _check_outputs(paths, force: bool) -> None:
    if force:
        return
    for p in paths:
        if os.path.exists(p):
            raise ConfigError(f"output exists: {p} (use --force to overwrite)")


def _ensure_dir(path: str) -> None:
    os.makedirs(path, exist_ok=True)


def cmd_pretrain(cfg: ExperimentConfig, force: bool = False) -> str:
    """Denoising pre-training on the source unlabeled split; writes a checkpoint."""
    out_path = os.path.join(cfg.out, cfg.pretrained_file)
    _check_outputs([out_path], force)
    _ensure_dir(cfg.out)
    task = gen_domain_shift(cfg.task_seed, cfg.task)
    ps = pretrain_denoising(cfg.arch, task.source_unlabeled, cfg.pretrain)
    save_checkpoint(ps, out_path)
    return out_path


def cmd_make_donor(cfg: ExperimentConfig, force: bool = False) -> str:
    """Fine-tune the pretrained checkpoint on source labels; writes the donor."""
    src = os.path.join(cfg.out, cfg.pretrained_file)
    out_path = os.path.join(cfg.out, cfg.donor_file)
    _check_outputs([out_path], force)
    _ensure_dir(cfg.out)
    ps = load_checkpoint(src)
    task = gen_domain_shift(cfg.task_seed, cfg.task)
    donor = finetune_supervised(ps, task.source_labeled, cfg.donor, role="finetuned_donor")
    save_checkpoint(donor, out_path)
    return out_path


def _cell_name(strategy: str, freq: str, seed: int) -> str:
    if strategy == "DFT":
        return f"dft_seed{seed}"
    return f"{strategy.lower()}_{freq}_seed{seed}"


def _run_cell(cfg, strategy, freq, seed, pretrained, donor, task, run_dir):
    name = _cell_name(strategy, freq, seed)
    tcfg = cfg.target_cfg(seed)
    mask_path = os.path.join(run_dir, f"{name}.padm") if strategy != "DFT" else None
    try:
        if strategy == "DFT":
            model, log = run_dft(
                pretrained, task.target_labeled, tcfg, eval_data=task.target_eval
            )
        else:
            sched = cfg.schedule_for(freq)
            spec = StrategySpec(
                strategy,
                sched.rates[0],
                taw_cfg=tcfg if strategy == "TAW" else None,
            )
            model, log = run_pada(
                pretrained,
                spec,
                sched,
                task.target_labeled,
                tcfg,
                donor=donor,
                eval_data=task.target_eval,
                save_mask_to=mask_path,
            )
    except Exception as exc:
        raise RunFailure(f"run {name}: {exc}") from exc
    log.final["seed"] = seed
    write_log_jsonl(log, os.path.join(run_dir, f"{name}.jsonl"))
    save_checkpoint(model, os.path.join(run_dir, f"{name}.pada"))
    return name, log.final["error_rate"]


def cmd_run(cfg: ExperimentConfig, force: bool = False) -> tuple[str, str]:
    """Execute the configured strategy/frequency grid over every seed.

    Writes one .jsonl log, one final .pada checkpoint and (for PADA cells)
    the initial .padm mask per cell, plus the comparison table as CSV + JSON.
    """
    run_dir = os.path.join(cfg.out, "runs")
    table_csv = os.path.join(cfg.out, "table.csv")
    table_json = os.path.join(cfg.out, "table.json")
    cells = cfg.cells()
    planned = [table_csv, table_json]
    for strategy, freq in cells:
        for seed in cfg.seeds:
            planned.append(os.path.join(run_dir, _cell_name(strategy, freq, seed) + ".jsonl"))
    _check_outputs(planned, force)
    _ensure_dir(run_dir)

    pretrained = load_checkpoint(os.path.join(cfg.out, cfg.pretrained_file))
    donor = None
    if any(s == "CD-TAW" for s in cfg.strategies):
        donor = load_checkpoint(os.path.join(cfg.out, cfg.donor_file))
    task = gen_domain_shift(cfg.task_seed, cfg.task)

    jobs = [(strategy, freq, seed) for strategy, freq in cells for seed in cfg.seeds]
    workers = int(os.environ.get("PADA_THREADS", "1"))
    errors: dict[tuple[str, str, int], float] = {}
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {
                job: pool.submit(_run_cell, cfg, *job, pretrained, donor, task, run_dir)
                for job in jobs
            }
            for job, fut in futures.items():
                _, err = fut.result()
                errors[job] = err
    else:
        for job in jobs:
            _, err = _run_cell(cfg, *job, pretrained, donor, task, run_dir)
            errors[job] = err

    rows = []
    for strategy, freq in cells:
        per_seed = [errors[(strategy, freq, seed)] for seed in cfg.seeds]
        rows.append(
            {
                "strategy": strategy,
                "frequency": freq,
                "mean_error": sum(per_seed) / len(per_seed),
                "per_seed": per_seed,
            }
        )

    header = ["strategy", "frequency", "mean_error"] + [f"seed_{s}" for s in cfg.seeds]
    lines = [",".join(header)]
    for row in rows:
        cols = [row["strategy"], row["frequency"], repr(row["mean_error"])]
        cols += [repr(e) for e in row["per_seed"]]
        lines.append(",".join(cols))
    atomic_write_text(table_csv, "\n".join(lines) + "\n")
    atomic_write_text(
        table_json, json.dumps({"seeds": cfg.seeds, "rows": rows}, indent=2) + "\n"
    )
    return table_csv, table_json


def cmd_compare_masks(path_a: str, path_b: str, out_dir: str, force: bool = False):
    """IOU/MMA similarity report for two mask files (CSV + JSON)."""
    csv_path = os.path.join(out_dir, "mask_report.csv")
    json_path = os.path.join(out_dir, "mask_report.json")
    _check_outputs([csv_path, json_path], force)
    _ensure_dir(out_dir)
    report = layerwise_report(load_mask(path_a), load_mask(path_b))
    report_to_csv(report, csv_path)
    report_to_json(report, json_path)
    return csv_path, json_path


def cmd_report(run_out: str, out_dir: str | None = None) -> tuple[str, str]:
    """Aggregate the .jsonl logs of a finished run into plot-ready files."""
    run_dir = os.path.join(run_out, "runs")
    if not os.path.isdir(run_dir):
        raise ConfigError(f"no runs directory under {run_out}")
    out_dir = out_dir or run_out
    _ensure_dir(out_dir)
    logs: list[tuple[str, PadaRunLog]] = []
    for fname in sorted(os.listdir(run_dir)):
        if fname.endswith(".jsonl"):
            logs.append((fname[: -len(".jsonl")], read_log_jsonl(os.path.join(run_dir, fname))))

    lines = ["run,strategy,frequency,seed,update,rate,sparsity_before,sparsity_after,train_loss"]
    for name, log in logs:
        fin = log.final
        for ev in log.events:
            lines.append(
                f"{name},{fin.get('strategy')},{fin.get('frequency')},{fin.get('seed')},"
                f"{ev.update},{ev.rate!r},{ev.sparsity_before!r},{ev.sparsity_after!r},"
                f"{ev.train_loss!r}"
            )
    events_csv = os.path.join(out_dir, "events.csv")
    atomic_write_text(events_csv, "\n".join(lines) + "\n")

    by_cell: dict[tuple[str, str], list[float]] = {}
    runs = []
    for name, log in logs:
        fin = log.final
        runs.append({"run": name, "final": fin})
        key = (fin.get("strategy"), fin.get("frequency"))
        if "error_rate" in fin:
            by_cell.setdefault(key, []).append(fin["error_rate"])
    cells = [
        {
            "strategy": k[0],
            "frequency": k[1],
            "mean_error": sum(v) / len(v),
            "n_runs": len(v),
        }
        for k, v in sorted(by_cell.items())
    ]
    summary_json = os.path.join(out_dir, "summary.json")
    atomic_write_text(
        summary_json, json.dumps({"cells": cells, "runs": runs}, indent=2) + "\n"
    )
    return events_csv, summary_json


def _category(exc: Exception) -> str:
    if isinstance(exc, RunFailure):
        return _category(exc.__cause__) if exc.__cause__ is not None else "run"
    if isinstance(exc, FormatError):
        return "format"
    if isinstance(exc, StructureMismatchError):
        return "structure"
    if isinstance(exc, TrainingDivergedError):
        return "training"
    if isinstance(exc, (ConfigError, ScheduleError)):
        return "config"
    if isinstance(exc, OSError):
        return "io"
    if isinstance(exc, ValueError):
        return "config"
    return "internal"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pada", description="prune-assisted domain adaptation experiment harness"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_cmd(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", default=None, help="override the config's output directory")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        return p

    add_config_cmd("pretrain", "denoising pre-training; writes the pretrained checkpoint")
    add_config_cmd("make-donor", "source-domain fine-tuning; writes the donor checkpoint")
    p_run = add_config_cmd("run", "run the strategy/frequency grid over all seeds")
    p_run.add_argument("--seeds", default=None, help="comma-separated seed list override")

    p_cmp = sub.add_parser("compare-masks", help="IOU/MMA report for two .padm files")
    p_cmp.add_argument("mask_a")
    p_cmp.add_argument("mask_b")
    p_cmp.add_argument("--out", default=".", help="report output directory")
    p_cmp.add_argument("--force", action="store_true")

    p_rep = sub.add_parser("report", help="aggregate run logs into plot-ready CSV/JSON")
    p_rep.add_argument("run_out", help="output directory of a finished `pada run`")
    p_rep.add_argument("--out", default=None, help="where to write the aggregates")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command in ("pretrain", "make-donor", "run"):
            cfg = load_config(args.config)
            if args.out is not None:
                cfg.out = args.out
            if args.command == "pretrain":
                path = cmd_pretrain(cfg, force=args.force)
                print(f"wrote {path}")
            elif args.command == "make-donor":
                path = cmd_make_donor(cfg, force=args.force)
                print(f"wrote {path}")
            else:
                if args.seeds is not None:
                    cfg.seeds = [int(s) for s in args.seeds.split(",") if s]
                csv_path, json_path = cmd_run(cfg, force=args.force)
                print(f"wrote {csv_path}")
                print(f"wrote {json_path}")
        elif args.command == "compare-masks":
            csv_path, json_path = cmd_compare_masks(
                args.mask_a, args.mask_b, args.out, force=args.force
            )
            print(f"wrote {csv_path}")
            print(f"wrote {json_path}")
        else:
            events_csv, summary_json = cmd_report(args.run_out, args.out)
            print(f"wrote {events_csv}")
            print(f"wrote {summary_json}")
    except Exception as exc:  # single-line, machine-readable failure output
        print(f"{_category(exc)}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
