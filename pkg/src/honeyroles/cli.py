"""Batch front-end: ``honeyroles --config run.toml --out-dir out``.

Exit status is 0 on success, 1 for configuration problems (nothing is
written) and 2 when the simulation itself fails.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import sys
from dataclasses import asdict
from pathlib import Path as FsPath

import numpy as np

from .config import ConfigError, Diagnostic, load_config
from .engine import ExperimentResult, SimConfig, load_topology, monte_carlo
from .prism import emit_model

CSV_HEADER = ("sample", "round", "switch_id", "tier", "a", "c", "r", "R", "rank", "compromised")
TOP_K = (1, 2, 5)


def config_digest(cfg: SimConfig) -> str:
    return hashlib.sha256(repr(sorted(asdict(cfg).items())).encode()).hexdigest()[:16]


def rankings_csv(result: ExperimentResult) -> str:
    topo = result.topology
    tiers = [t.value for t in topo.tiers]
    comp = set(result.compromised)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(CSV_HEADER)
    for s, sample in enumerate(result.samples):
        for rr in sample:
            for k in range(topo.num_switches):
                w.writerow((s, rr.index, k, tiers[k], rr.alarms[k], rr.honey[k],
                            repr(rr.ratio[k]), repr(rr.risk[k]), rr.positions[k],
                            int(k in comp)))
    return buf.getvalue()


def summary_block(result: ExperimentResult) -> str:
    cfg, topo = result.cfg, result.topology
    pos = result.positions
    after = slice(cfg.warmup, None)
    mean_rank = result.mean_rank()
    lines = [
        f"beta = {cfg.beta!r}",
        f"config digest = {config_digest(cfg)}",
        f"topology = {topo.name} ({topo.num_switches} switches)",
        f"samples = {pos.shape[0]}  rounds = {pos.shape[1]}  warmup = {cfg.warmup}",
    ]
    if not result.compromised:
        lines.append("no compromised switches")
    latency = result.detection_latency(2)
    for k in result.compromised:
        lines.append(f"switch {k} ({topo.tiers[k].value}):")
        lines.append("  mean rank per round: " + " ".join(f"{x:.2f}" for x in mean_rank[:, k]))
        cells = pos[:, :, k]
        for top in TOP_K:
            hit = int((cells <= top).sum())
            post = int((cells[:, after] <= top).sum())
            share = int((mean_rank[after, k] <= top).sum())
            lines.append(
                f"  rank<={top}: cells {hit}/{cells.size} ({hit / cells.size:.6f})"
                f"  after warmup {post}/{cells[:, after].size} ({post / cells[:, after].size:.6f})"
                f"  rounds with mean rank<={top} after warmup {share}/{mean_rank[after].shape[0]}"
            )
        first = result.switch_latency(k, 2)
        lines.append(f"  first round with mean rank<=2: {first if first is not None else 'never'}")
    if result.compromised:
        hits = [x for x in latency if x is not None]
        mean = f"{np.mean(hits):.2f}" if hits else "n/a"
        lines.append(f"detection latency (all compromised in top-2): mean round {mean}, "
                     f"detected in {len(hits)}/{len(latency)} samples")
    return "\n".join(lines) + "\n"


def _parse_betas(text: str) -> list[float]:
    try:
        betas = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError([Diagnostic(0, f"--beta: cannot parse {text!r}")]) from None
    if not betas:
        raise ConfigError([Diagnostic(0, "--beta: empty list")])
    for b in betas:
        if not 0 < b < 1:
            raise ConfigError([Diagnostic(0, "beta must lie strictly between 0 and 1")])
    return betas


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="honeyroles", description="Honey-connection deception simulator")
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--out-dir", default="out", help="where rankings.csv and summary.txt go")
    p.add_argument("--seed", type=int, help="override run.master_seed")
    p.add_argument("--samples", type=int, help="override run.samples")
    p.add_argument("--beta", help="override bms.beta; a comma list runs a sweep")
    p.add_argument("--export-prism", metavar="PATH", help="also write the PRISM model here")
    p.add_argument("--workers", type=int, default=1, help="processes for the sample fan-out")
    p.add_argument("--quiet", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    log = (lambda *a: None) if args.quiet else (lambda *a: print(*a, file=sys.stderr))
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_(master_seed=args.seed)
        if args.samples is not None:
            if args.samples < 1:
                raise ConfigError([Diagnostic(0, "--samples must be positive")])
            cfg = cfg.with_(samples=args.samples)
        betas = _parse_betas(args.beta) if args.beta else [cfg.beta]
        if args.workers < 1:
            raise ConfigError([Diagnostic(0, "--workers must be positive")])
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(d.format(args.config), file=sys.stderr)
        return 1

    try:
        topo = load_topology(cfg)
        outputs: dict[str, str] = {}
        blocks = []
        for beta in betas:
            run_cfg = cfg.with_(beta=beta)
            log(f"running {run_cfg.samples} samples at beta={beta}")
            result = monte_carlo(run_cfg, topo, workers=args.workers)
            name = "rankings.csv" if len(betas) == 1 else f"rankings-beta-{beta}.csv"
            outputs[name] = rankings_csv(result)
            blocks.append(summary_block(result))
        outputs["summary.txt"] = "\n".join(blocks)
        prism_text = emit_model(cfg.with_(beta=betas[0]), topo).text if args.export_prism else None
        out = FsPath(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in outputs.items():
            (out / name).write_text(text, encoding="utf-8", newline="")
        if prism_text is not None:
            FsPath(args.export_prism).write_text(prism_text + "\n", encoding="utf-8")
        log(f"wrote {', '.join(sorted(outputs))} to {out}")
    except Exception as exc:  # noqa: BLE001 - mapped to the runtime exit status
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
