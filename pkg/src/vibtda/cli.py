"""Command-line entry point: ``vibtda <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import embedding, indicators, persistence
from .config import ConfigError, PipelineConfig, from_dict, load_config
from .embedding import EmbeddingParams, PointCloud
from .monitor import PipelineError, rescore, run_pipeline
from .signal_io import ChunkFormatError, SignalSpec, load_chunk, synthesize, write_chunk


def _add_common(p: argparse.ArgumentParser, out_dir: bool = True) -> None:
    p.add_argument("--config", help="pipeline configuration JSON")
    p.add_argument("--seed", type=int, help="override the configured seed")
    if out_dir:
        p.add_argument("--out-dir", help="output directory")
    p.add_argument("--max-dim", type=int, choices=(0, 1, 2), help="highest homology dimension")
    p.add_argument("--target-points", type=int, help="subsampled cloud size")


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="chunk file (csv or raw_f32)")
    p.add_argument("--format", choices=("csv", "raw_f32"), default=None,
                   help="chunk format (default: from the file extension)")
    p.add_argument("--sample-rate", type=float, help="sample rate in Hz (else from the sidecar)")
    p.add_argument("--timestamp", help="ISO-8601 timestamp (else from the sidecar)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vibtda", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write synthetic chunks and a manifest from a signal spec")
    p.add_argument("--spec", required=True, help="signal spec JSON (one spec or a chunk list)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", choices=("csv", "raw_f32"), default="raw_f32")

    p = sub.add_parser("analyze", help="run the full pipeline over a manifest")
    _add_common(p)
    p.add_argument("--workers", type=int, help="worker processes")

    p = sub.add_parser("embed", help="delay-embed and subsample one chunk")
    _add_input(p)
    _add_common(p)
    p.add_argument("--tau", type=int)
    p.add_argument("--dim", type=int)

    p = sub.add_parser("persistence", help="persistence diagram of one chunk or point cloud")
    p.add_argument("--cloud", help="point cloud CSV (instead of --input)")
    p.add_argument("--input", help="chunk file")
    p.add_argument("--format", choices=("csv", "raw_f32"), default=None)
    p.add_argument("--sample-rate", type=float)
    p.add_argument("--timestamp")
    _add_common(p)
    p.add_argument("--tau", type=int)
    p.add_argument("--dim", type=int)

    p = sub.add_parser("indicators", help="indicator vector of one chunk")
    _add_input(p)
    _add_common(p)
    p.add_argument("--tau", type=int)
    p.add_argument("--dim", type=int)

    p = sub.add_parser("report", help="re-score an indicators.csv against a new baseline")
    p.add_argument("--indicators", required=True, help="indicators.csv from a previous analyze")
    p.add_argument("--config", help="pipeline configuration JSON (baseline section)")
    p.add_argument("--k-early", type=int, help="number of early chunks in the baseline")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", required=True)
    return parser


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else from_dict({})
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "max_dim", None) is not None:
        updates["persistence"] = {"max_dim": args.max_dim}
    if getattr(args, "target_points", None) is not None:
        updates["subsample"] = {"target_points": args.target_points}
    emb = {k: getattr(args, k) for k in ("tau", "dim") if getattr(args, k, None) is not None}
    if emb:
        updates["embedding"] = emb
    if getattr(args, "workers", None) is not None:
        updates["workers"] = args.workers
    return cfg.with_overrides(**updates) if updates else cfg


def _chunk(args):
    fmt = args.format
    if fmt is None:
        fmt = "csv" if str(args.input).lower().endswith(".csv") else "raw_f32"
    return load_chunk(args.input, fmt, args.sample_rate, args.timestamp)


def _out(args) -> Path:
    out = Path(args.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args) -> None:
    data = json.loads(Path(args.spec).read_text())
    entries = data["chunks"] if "chunks" in data else [{"spec": data}]
    out = _out(args)
    ext = "csv" if args.format == "csv" else "f32"
    manifest = {"chunks": []}
    for i, entry in enumerate(entries):
        spec = SignalSpec.from_dict(entry["spec"])
        seed = entry.get("seed", args.seed + i)
        chunk = synthesize(spec, seed, entry.get("timestamp", f"1970-01-01T00:00:{i:02d}Z"),
                           entry.get("sensor_id", "synthetic"))
        name = f"chunk_{i:04d}.{ext}"
        write_chunk(chunk, out / name, args.format)
        manifest["chunks"].append({"path": name, "format": args.format})
    if "failure_label" in data:
        manifest["failure_label"] = data["failure_label"]
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {len(entries)} chunk(s) and manifest.json to {out}")


def cmd_analyze(args) -> None:
    if not args.config:
        raise ConfigError("analyze needs --config")
    cfg = _config(args)
    result = run_pipeline(cfg, out_dir=args.out_dir)
    flagged = [r.timestamp for r in result.report.rows if r.flagged()]
    print(f"analyzed {len(result.vectors)} chunk(s) with tau={result.params.tau}, "
          f"dim={result.params.dim}; flagged: {flagged or 'none'}; outputs in {result.out_dir}")


def _cloud_for(args, cfg: PipelineConfig):
    chunk = _chunk(args)
    params, _ = indicators.select_params(chunk, cfg)
    full = embedding.takens_embed(chunk.samples, params)
    cloud = embedding.subsample(full, cfg.subsample.target_points, cfg.subsample.strategy, cfg.seed)
    return params, cloud


def cmd_embed(args) -> None:
    cfg = _config(args)
    params, cloud = _cloud_for(args, cfg)
    out = _out(args)
    cloud.write_csv(out / "cloud.csv")
    (out / "embedding.json").write_text(json.dumps(
        {"tau": params.tau, "dim": params.dim, "n_points": cloud.n, "seed": cfg.seed}, indent=2) + "\n")
    print(f"tau={params.tau} dim={params.dim} points={cloud.n} -> {out / 'cloud.csv'}")


def cmd_persistence(args) -> None:
    cfg = _config(args)
    if args.cloud:
        cloud = PointCloud.read_csv(args.cloud)
    elif args.input:
        _, cloud = _cloud_for(args, cfg)
    else:
        raise ValueError("persistence needs --cloud or --input")
    pc = cfg.persistence
    diagram = persistence.rips_persistence(cloud, pc.max_dim, pc.max_filtration, pc.simplex_budget)
    out = _out(args)
    diagram.write_csv(out / "diagram.csv")
    print(f"{len(diagram.pairs)} pairs up to H{pc.max_dim} -> {out / 'diagram.csv'}")


def cmd_indicators(args) -> None:
    cfg = _config(args)
    chunk = _chunk(args)
    vec = indicators.indicator_vector(chunk, cfg)
    out = _out(args)
    (out / "indicators.json").write_text(json.dumps(vec.to_json(), indent=2) + "\n")
    print(json.dumps(vec.values, indent=2))


def cmd_report(args) -> None:
    cfg = load_config(args.config) if args.config else from_dict({})
    if args.k_early is not None:
        cfg = cfg.with_overrides(baseline={"k_early": args.k_early})
    seed = args.seed if args.seed is not None else cfg.seed
    report = rescore(args.indicators, cfg.baseline, cfg.hash(), seed)
    out = _out(args)
    report.write(out / "report.json")
    flagged = [r.timestamp for r in report.rows if r.flagged()]
    print(f"re-scored {len(report.rows)} chunk(s); flagged: {flagged or 'none'}")


COMMANDS = {
    "synth": cmd_synth,
    "analyze": cmd_analyze,
    "embed": cmd_embed,
    "persistence": cmd_persistence,
    "indicators": cmd_indicators,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: [config] {exc}", file=sys.stderr)
        return 2
    except (PipelineError, indicators.StageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ChunkFormatError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: [{args.command}] {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
