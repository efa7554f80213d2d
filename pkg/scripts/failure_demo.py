"""Synthetic run-to-failure series scored against an early-life baseline.

Healthy chunks are a noisy 1400 Hz tone; the last chunks pick up frequency
modulation of growing depth. Writes the usual pipeline outputs and prints the
most deviant indicators per chunk.

Usage: python3 scripts/failure_demo.py [--out-dir out/demo] [--chunks 8] [--faulty 3]
"""
import argparse

from vibtda.config import from_dict
from vibtda.monitor import run_pipeline
from vibtda.signal_io import Dataset, FrequencyModulation, SignalSpec, ToneComponent, synthesize


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="out/demo")
    ap.add_argument("--chunks", type=int, default=8)
    ap.add_argument("--faulty", type=int, default=3)
    ap.add_argument("--noise", type=float, default=0.01)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    chunks = []
    for i in range(args.chunks):
        k = i - (args.chunks - args.faulty) + 1
        fm = FrequencyModulation(3.0, 40.0 * k) if k > 0 else None
        spec = SignalSpec((ToneComponent(1400.0),), noise_std=args.noise, fm=fm, duration_s=1.0)
        chunks.append(synthesize(spec, i, timestamp=f"2023-10-{i + 1:02d}T00:00:00Z"))
    cfg = from_dict({"windows": {"max_windows": 100}, "workers": args.workers})
    res = run_pipeline(cfg, out_dir=args.out_dir, dataset=Dataset(tuple(chunks)))
    print(f"tau={res.params.tau} dim={res.params.dim}; outputs in {res.out_dir}")
    for row in res.report.rows:
        top = sorted(row.entries.items(), key=lambda kv: -abs(kv[1].z))[:3]
        desc = ", ".join(f"{n} z={e.z:+.1f}" for n, e in top)
        print(f"{row.timestamp}  {'FLAG' if row.flagged() else 'ok  '}  {desc}")


if __name__ == "__main__":
    main()
