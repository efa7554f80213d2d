"""Window-to-window gyration radius of a stationary vs frequency-modulated tone.

Usage: python3 scripts/fm_signature.py [--freq 1400] [--mod 3] [--dev 100] [--noise 0]
"""
import argparse

from vibtda.config import from_dict
from vibtda.indicators import select_params
from vibtda.monitor import sliding_window_indicators
from vibtda.signal_io import FrequencyModulation, SignalSpec, ToneComponent, synthesize


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--freq", type=float, default=1400.0)
    ap.add_argument("--mod", type=float, default=3.0)
    ap.add_argument("--dev", type=float, default=100.0)
    ap.add_argument("--noise", type=float, default=0.0)
    ap.add_argument("--window", type=float, default=0.005)
    args = ap.parse_args()

    cfg = from_dict({"windows": {"topology": False, "window_s": args.window}})
    tone = (ToneComponent(args.freq),)
    stat = synthesize(SignalSpec(tone, noise_std=args.noise, duration_s=1.0), 0)
    fm = synthesize(SignalSpec(tone, noise_std=args.noise, duration_s=1.0,
                               fm=FrequencyModulation(args.mod, args.dev)), 0)
    params, _ = select_params(stat, cfg)
    print(f"embedding tau={params.tau} dim={params.dim}")
    for name, chunk in (("stationary", stat), ("fm", fm)):
        w = sliding_window_indicators(chunk, cfg, params)
        g = w.std["gyration_radius"]
        print(f"{name:10s} windows={len(w.vectors):4d} mean={w.mean['gyration_radius']:.5f} std={g:.3e}")


if __name__ == "__main__":
    main()
