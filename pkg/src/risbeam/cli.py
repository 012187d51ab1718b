"""Command-line entry point: ``risbeam`` / ``python -m risbeam``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .pipeline import PipelineError, RunFlags, run_pipeline
from .scenario import Scenario, ScenarioError, parse_scenario


def parse_positions(text: str) -> list:
    """``"0-3,10,12-13"`` -> ``[0, 1, 2, 3, 10, 12, 13]`` (ranges inclusive)."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        try:
            a = int(lo)
            b = int(hi) if sep else a
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad position range {part!r}") from None
        if b < a or a < 0:
            raise argparse.ArgumentTypeError(f"bad position range {part!r}")
        out.extend(range(a, b + 1))
    if not out:
        raise argparse.ArgumentTypeError("empty position list")
    return sorted(set(out))


def parse_snr(text: str) -> list:
    """``"0"``, ``"-10,0,10"`` or an inclusive ``start:stop:step`` range, dB."""
    try:
        if ":" in text:
            a, b, s = (float(x) for x in text.split(":"))
            if s <= 0 or b < a:
                raise ValueError
            n = int(np.floor((b - a) / s + 1e-9)) + 1
            return [a + k * s for k in range(n)]
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad SNR list {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty SNR list")
    return vals


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="risbeam",
        description="Run the RIS on/off channel pipeline over a scenario and write CSV results.")
    ap.add_argument("--scenario", type=Path, help="scenario TOML file (default scene if omitted)")
    ap.add_argument("--ris", choices=("on", "off", "both"), default="both")
    mode = ap.add_mutually_exclusive_group()
    mode.add_argument("--estimate", action="store_true", help="extract paths from the CTF")
    mode.add_argument("--oracle-mpc", action="store_true",
                      help="feed ground-truth paths to the analysis (default)")
    ap.add_argument("--nlos-from", type=int, help="first position shadowed by the blocker")
    ap.add_argument("--positions", type=parse_positions, help="e.g. 0-3 or 0,5,10-20")
    ap.add_argument("--snr", type=parse_snr, help="SNR list in dB: 0 | -10,0,10 | -10:30:5")
    ap.add_argument("--out", type=Path, help="output directory (scenario run.output_dir if omitted)")
    ap.add_argument("--seed", type=_u64, help="overrides the scenario seed")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = parse_scenario(args.scenario) if args.scenario else Scenario().validate()
        if args.nlos_from is not None and not 0 < args.nlos_from < sc.scene.n_positions:
            raise ScenarioError(f"--nlos-from must lie in 1..{sc.scene.n_positions - 1}")
        flags = RunFlags(ris=args.ris, estimate=args.estimate, nlos_from=args.nlos_from,
                         positions=args.positions, snr_db=args.snr,
                         out=args.out or Path(sc.run.output_dir), seed=args.seed)
        res = run_pipeline(sc, flags)
    except (ScenarioError, FileNotFoundError) as exc:
        print(f"risbeam: scenario error: {exc}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        print(f"risbeam: {exc}", file=sys.stderr)
        return 1
    for name in sorted(res.files):
        print(res.files[name])
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
