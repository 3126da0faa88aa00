"""Command line entry point: ``cpcsim run | suite | replay``.

Every command prints one JSON object on stdout and exits 0 on success,
1 on failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, parse_config
from .protocol import GameTranscript
from .runner import CHECKPOINT_FILE, read_checkpoint_signs, run_experiment
from .suites import SUITES


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True, default=float))


def cmd_run(args) -> int:
    try:
        config = parse_config(args.config)
        if args.seeds:
            config = replace(config, seeds=tuple(int(s) for s in args.seeds.split(",")))
    except (ConfigError, OSError, ValueError) as exc:
        _emit({"status": "error", "stage": "config", "error": str(exc)})
        return 1
    out = Path(args.out or config.output_dir)
    try:
        artifacts = run_experiment(config, out, workers=args.workers)
    except OSError as exc:
        _emit({"status": "error", "stage": "output", "error": str(exc)})
        return 1
    failures = [{"seed": a.seed, "error": a.error} for a in artifacts if a.status != "ok"]
    _emit({
        "status": "ok" if not failures else "failed",
        "output_dir": str(out),
        "seeds": [a.seed for a in artifacts],
        "failures": failures,
        "summary": str(out / "summary.json"),
    })
    return 0 if not failures else 1


def cmd_suite(args) -> int:
    result = SUITES[args.name](out_dir=args.out)
    for c in result.criteria:
        print(c.line(), file=sys.stderr)
    _emit({
        "status": "ok" if result.passed else "failed",
        "suite": result.name,
        "criteria": {c.name: c.passed for c in result.criteria},
        "elapsed_seconds": result.elapsed_seconds,
    })
    return 0 if result.passed else 1


def cmd_replay(args) -> int:
    path = Path(args.transcript)
    try:
        transcript = GameTranscript.read(path)
    except Exception as exc:
        _emit({"status": "error", "stage": "transcript", "error": str(exc)})
        return 1
    final = transcript.replay().signs
    ckpt = Path(args.checkpoint) if args.checkpoint else path.parent / CHECKPOINT_FILE
    try:
        expected = read_checkpoint_signs(ckpt.parent if ckpt.name == CHECKPOINT_FILE else ckpt)
    except OSError as exc:
        _emit({"status": "error", "stage": "checkpoint", "error": str(exc)})
        return 1
    match = bool(np.array_equal(final, expected))
    _emit({
        "status": "ok" if match else "failed",
        "events": len(transcript.events),
        "accepted": sum(1 for e in transcript.events if e.accepted),
        "final_signs_match": match,
    })
    return 0 if match else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cpcsim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--seeds", help="comma-separated seeds overriding the config")
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("suite", help="run a built-in suite")
    s.add_argument("name", choices=sorted(SUITES))
    s.add_argument("--out")
    s.set_defaults(func=cmd_suite)

    rp = sub.add_parser("replay", help="rebuild final signs from a transcript")
    rp.add_argument("--transcript", required=True)
    rp.add_argument("--checkpoint", help="defaults to checkpoint.json beside the transcript")
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
