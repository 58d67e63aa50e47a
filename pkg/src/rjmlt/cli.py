"""Command-line entry point: ``render``, ``validate1d``, ``compare`` and ``stats``.

All randomness derives from ``--seed``. Outputs are assembled in memory and
only written once every one of them is ready, so a failing run leaves no
files behind. Logging verbosity comes from ``RJMLT_LOG`` (error, info, debug).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__, oned
from .diagnostics import mse, relative_mse
from .errors import RJMLTError
from .imageio import companion_ppm, encode_pfm, encode_ppm, read_pfm, write_atomic
from .lt.bdpt import KMAX_DEFAULT
from .lt.mlt import mlt_render
from .lt.pt import path_trace_reference
from .lt.scene import Scene
from .psscore import BOOTSTRAP_SAMPLES, DEFAULT_S1, DEFAULT_S2, PerturbationMix

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
log = logging.getLogger("rjmlt")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _mix(text):
    try:
        return PerturbationMix.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rjmlt", description="Reversible-jump Metropolis light transport.")
    p.add_argument("--version", action="version", version=f"rjmlt {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("render", help="render a scene with mmlt, rjmlt or the path tracer")
    r.add_argument("--scene", required=True)
    r.add_argument("--integrator", choices=("rjmlt", "mmlt", "pt"), default="rjmlt")
    r.add_argument("--mutations", type=_positive_int, default=1_000_000)
    r.add_argument("--spp", type=_positive_int, default=64, help="samples per pixel (pt)")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--mix", type=_mix, default=PerturbationMix(),
                   help="large,small,jump probabilities (default 0.1,0.85,0.05)")
    r.add_argument("--kmax", type=_positive_int, default=KMAX_DEFAULT)
    r.add_argument("--s1", type=float, default=DEFAULT_S1)
    r.add_argument("--s2", type=float, default=DEFAULT_S2)
    r.add_argument("--bootstrap", type=_positive_int, default=BOOTSTRAP_SAMPLES)
    r.add_argument("--threads", type=_positive_int, default=1)
    r.add_argument("--out", required=True, help="PFM path; an 8-bit PPM is written alongside")
    r.add_argument("--stats", help="JSON statistics path")
    r.add_argument("--trace-jumps", help="JSON-lines path for reversible-jump records")
    r.add_argument("--trace-limit", type=_positive_int, default=10_000,
                   help="jump records kept per path length")
    r.add_argument("--timing", action="store_true",
                   help="record wall-clock seconds in the stats (breaks byte-identical reruns)")

    v = sub.add_parser("validate1d", help="run a 1D integrator and write its histograms")
    v.add_argument("--variant", choices=oned.VARIANTS, default="full")
    v.add_argument("--steps", type=_positive_int, default=10_000_000)
    v.add_argument("--bins", type=_positive_int, default=100)
    v.add_argument("--seed", type=int, default=1)
    v.add_argument("--seeds", type=_positive_int, default=1,
                   help="pool this many consecutive seeds starting at --seed")
    v.add_argument("--threads", type=_positive_int, default=1)
    v.add_argument("--out", required=True, help="CSV path")
    v.add_argument("--stats", help="JSON summary path")

    c = sub.add_parser("compare", help="print the MSE between two PFM images")
    c.add_argument("--ref", required=True)
    c.add_argument("--img", required=True)
    c.add_argument("--relative", action="store_true", help="also print the relative MSE")

    s = sub.add_parser("stats", help="summarize a render statistics file")
    s.add_argument("stats_file")
    s.add_argument("--out", help="write the per-length table as CSV")
    return p


def _stats_payload(algorithm, seed, per_length, brightness, wall):
    doc = {"algorithm": algorithm, "seed": seed, "per_length": per_length,
           "brightness_b": brightness, "wall_seconds": wall}
    return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode()


def _check_outputs(*paths):
    for path in paths:
        if path is not None and not Path(path).parent.exists():
            raise OSError(f"output directory {Path(path).parent} does not exist")


def cmd_render(args):
    _check_outputs(args.out, args.stats, args.trace_jumps)
    if args.trace_jumps and args.integrator != "rjmlt":
        raise UsageError("--trace-jumps requires --integrator rjmlt")
    scene = Scene.load(args.scene)
    start = time.perf_counter()
    outputs = {}
    if args.integrator == "pt":
        image = path_trace_reference(scene, args.spp, args.seed, kmax=args.kmax,
                                     threads=args.threads)
        per_length, brightness, records = {}, None, []
    else:
        result = mlt_render(scene, args.integrator, args.mutations, args.mix, args.seed,
                            kmax=args.kmax, s1=args.s1, s2=args.s2,
                            bootstrap_samples=args.bootstrap, threads=args.threads,
                            trace_jumps=args.trace_limit if args.trace_jumps else 0)
        image = result.image
        per_length, brightness = result.stats_dict(), result.brightness
        records = result.jump_records()
    wall = round(time.perf_counter() - start, 3) if args.timing else None
    outputs[Path(args.out)] = encode_pfm(image)
    outputs[companion_ppm(args.out)] = encode_ppm(image)
    if args.stats:
        outputs[Path(args.stats)] = _stats_payload(args.integrator, args.seed, per_length,
                                                   brightness, wall)
    if args.trace_jumps:
        lines = "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in records)
        outputs[Path(args.trace_jumps)] = lines.encode()
    _write_all(outputs)
    log.info("wrote %s", ", ".join(str(p) for p in outputs))
    return 0


def _pooled_variant(args):
    seeds = range(args.seed, args.seed + args.seeds)
    if args.threads > 1 and args.seeds > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            pairs = list(pool.map(
                lambda s: oned.run_variant(args.variant, args.steps, s, bins=args.bins), seeds))
    else:
        pairs = [oned.run_variant(args.variant, args.steps, s, bins=args.bins) for s in seeds]
    return oned.HistogramPair.merge(pairs)


def cmd_validate1d(args):
    _check_outputs(args.out, args.stats)
    pair = _pooled_variant(args)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(oned.CSV_HEADER)
    for row in oned.histogram_table(pair):
        writer.writerow([repr(float(x)) for x in row])
    outputs = {Path(args.out): buf.getvalue().encode()}
    stat, pvalue = pair.chi_square()
    if args.stats:
        l1 = pair.usage_l1()
        doc = {"variant": args.variant, "seed": args.seed, "seeds": args.seeds,
               "steps": args.steps, "bins": args.bins, "chi_square": stat, "p_value": pvalue,
               "effective_samples": pair.effective_samples(),
               "max_usage_l1": float(l1.max()) if l1.size else None,
               "counts": pair.counts}
        outputs[Path(args.stats)] = (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode()
    _write_all(outputs)
    print(f"variant={args.variant} chi2={stat:.6g} p={pvalue:.6g}")
    return 0


def cmd_compare(args):
    ref = read_pfm(args.ref)
    img = read_pfm(args.img)
    print(f"mse={mse(img, ref):.10g}")
    if args.relative:
        print(f"relative_mse={relative_mse(img, ref):.10g}")
    return 0


def _rate(counter):
    n = counter.get("proposed", 0)
    return counter.get("accepted", 0) / n if n else float("nan")


def cmd_stats(args):
    try:
        doc = json.loads(Path(args.stats_file).read_text())
        per = doc["per_length"]
        if not isinstance(per, dict):
            raise TypeError("per_length is not an object")
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValueError(f"{args.stats_file}: not a render statistics file ({exc})") from exc
    header = ("k", "small_acceptance", "technique_change_acceptance", "jump_acceptance",
              "jump_verified_fail")
    rows = []
    for k in sorted(per, key=int):
        d = per[k]
        rows.append((int(k), _rate(d.get("small", {})),
                     _rate(d.get("small_technique_change", {})), _rate(d.get("jump", {})),
                     d.get("jump", {}).get("verified_fail", 0)))
    print(f"algorithm={doc.get('algorithm')} seed={doc.get('seed')} "
          f"brightness_b={doc.get('brightness_b')}")
    print("  ".join(header))
    for row in rows:
        print("  ".join(f"{x:.4f}" if isinstance(x, float) else str(x) for x in row))
    if args.out:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([[repr(x) if isinstance(x, float) else x for x in row] for row in rows])
        _write_all({Path(args.out): buf.getvalue().encode()})
    return 0


def _write_all(outputs: dict):
    """Write every payload or none of them."""
    _check_outputs(*outputs)
    written = []
    try:
        for path, data in outputs.items():
            write_atomic(path, data)
            written.append(path)
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise


COMMANDS = {"render": cmd_render, "validate1d": cmd_validate1d, "compare": cmd_compare,
            "stats": cmd_stats}


def _configure_logging():
    level = os.environ.get("RJMLT_LOG", "error").lower()
    if level not in LOG_LEVELS:
        raise UsageError(f"RJMLT_LOG must be one of {sorted(LOG_LEVELS)}, got {level!r}")
    logging.basicConfig(level=LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


def dispatch(argv=None) -> int:
    try:
        _configure_logging()
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"rjmlt: usage error: {exc}", file=sys.stderr)
        return 2
    except (RJMLTError, ValueError, OSError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"rjmlt: error: {msg}", file=sys.stderr)
        return 1


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
