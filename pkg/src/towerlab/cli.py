"""Command-line entry point: ``towerlab <command> ...``.

Exit codes: 0 success, 2 usage, 3 computation failure, 4 invalid
certificate, 5 OEIS mismatch.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import mpmath

from . import __version__
from . import oeis
from .analysis import InsufficientContraction, LimitEnclosure, enclose_subsequence_limit, estimate_rate
from .certify import (
    cipra_certificate,
    dolan_certify,
    replay_certificate,
    shooting_bisect,
    shooting_sequence,
)
from .interpolation import interp_csv, product_csv, product_diagnostic
from .numerics import ConvergenceError, Context, DomainError, decimal_down, decimal_up
from .towers import BaseSequence, eval_stabilized, tower_sequence

EXIT_OK, EXIT_USAGE, EXIT_COMPUTE, EXIT_INVALID, EXIT_MISMATCH = 0, 2, 3, 4, 5
CACHE_ENV = oeis.CACHE_ENV


class UsageError(Exception):
    pass


def default_cache_root() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "towerlab"


def _seq(sel: str) -> BaseSequence:
    try:
        return BaseSequence.from_selector(sel)
    except (ValueError, OSError) as e:
        raise UsageError(str(e)) from None


def _config(args) -> dict:
    skip = {"func", "json"}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    cfg["format"] = args.format
    cfg["version"] = __version__
    return cfg


def _emit(args, payload: dict, text: str | None = None, csv_text: str | None = None):
    if args.format == "json":
        out = {"config": _config(args), **payload}
        sys.stdout.write(json.dumps(out, indent=2, sort_keys=True) + "\n")
    elif args.format == "csv" and csv_text is not None:
        sys.stdout.write(csv_text)
    else:
        sys.stdout.write((text if text is not None else json.dumps(payload, indent=2)) + "\n")


def _sig(x, digits: int = 15) -> str:
    return mpmath.nstr(x, digits)


# --- commands ----------------------------------------------------------------


def cmd_table(args) -> int:
    seq = _seq(args.seq)
    ctx = Context(args.prec)
    vals = tower_sequence(seq, args.n, ctx, interval=True)
    d = max(6, args.sig)
    rows = [
        {"n": i, "value": _sig(v.mid, d), "lo": decimal_down(v.lo, d + 5), "hi": decimal_up(v.hi, d + 5)}
        for i, v in enumerate(vals, 1)
    ]
    text = "\n".join(f"{r['n']}\t{r['value']}" for r in rows)
    csv_text = "n,a_n\n" + "".join(f"{r['n']},{r['value']}\n" for r in rows)
    _emit(args, {"rows": rows}, text, csv_text)
    return EXIT_OK


def _limits_cache_path(args) -> Path:
    key = json.dumps(["limits", args.seq, args.parity, args.digits, args.prec, __version__])
    h = hashlib.sha256(key.encode()).hexdigest()[:32]
    return Path(args.cache_dir or default_cache_root()) / "results" / f"limits-{h}.json"


def cmd_limits(args) -> int:
    if args.digits < 1:
        raise UsageError("--digits must be >= 1")
    seq = _seq(args.seq)
    if seq.kind == "custom":
        raise UsageError("limits needs zi or zii")
    status = "off"
    result = None
    path = None
    if not args.no_cache:
        path = _limits_cache_path(args)
        if path.is_file():
            try:
                result = json.loads(path.read_text())
                status = "hit"
            except (OSError, ValueError):
                result = None
        if result is None:
            status = "miss"
    if result is None:
        enc: LimitEnclosure = enclose_subsequence_limit(seq, args.parity, args.digits, Context(args.prec))
        result = enc.to_json()
        if path is not None:
            oeis.atomic_write(path, json.dumps(result, sort_keys=True).encode())
    _emit(args, {"enclosure": result, "cache": status}, result["value"])
    return EXIT_OK


def _cert_out(args, cert) -> int:
    data = cert.to_json()
    text = f"{cert.kind} {'VALID' if cert.valid else 'INVALID'}"
    if not cert.valid:
        text += " (failed: " + ", ".join(cert.failed()) + ")"
    _emit(args, {"certificate": data, "valid": cert.valid}, text)
    return EXIT_OK if cert.valid else EXIT_INVALID


def cmd_certify(args) -> int:
    ctx = Context(args.prec)
    if args.kind == "dolan":
        cert = dolan_certify(
            _seq(args.seq), args.parity, args.candidate, args.depth, args.theta, args.tmax,
            ctx, bound=args.bound, max_index=args.max_index,
        )
    elif args.kind == "cipra":
        cert = cipra_certificate(_seq(args.seq), args.k, ctx)
    else:
        data = json.loads(Path(args.file).read_text())
        data = data.get("certificate", data)
        cert = replay_certificate(data)
        if cert.to_json() != data:
            _emit(args, {"certificate": cert.to_json(), "valid": False, "replay_matches": False},
                  "replay does not reproduce the stored certificate")
            return EXIT_INVALID
    return _cert_out(args, cert)


def cmd_shoot(args) -> int:
    ctx = Context(args.prec)
    if args.bisect:
        lo, hi = args.bisect
        res = shooting_bisect(lo, hi, args.n, ctx)
        data = res.to_json(args.sig)
        text = f"t1* = {data['t1_star']}  bracket [{data['bracket'][0]}, {data['bracket'][1]}]  prefix {res.prefix}"
        _emit(args, {"bisect": data}, text)
        return EXIT_OK
    if args.t1 is None:
        raise UsageError("shoot needs --t1 or --bisect LO HI")
    rep = shooting_sequence(args.t1, args.n, ctx)
    data = rep.to_json(args.sig)
    lines = [f"{k}\t{v}" for k, v in enumerate(data["orbit"], 1)]
    if rep.first_violation:
        lines.append(f"first violation at index {rep.first_violation['index']} ({rep.first_violation['direction']})")
    else:
        lines.append(f"monotone through horizon {rep.horizon}")
    csv_text = "k,t_k\n" + "".join(f"{k},{v}\n" for k, v in enumerate(data["orbit"], 1))
    _emit(args, {"shooting": data}, "\n".join(lines), csv_text)
    return EXIT_OK


def cmd_stabilized(args) -> int:
    seq = _seq(args.seq)
    ctx = Context(args.prec)
    plain = tower_sequence(seq, args.n, ctx)
    rows = []
    for n in range(1, args.n + 1):
        b = eval_stabilized(seq, n, ctx).value
        rows.append({"n": n, "a_n": _sig(plain[n - 1], args.sig), "b_n": _sig(b, args.sig)})
    text = "\n".join(f"{r['n']}\t{r['a_n']}\t{r['b_n']}" for r in rows)
    csv_text = "n,a_n,b_n\n" + "".join(f"{r['n']},{r['a_n']},{r['b_n']}\n" for r in rows)
    _emit(args, {"rows": rows}, text, csv_text)
    return EXIT_OK


def cmd_interp(args) -> int:
    seq = _seq(args.seq)
    ctx = Context(args.prec)
    if args.product:
        rows = product_diagnostic(seq, args.product, ctx)
        csv_text = product_csv(rows, args.sig)
        payload = {"product": [{"m": r.m, "term": _sig(r.term, args.sig), "P_m": _sig(r.product, args.sig)} for r in rows]}
    else:
        if not args.x:
            raise UsageError("interp needs --x or --product")
        csv_text = interp_csv(seq, args.x, ctx, args.sig)
        if not args.derivative:
            csv_text = "".join(",".join(line.split(",")[:2]) + "\n" for line in csv_text.splitlines())
        lines = csv_text.splitlines()
        head = lines[0].split(",")
        payload = {"points": [dict(zip(head, line.split(","))) for line in lines[1:]]}
    _emit(args, payload, csv_text.rstrip("\n"), csv_text)
    return EXIT_OK


def cmd_rate(args) -> int:
    fit = estimate_rate(_seq(args.seq), args.parity, args.n_min, args.n_max, Context(args.prec))
    data = fit.to_json()
    data["k_hat"] = f"{fit.k_hat:.6f}"
    data["c_hat"] = f"{fit.c_hat:.6f}"
    data["residual"] = f"{fit.residual:.3e}"
    data["points"] = [[n, f"{v:.6f}"] for n, v in fit.points]
    _emit(args, {"rate": data}, f"k_hat = {data['k_hat']}  (residual {data['residual']}, {len(fit.points)} points)")
    return EXIT_OK


def _load_bfile(args, oeis_id: str) -> oeis.BFile:
    if isinstance(args.offline, str):
        text = Path(args.offline).read_text()
    else:
        text = oeis.fetch_bfile(oeis_id, Path(args.cache_dir) / "oeis" if args.cache_dir else None,
                                offline=bool(args.offline))
    return oeis.parse_bfile(text, oeis_id)


def cmd_oeis(args) -> int:
    oeis.check_id(args.id)
    if args.action == "fetch":
        bf = _load_bfile(args, args.id)
        _emit(args, {"id": bf.id, "terms": len(bf.entries), "offset": bf.offset}, oeis.serialize_bfile(bf).rstrip("\n"))
        return EXIT_OK
    if args.digits < 1:
        raise UsageError("--digits must be >= 1")
    bf = _load_bfile(args, args.id)
    ctx = Context(args.prec)
    seqs = [args.seq] if args.seq else ["zi", "zii"]
    parities = [args.parity] if args.parity else ["even", "odd"]
    results = []
    for s in seqs:
        for p in parities:
            enc = enclose_subsequence_limit(_seq(s), p, args.digits, ctx)
            results.append((f"{s}:{p}", oeis.compare_digits(enc, bf)))
    label, best = max(results, key=lambda r: r[1].matched_prefix)
    ok = best.first_mismatch is None and best.matched_prefix >= min(args.digits, len(bf.entries) - best.integer_entries)
    payload = {
        "comparison": best.to_json(),
        "constant": label,
        "scores": {lab: c.matched_prefix for lab, c in results},
        "match": ok,
    }
    text = f"{args.id} ~ {label}: matched_prefix {best.matched_prefix}, first_mismatch {best.first_mismatch}"
    _emit(args, payload, text)
    return EXIT_OK if ok else EXIT_MISMATCH


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--prec", type=int, default=256, help="working precision in bits (default 256)")
    common.add_argument("--format", choices=("text", "json", "csv"), default="text")
    common.add_argument("--json", action="store_true", help="shorthand for --format json")
    common.add_argument("--sig", type=int, default=12, help="significant digits in tables (default 12)")
    common.add_argument("--cache-dir", default=None, help=f"cache root (default ${CACHE_ENV} or ~/.cache/towerlab)")

    p = argparse.ArgumentParser(prog="towerlab", description="Certified power-tower sequence computations.")
    p.add_argument("--version", action="version", version=f"towerlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, **kw):
        sp = sub.add_parser(name, parents=[common], **kw)
        sp.set_defaults(func=func)
        return sp

    def seq_arg(sp, default="zi"):
        sp.add_argument("--seq", default=default, help="zi | zii | custom:<file> | custom:p/q,p/q,...")

    sp = add("table", cmd_table, help="terms a_1..a_n")
    seq_arg(sp)
    sp.add_argument("--n", type=int, default=7)

    sp = add("limits", cmd_limits, help="certified even/odd subsequence limit")
    seq_arg(sp)
    sp.add_argument("--parity", choices=("even", "odd"), default="even")
    sp.add_argument("--digits", type=int, default=50)
    sp.add_argument("--no-cache", action="store_true")

    sp = add("certify", cmd_certify, help="bound certificates")
    sp.add_argument("kind", choices=("dolan", "cipra", "replay"))
    seq_arg(sp)
    sp.add_argument("--parity", choices=("even", "odd"), default="even")
    sp.add_argument("--bound", choices=("lower", "upper"), default="lower")
    sp.add_argument("--candidate", default="0.8588")
    sp.add_argument("--depth", type=int, default=7)
    sp.add_argument("--theta", default="0.8")
    sp.add_argument("--tmax", default="0.033")
    sp.add_argument("--max-index", type=int, default=2000)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--file", help="certificate JSON to replay")

    sp = add("shoot", cmd_shoot, help="shooting orbits and bisection")
    sp.add_argument("--t1")
    sp.add_argument("--n", type=int, default=9)
    sp.add_argument("--bisect", nargs=2, metavar=("LO", "HI"))

    sp = add("stabilized", cmd_stabilized, help="a_n next to the Lambert-seeded b_n")
    seq_arg(sp)
    sp.add_argument("--n", type=int, default=10)

    sp = add("interp", cmd_interp, help="smooth interpolant A_1(x)")
    seq_arg(sp)
    sp.add_argument("--x", nargs="+")
    sp.add_argument("--derivative", action="store_true")
    sp.add_argument("--product", type=int, metavar="M_MAX")

    sp = add("rate", cmd_rate, help="fit the error-decay exponent")
    seq_arg(sp, "zii")
    sp.add_argument("--parity", choices=("even", "odd"), default="even")
    sp.add_argument("--n-min", type=int, default=4)
    sp.add_argument("--n-max", type=int, default=24)

    sp = add("oeis", cmd_oeis, help="OEIS b-file fetch / compare")
    sp.add_argument("action", choices=("fetch", "compare"))
    sp.add_argument("--id", required=True)
    sp.add_argument("--digits", type=int, default=40)
    sp.add_argument("--seq", choices=("zi", "zii"))
    sp.add_argument("--parity", choices=("even", "odd"))
    sp.add_argument("--offline", nargs="?", const=True, default=False, metavar="BFILE",
                    help="no network; optionally read the b-file from BFILE")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.json:
        args.format = "json"
    if args.prec < 64:
        parser.error("--prec must be >= 64")
    try:
        return args.func(args)
    except UsageError as e:
        parser.error(str(e))
    except (DomainError, oeis.BFileError, oeis.AlignmentError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except oeis.FetchError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_COMPUTE
    except (InsufficientContraction, ConvergenceError) as e:
        print(f"computation failed: {e}", file=sys.stderr)
        return EXIT_COMPUTE
    except (ValueError, IndexError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
