"""Command-line front end: synth, fit, eval, query, sample, grid.

One command per process.  Every file-producing run writes a JSON manifest
beside its outputs (command, parameters, seeds, input/output hashes,
timestamps, package version); read-only commands accept --manifest PATH.
Exit codes: 0 success, 2 usage, 3 data, 4 numeric degeneracy, 5 failed
convergence.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys
import time


class UsageError(ValueError):
    """Malformed command-line value; names the offending token."""


def _parse_floats(text: str, what: str) -> list[float]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        try:
            out.append(float(tok))
        except ValueError:
            raise UsageError(f"{what}: bad number {tok!r}") from None
    return out


def _parse_rect(text: str) -> tuple[list[float], list[float]]:
    lo, hi = [], []
    for tok in text.split(","):
        tok = tok.strip()
        parts = tok.split(":")
        if len(parts) != 2:
            raise UsageError(f"--rect: bad interval {tok!r} (want lo:hi)")
        try:
            a, b = float(parts[0]), float(parts[1])
        except ValueError:
            raise UsageError(f"--rect: bad number in {tok!r}") from None
        lo.append(a)
        hi.append(b)
    return lo, hi


def _parse_indices(text: str, what: str) -> list[int]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        try:
            i = int(tok)
        except ValueError:
            raise UsageError(f"{what}: bad index {tok!r}") from None
        if i < 1:
            raise UsageError(f"{what}: indices are 1-based, got {tok!r}")
        out.append(i - 1)
    return out


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(path, command, params, seeds, inputs, outputs, started, t0,
                    status="ok", extra=None):
    from . import __version__

    doc = {
        "command": command,
        "package_version": __version__,
        "parameters": params,
        "seeds": seeds,
        "inputs": [{"path": os.path.abspath(p), "sha256": _sha256(p)} for p in inputs],
        "outputs": [{"path": os.path.abspath(p), "sha256": _sha256(p)} for p in outputs],
        "started_utc": started,
        "wall_seconds": round(time.perf_counter() - t0, 3),
        "status": status,
    }
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _widths(text: str) -> tuple[int, ...]:
    try:
        widths = tuple(int(tok.strip()) for tok in text.split(","))
    except ValueError:
        raise UsageError(f"--widths: bad list {text!r}") from None
    if not widths or any(w < 1 for w in widths):
        raise UsageError(f"--widths: need positive integers, got {text!r}")
    return widths


# -- commands ----------------------------------------------------------------

def _cmd_synth(args) -> int:
    from . import data as dat
    from .copula import CopulaModel
    from .families import make_family
    from .sampling import sample

    started, t0 = _now(), time.perf_counter()
    theta = None if args.family == "independence" else args.theta
    if args.family != "independence" and theta is None:
        raise UsageError("--theta is required for this family")
    family = make_family(args.family, theta)
    model = CopulaModel(args.dimension, family)
    total = args.n_train + args.n_test
    raw = sample(model, total, args.seed)
    train, test = dat.split(dat.Dataset(raw), args.n_train, args.seed + 1)
    if args.outliers > 0:
        train = dat.inject_outliers(train, args.outliers, args.seed + 2)
    if args.flip:
        coords = _parse_indices(args.flip, "--flip")
        train = dat.flip(train, coords)
        test = dat.flip(test, coords)
    os.makedirs(args.out, exist_ok=True)
    train_path = os.path.join(args.out, "train.csv")
    test_path = os.path.join(args.out, "test.csv")
    dat.write_points(train_path, train)
    dat.write_points(test_path, test)
    outputs = [train_path, test_path]
    if args.censor is not None:
        boxes = dat.censor(train, args.censor, args.seed + 3)
        cens_path = os.path.join(args.out, "train_intervals.csv")
        dat.write_intervals(cens_path, boxes)
        outputs.append(cens_path)
    params = {"family": args.family, "theta": theta, "dimension": args.dimension,
              "n_train": args.n_train, "n_test": args.n_test,
              "censor": args.censor, "outliers": args.outliers, "flip": args.flip}
    _write_manifest(os.path.join(args.out, "manifest.json"), "synth", params,
                    {"seed": args.seed}, [], outputs, started, t0)
    print(f"wrote {', '.join(outputs)}")
    return 0


def _cmd_fit(args) -> int:
    from . import data as dat
    from .errors import NumericDegeneracyError
    from .network import init_network, load_model, save_model
    from .training import TrainConfig, fit

    started, t0 = _now(), time.perf_counter()
    if args.loss == "censored":
        train = dat.read_intervals(args.train)
    else:
        train = dat.read_points(args.train)
    test = dat.read_points(args.test) if args.test else None
    if args.init_model:
        net = load_model(args.init_model)
    else:
        widths = _widths(args.widths)
        net = init_network(len(widths), widths, args.seed)
    cfg = TrainConfig(learning_rate=args.lr, momentum=args.momentum,
                      batch_size=args.batch_size, epochs=args.epochs,
                      seed=args.seed, eval_every=args.eval_every)
    report = fit(net, train, test, cfg, telemetry_path=args.telemetry,
                 log_every=args.log_every)
    save_model(report.net, args.out)
    outputs = [args.out] + ([args.telemetry] if args.telemetry else [])
    inputs = [args.train] + ([args.test] if args.test else []) \
        + ([args.init_model] if args.init_model else [])
    params = {"loss": args.loss, "epochs": args.epochs, "lr": args.lr,
              "momentum": args.momentum, "batch_size": args.batch_size,
              "widths": args.widths, "init_model": args.init_model,
              "eval_every": args.eval_every}
    extra = {"epochs_run": report.epochs_run, "aborted": report.aborted}
    if report.abort_reason:
        extra["abort_reason"] = report.abort_reason
    if report.test_nll is not None:
        extra["test_nll"] = report.test_nll
    if report.train_nll:
        extra["final_train_nll"] = report.train_nll[-1]
    manifest = args.manifest or (args.out + ".manifest.json")
    _write_manifest(manifest, "fit", params, {"seed": args.seed}, inputs, outputs,
                    started, t0, status="aborted" if report.aborted else "ok",
                    extra=extra)
    if report.aborted:
        print(f"aborted: {report.abort_reason}", file=sys.stderr)
        raise NumericDegeneracyError(report.abort_reason)
    summary = f"fit {report.epochs_run} epochs in {report.seconds:.1f}s"
    if report.train_nll:
        summary += f", final train nll {report.train_nll[-1]:.6f}"
    if report.test_nll is not None:
        summary += f", test nll {report.test_nll:.6f}"
    print(summary)
    return 0


def _cmd_eval(args) -> int:
    from . import data as dat
    from .network import load_model
    from .training import evaluate_nll

    started, t0 = _now(), time.perf_counter()
    net = load_model(args.model)
    if args.loss == "censored":
        ds = dat.read_intervals(args.data)
    else:
        ds = dat.read_points(args.data)
    value = evaluate_nll(net, ds)
    print(format(value, ".12g"))
    if args.manifest:
        _write_manifest(args.manifest, "eval", {"loss": args.loss}, {},
                        [args.model, args.data], [], started, t0,
                        extra={"nll": value})
    return 0


def _cmd_query(args) -> int:
    from .copula import CopulaModel
    from .network import load_model

    started, t0 = _now(), time.perf_counter()
    net = load_model(args.model)
    kind = args.kind
    if kind == "rect":
        if not args.rect:
            raise UsageError("--rect is required for kind 'rect'")
        lo, hi = _parse_rect(args.rect)
        model = CopulaModel(len(lo), net)
        value = model.rectangle_prob(lo, hi)
    else:
        if not args.point:
            raise UsageError(f"--point is required for kind {kind!r}")
        point = _parse_floats(args.point, "--point")
        model = CopulaModel(len(point), net)
        if kind in ("condcdf", "condpdf"):
            if not args.given:
                raise UsageError(f"--given is required for kind {kind!r}")
            given = _parse_indices(args.given, "--given")
            if any(i >= len(point) for i in given):
                raise UsageError("--given: index beyond the point length")
            if kind == "condcdf":
                value = model.conditional_cdf(point, given)
            else:
                value = model.conditional_log_density(point, given)
        elif kind == "cdf":
            value = model.cdf(point)
        else:
            value = model.log_density(point)
    print(format(value, ".17g"))
    if args.manifest:
        params = {"kind": kind, "point": args.point, "rect": args.rect,
                  "given": args.given}
        _write_manifest(args.manifest, "query", params, {}, [args.model], [],
                        started, t0, extra={"value": value})
    return 0


def _cmd_sample(args) -> int:
    from .data import Dataset, write_points
    from .network import load_model
    from .sampling import sample_network

    started, t0 = _now(), time.perf_counter()
    net = load_model(args.model)
    u = sample_network(net, args.dimension, args.n, args.seed)
    write_points(args.out, Dataset(u))
    manifest = args.manifest or (args.out + ".manifest.json")
    _write_manifest(manifest, "sample",
                    {"n": args.n, "dimension": args.dimension}, {"seed": args.seed},
                    [args.model], [args.out], started, t0)
    print(f"wrote {args.out}")
    return 0


def _cmd_grid(args) -> int:
    from .copula import CopulaModel
    from .network import load_model

    started, t0 = _now(), time.perf_counter()
    if args.resolution < 1:
        raise UsageError(f"--resolution: need >= 1, got {args.resolution}")
    net = load_model(args.model)
    model = CopulaModel(2, net)
    import numpy as np

    axis = (np.arange(args.resolution) + 0.5) / args.resolution
    u1, u2 = np.meshgrid(axis, axis, indexing="ij")
    pts = np.column_stack([u1.ravel(), u2.ravel()])
    if args.kind == "cdf":
        vals = model.cdf_values(pts)
    else:
        vals = model.log_density_values(pts)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("u1,u2,value\n")
        for (a, b), v in zip(pts, vals):
            fh.write(f"{format(a, '.17g')},{format(b, '.17g')},{format(v, '.17g')}\n")
    manifest = args.manifest or (args.out + ".manifest.json")
    _write_manifest(manifest, "grid",
                    {"kind": args.kind, "resolution": args.resolution}, {},
                    [args.model], [args.out], started, t0)
    print(f"wrote {args.out}")
    return 0


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="archimix",
        description="Learn and query Archimedean copulas with exponential-mixture generators.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="sample a parametric family into train/test CSVs")
    p.add_argument("--family", required=True,
                   choices=["clayton", "frank", "joe", "gumbel", "independence"])
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--dimension", type=int, default=2)
    p.add_argument("--n-train", type=int, required=True)
    p.add_argument("--n-test", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--censor", type=float, default=None,
                   help="also write interval-censored training data at this noise level")
    p.add_argument("--outliers", type=float, default=0.0,
                   help="uniform outlier rate appended to the training rows")
    p.add_argument("--flip", default=None, help="1-based coordinates to reflect")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("fit", help="train a generator network by maximum likelihood")
    p.add_argument("--train", required=True)
    p.add_argument("--test", default=None)
    p.add_argument("--loss", choices=["pointwise", "censored"], default="pointwise")
    p.add_argument("--epochs", type=int, default=40_000)
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--batch-size", type=int, default=200)
    p.add_argument("--widths", default="10,10", help="hidden layer widths, comma separated")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-model", default=None, help="resume from a saved model")
    p.add_argument("--telemetry", default=None, help="CSV of (epoch, train NLL, test NLL, seconds)")
    p.add_argument("--eval-every", type=int, default=100)
    p.add_argument("--log-every", type=int, default=0)
    p.add_argument("--manifest", default=None)
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("eval", help="print a dataset's NLL under a model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--loss", choices=["pointwise", "censored"], default="pointwise")
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("query", help="evaluate one probabilistic query")
    p.add_argument("--model", required=True)
    p.add_argument("--kind", required=True,
                   choices=["cdf", "logpdf", "condcdf", "condpdf", "rect"])
    p.add_argument("--point", default=None, help="comma-separated coordinates")
    p.add_argument("--given", default=None, help="1-based conditioned coordinates")
    p.add_argument("--rect", default=None, help="comma-separated lo:hi intervals")
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("sample", help="draw copula samples from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dimension", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--manifest", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("grid", help="tabulate cdf or log-density on a square grid")
    p.add_argument("--model", required=True)
    p.add_argument("--kind", choices=["cdf", "logpdf"], default="cdf")
    p.add_argument("--resolution", type=int, default=100)
    p.add_argument("--manifest", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_grid)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    from .errors import ConvergenceError, DataError, NumericDegeneracyError
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericDegeneracyError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except ConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return 5
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
