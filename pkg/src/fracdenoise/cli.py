"""Command-line front end: ``fracdenoise <command> [flags]``.

Commands:

``gen-data``  synthetic (or file-supplied) clean/noise pairs mixed at a target SNR
``train``     fractional-order training, checkpoint and loss curve
``denoise``   whole-signal denoising of a delimited-text file
``evaluate``  per-fragment and mean SNR/CC/PRD/RMSE on held-out signals
``compress``  layer-wise compression sweep over C_R (and optionally alpha)

Every command writes its resolved configuration next to its outputs.
Values come from built-in defaults, then ``--config`` (a JSON object keyed
by flag name with underscores), then explicit flags.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import compression as cp
from . import datapipe as dp
from . import pipeline as pl
from .container import FormatError, load_checkpoint, save_checkpoint
from .fractional import FracConfig
from .lowrank import RsvdConfig
from .metrics import MetricSet, aggregate, metric_table
from .network import ArchSpec
from .tchebichef import build_basis
from .training import TrainingDiverged

__all__ = ["build_parser", "main", "parse_grid"]

log = logging.getLogger("fracdenoise")

_PAPER = FracConfig()


def parse_grid(text: str) -> list[float]:
    """``"a,b,c"`` or inclusive ``"start:stop:step"``."""
    text = text.strip()
    if ":" in text:
        try:
            start, stop, step = (float(v) for v in text.split(":"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"grid {text!r} is not start:stop:step") from None
        if step <= 0 or stop < start:
            raise argparse.ArgumentTypeError(f"grid {text!r} is empty")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 10) for k in range(n)]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid {text!r} is not a comma list") from None


# -- parser -------------------------------------------------------------------


def _training_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("training")
    g.add_argument("--alpha", type=float, default=1.2, help="fractional order in (0, 2)")
    g.add_argument("--eta", type=float, default=_PAPER.eta, help="learning rate")
    g.add_argument("--lambda", dest="lam", type=float, default=_PAPER.lam, help="L2 strength")
    g.add_argument("--epochs", type=int, default=_PAPER.epochs)
    g.add_argument("--batch-size", type=int, default=_PAPER.batch_size)
    g.add_argument("--fragment-len", type=int, default=250)
    g.add_argument("--fragments", type=int, default=20000, help="training fragments to draw")
    g.add_argument("--test-fraction", type=float, default=0.2)
    g.add_argument("--rank-opt", choices=pl.RANK_OPT_MODES, default="epoch",
                   help="when to apply the optimized-rank step (default: after every epoch)")
    g.add_argument("--init", choices=("glorot", "he"), default="glorot")
    g.add_argument("--sample-rate", type=float, default=None, help="Hz; informational")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracdenoise", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="create a paired clean/noisy corpus")
    g.add_argument("--out", help="output directory")
    g.add_argument("--n-signals", type=int, default=200)
    g.add_argument("--length", type=int, default=2000, help="samples per synthetic signal")
    g.add_argument("--snr-db", type=float, default=0.0, help="target mixture SNR")
    g.add_argument("--sample-rate", type=float, default=200.0)
    g.add_argument("--in", dest="inp", help="clean signals file (one per row) instead of synthetic ones")
    g.add_argument("--noise-in", help="noise signals file, required with --in")
    g.add_argument("--seed", type=int, default=0)

    t = sub.add_parser("train", help="train a denoiser on a corpus directory")
    t.add_argument("--in", dest="inp", help="corpus directory from gen-data")
    t.add_argument("--out", help="output directory")
    t.add_argument("--seed", type=int, default=0)
    _training_flags(t)

    d = sub.add_parser("denoise", help="denoise every row of a signal file")
    d.add_argument("--checkpoint")
    d.add_argument("--in", dest="inp", help="noisy signals file")
    d.add_argument("--out", help="denoised signals file")

    e = sub.add_parser("evaluate", help="metric table on held-out signals")
    e.add_argument("--in", dest="inp", help="corpus directory")
    e.add_argument("--out", help="output directory")
    e.add_argument("--checkpoint", help="model to evaluate")
    e.add_argument("--estimate", help="score this signal file against the clean corpus instead of a model")
    e.add_argument("--split", choices=("test", "all"), default=None,
                   help="signals to score (default: held-out set with a checkpoint, all otherwise)")
    e.add_argument("--fragment-len", type=int, default=250, help="tile length for --estimate scoring")

    c = sub.add_parser("compress", help="layer-wise compression sweep")
    c.add_argument("--in", dest="inp", help="corpus directory")
    c.add_argument("--out", help="output directory")
    c.add_argument("--checkpoint", action="append", default=None, help="trained model; repeat for several")
    c.add_argument("--alpha-grid", type=parse_grid, default=None,
                   help="train one model per alpha instead of loading checkpoints")
    c.add_argument("--compress-layer", action="append", choices=cp.COMPRESSIBLE_LAYERS, default=None)
    c.add_argument("--cr-grid", type=parse_grid, default=None, help="default 0.05:0.95:0.05")
    c.add_argument("--seed", type=int, default=0)
    _training_flags(c)

    for p in (g, t, d, e, c):
        p.add_argument("--config", help="JSON file of flag values")
    return parser


_REQUIRED = {
    "gen-data": ("out",),
    "train": ("inp", "out"),
    "denoise": ("checkpoint", "inp", "out"),
    "evaluate": ("inp", "out"),
    "compress": ("inp", "out"),
}


def _resolve(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = _with_config(parser, argv)
    missing = [k for k in _REQUIRED[args.command] if not getattr(args, k)]
    if missing:
        flags = ", ".join("--in" if k == "inp" else f"--{k}" for k in missing)
        parser.error(f"{args.command}: missing {flags} (flag or config key)")
    return args


def _with_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        values = json.loads(Path(args.config).read_text())
    except (OSError, ValueError) as exc:
        parser.error(f"cannot load config {args.config}: {exc}")
    if not isinstance(values, dict):
        parser.error(f"config {args.config} must hold a JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    values = {k.replace("-", "_"): v for k, v in values.items()}
    values = {("lam" if k == "lambda" else "inp" if k == "in" else k): v for k, v in values.items()}
    unknown = sorted(set(values) - known - {"command"})
    if unknown:
        parser.error(f"config {args.config} has unknown keys: {', '.join(unknown)}")
    for grid in ("cr_grid", "alpha_grid"):
        if isinstance(values.get(grid), str):
            values[grid] = parse_grid(values[grid])
    sub.set_defaults(**{k: v for k, v in values.items() if k != "command"})
    return parser.parse_args(argv)


def _write_config(path: Path, args: argparse.Namespace, **extra) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k not in ("verbose",)}
    resolved.update(extra)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(resolved, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(value):
    if dataclasses.is_dataclass(value):
        return dataclasses.asdict(value)
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _frac_config(args) -> FracConfig:
    return FracConfig(alpha=args.alpha, eta=args.eta, lam=args.lam, epochs=args.epochs,
                      batch_size=args.batch_size, seed=args.seed)


def _metric_row(m: MetricSet) -> list[str]:
    return [repr(m.snr_db), repr(m.cc), repr(m.prd), repr(m.rmse)]


# -- commands -----------------------------------------------------------------


def cmd_gen_data(args) -> int:
    out = Path(args.out)
    seeds = pl.Seeds.derive(args.seed)
    if args.inp:
        if not args.noise_in:
            raise SystemExit("gen-data: --in needs --noise-in")
        clean = dp.read_signals(args.inp)
        noise = dp.read_signals(args.noise_in)
        corpus = dp.make_noisy_corpus(clean, noise, args.snr_db, seeds.mix, args.sample_rate)
        source = {"source": "files", "clean_file": str(args.inp), "noise_file": str(args.noise_in)}
    else:
        corpus = pl.synthetic_corpus(args.n_signals, args.length, args.snr_db, seeds, args.sample_rate)
        source = {"source": "synthetic", "length": args.length}
    manifest = {
        **source,
        "n_signals": len(corpus),
        "sample_rate": args.sample_rate,
        "snr_db_target": args.snr_db,
        "seed": args.seed,
        "seeds": dataclasses.asdict(seeds),
    }
    pl.save_corpus(out, corpus, manifest)
    _write_config(out / "config.json", args)
    print(f"wrote {len(corpus)} signal pairs to {out} (mean mixture SNR {np.mean(corpus.input_snr_db):.6f} dB)")
    return 0


def _train_one(args, corpus, alpha: float):
    seeds = pl.Seeds.derive(args.seed)
    frac = dataclasses.replace(_frac_config(args), alpha=alpha)
    data = pl.prepare_data(corpus, pl.DataConfig(args.fragment_len, args.fragments, args.test_fraction), seeds)
    arch = ArchSpec.default(args.fragment_len)
    result = pl.train_model(data, arch, frac, args.rank_opt, args.init, seeds)
    return data, arch, result


def cmd_train(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus = pl.load_corpus(args.inp, args.sample_rate)
    frac = _frac_config(args)
    _write_config(out / "config.json", args, frac_config=frac.to_dict())
    data, arch, result = _train_one(args, corpus, args.alpha)
    ranks = {r.layer: r.optimized_rank for r in result.ranks}
    save_checkpoint(
        out / "model.ckpt", result.params, arch, args.alpha, data.scaler,
        {"test_ids": [int(i) for i in data.test_ids], "opt_ranks": ranks or None,
         "rank_opt": args.rank_opt, "seed": args.seed},
    )
    with (out / "loss.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "test_loss"])
        for k, (a, b) in enumerate(zip(result.history.train_loss, result.history.test_loss), start=1):
            w.writerow([k, repr(a), repr(b)])
    if result.ranks:
        cp.CompressionReport(ranks=[dataclasses.replace(r, alpha=args.alpha) for r in result.ranks]).write_ranks(out / "ranks.csv")
    before, _ = pl.input_quality(data.test_fragments)
    after, _ = pl.evaluate_model(result.params, arch, data)
    summary = {"alpha": args.alpha, "input": before.as_dict(), "output": after.as_dict(),
               "snr_gain_db": after.snr_db - before.snr_db, "n_test_fragments": len(data.test_fragments),
               "train_loss": result.history.train_loss}
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"held-out SNR {before.snr_db:.3f} -> {after.snr_db:.3f} dB, CC {after.cc:.3f}; model in {out / 'model.ckpt'}")
    return 0


def cmd_denoise(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    basis = build_basis(ck.arch.input_len)
    signals = dp.read_signals(args.inp)
    out = [pl.denoise_signal(ck.params, ck.arch, basis, ck.scaler, s) for s in signals]
    dp.write_signals(args.out, out)
    _write_config(Path(str(args.out) + ".config.json"), args)
    print(f"denoised {len(out)} signals into {args.out}")
    return 0


def _select_ids(n: int, split: str, test_ids) -> np.ndarray:
    if split == "all" or test_ids is None:
        return np.arange(n)
    ids = np.asarray(test_ids, dtype=int)
    if ids.size and ids.max() >= n:
        raise FormatError(f"checkpoint refers to signal {ids.max()} but the corpus has {n}")
    return ids


def cmd_evaluate(args) -> int:
    if bool(args.checkpoint) == bool(args.estimate):
        raise SystemExit("evaluate: give exactly one of --checkpoint and --estimate")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus = pl.load_corpus(args.inp)
    if args.checkpoint:
        ck = load_checkpoint(args.checkpoint)
        split = args.split or "test"
        ids = _select_ids(len(corpus), split, ck.meta.get("test_ids"))
        data = pl.prepare_test(corpus, ids, ck.arch.input_len, ck.scaler)
        frags = data.test_fragments
        _, rows = pl.evaluate_model(ck.params, ck.arch, data)
    else:
        split = args.split or "all"
        estimate = dp.read_signals(args.estimate)
        if len(estimate) != len(corpus):
            raise SystemExit(f"evaluate: {args.estimate} has {len(estimate)} signals, corpus has {len(corpus)}")
        for i, (c, x) in enumerate(zip(corpus.clean, estimate)):
            if c.size != x.size:
                raise SystemExit(f"evaluate: estimate {i} has {x.size} samples, clean signal has {c.size}")
        ids = np.arange(len(corpus))
        est = dp.fragment_tiles(dp.Corpus(corpus.clean, estimate, corpus.sample_rate), args.fragment_len)
        rows = metric_table(est.clean, est.noisy)
        frags = dp.fragment_tiles(corpus, args.fragment_len)
    base = metric_table(frags.clean, frags.noisy)
    with (out / "metrics.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fragment", "signal", "offset", "input_snr_db", "input_cc", "input_prd", "input_rmse",
                    "snr_db", "cc", "prd", "rmse"])
        for k, (b, r) in enumerate(zip(base, rows)):
            w.writerow([k, int(ids[frags.source[k]]), int(frags.offset[k]), *_metric_row(b), *_metric_row(r)])
    before, after = aggregate(base), aggregate(rows)
    summary = {"split": split, "n_fragments": len(rows), "input": before.as_dict(), "output": after.as_dict(),
               "snr_gain_db": after.snr_db - before.snr_db}
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    _write_config(out / "config.json", args)
    print(f"{len(rows)} fragments: SNR {before.snr_db:.3f} -> {after.snr_db:.3f} dB, CC {after.cc:.3f}, "
          f"PRD {after.prd:.3f}, RMSE {after.rmse:.5f}")
    return 0


def cmd_compress(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus = pl.load_corpus(args.inp, args.sample_rate)
    layers = args.compress_layer or list(cp.COMPRESSIBLE_LAYERS)
    grid = args.cr_grid if args.cr_grid is not None else cp.default_cr_grid()
    seeds = pl.Seeds.derive(args.seed)
    models = []
    if args.alpha_grid:
        for alpha in args.alpha_grid:
            data, arch, result = _train_one(args, corpus, alpha)
            models.append((alpha, arch, result.params, data, result.ranks))
    elif args.checkpoint:
        for path in args.checkpoint:
            ck = load_checkpoint(path)
            ids = _select_ids(len(corpus), "test", ck.meta.get("test_ids"))
            data = pl.prepare_test(corpus, ids, ck.arch.input_len, ck.scaler)
            opt = ck.meta.get("opt_ranks") or {}
            ranks = [cp.LayerRank(layer, min(cp.layer_matrix(ck.params, layer).shape), r) for layer, r in opt.items()]
            models.append((ck.alpha, ck.arch, ck.params, data, ranks))
    else:
        raise SystemExit("compress: give --checkpoint or --alpha-grid")

    report = cp.CompressionReport()
    baselines = []
    for alpha, arch, params, data, ranks in models:
        missing = [layer for layer in layers if layer not in {r.layer for r in ranks}]
        if missing:
            # Model was trained without the optimized-rank step; apply it once now.
            params, found = cp.optimize_after_training(params, missing, RsvdConfig(rank=1, seed=seeds.rsvd))
            ranks = list(ranks) + found
        ranks = [dataclasses.replace(r, alpha=alpha) for r in ranks]
        report.ranks += ranks
        base, _ = pl.evaluate_model(params, arch, data)
        baselines.append({"alpha": alpha, **base.as_dict()})
        rank_map = {r.layer: r.optimized_rank for r in ranks}
        report.rows += pl.compression_sweep(params, arch, data, rank_map, alpha, layers, grid, seeds.rsvd)
        log.info("alpha %g swept", alpha)
    report.write_metrics(out / "metrics.csv")
    report.write_ranks(out / "ranks.csv")
    (out / "summary.json").write_text(json.dumps({"uncompressed": baselines}, indent=2) + "\n")
    _write_config(out / "config.json", args, cr_grid_resolved=grid, layers=layers)
    print(f"{len(report.rows)} sweep rows written to {out / 'metrics.csv'}")
    return 0


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "denoise": cmd_denoise,
    "evaluate": cmd_evaluate,
    "compress": cmd_compress,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = _resolve(parser, argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except TrainingDiverged as exc:
        print(f"fracdenoise {args.command}: training diverged: {exc}. Try a smaller --eta.", file=sys.stderr)
        return 3
    except (FormatError, OSError, ValueError) as exc:
        print(f"fracdenoise {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
