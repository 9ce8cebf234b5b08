"""Command-line driver: data generation, training, explanation, sweeps.

All outputs are deterministic given the inputs and seed; delimited files
use shortest round-trip float formatting, and the report paths render
matplotlib figures next to the delimited output. Exit codes: 0 success,
1 usage, 2 data or file error, 3 numerical failure.
"""

import argparse
import csv
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import figures
from .datagen import gen_genome_dataset, gen_shape_dataset, load_dataset, save_dataset
from .errors import (
    DataError,
    InvalidModelError,
    ModelFormatError,
    NumericalError,
    PlrpError,
    ShapeMismatchError,
)
from .lrp import RuleAssignment, explain_lrp, save_trace
from .metrics import entropy, gini, lipschitz_estimate, pixel_flip, rma
from .model_io import load_model, save_model
from .presets import GENOME_MOTIFS, PRESETS
from .pruning import PruningConfig, explain_plrp
from .rasters import heatmap_raster, write_logo_tsv, write_ppm
from .training import evaluate_accuracy, train_sgd

METHODS = ("lrp", "plrp-lambda", "plrp-m")
DATA_COLUMNS = [
    "sampleId",
    "method",
    "variant",
    "mode",
    "pOrMinGain",
    "gini",
    "entropy",
    "rma",
    "lipschitz",
    "faithAUC",
]


@dataclass(frozen=True)
class MethodSpec:
    """One sweep entry: a method token plus its threshold mode."""

    method: str
    mode: str  # "" for the baseline, else "fixed" | "gain"

    @property
    def variant(self) -> str:
        return {"lrp": "", "plrp-lambda": "lambda", "plrp-m": "m"}[self.method]

    @property
    def token(self) -> str:
        return self.method if not self.mode or self.mode == "fixed" else f"{self.method}:{self.mode}"

    def sweeps_p(self) -> bool:
        return self.method != "lrp" and self.mode == "fixed"


def parse_method(token: str) -> MethodSpec:
    name, _, mode = token.strip().partition(":")
    if name not in METHODS:
        raise ValueError(f"unknown method {name!r} (expected one of {', '.join(METHODS)})")
    if name == "lrp":
        if mode:
            raise ValueError("the baseline takes no mode")
        return MethodSpec("lrp", "")
    mode = mode or "fixed"
    if mode not in ("fixed", "gain"):
        raise ValueError(f"unknown mode {mode!r} (expected fixed or gain)")
    return MethodSpec(name, mode)


def parse_variants(text: str):
    specs = [parse_method(tok) for tok in text.split(",") if tok.strip()]
    if not specs:
        raise ValueError("no methods given")
    return specs


def p_grid(start: float, end: float, step: float):
    if step <= 0:
        raise ValueError("p step must be > 0")
    values = []
    k = 0
    while True:
        v = round(start + k * step, 10)
        if v > end + 1e-12:
            break
        values.append(v)
        k += 1
    for v in values:
        if not 0.0 <= v < 1.0:
            raise ValueError(f"p value {v} outside [0, 1)")
    if not values:
        raise ValueError("empty p grid")
    return values


@dataclass
class SweepSpec:
    """Everything one sweep run needs; validated on construction."""

    model: object
    dataset: object
    p_values: list
    variants: list
    metrics: tuple = ("gini", "entropy", "rma")
    seed: int = 0
    min_gain: float = 1.0
    epsilon: float = 1e-6
    gamma: float = 0.25
    patch_size: int = 8
    flip_steps: int = 64
    lipschitz_radius: float = 0.1
    lipschitz_samples: int = 10
    lipschitz_inputs: int = 10

    def __post_init__(self):
        if not self.variants:
            raise ValueError("sweep needs at least one method")
        for v in self.p_values:
            if not 0.0 <= v < 1.0:
                raise ValueError(f"p value {v} outside [0, 1)")


def make_explainer(model, assignment, spec: MethodSpec, p=None, min_gain=1.0):
    """Explanation function (input array -> RelevanceTrace) for one method."""
    if spec.method == "lrp":
        return lambda x: explain_lrp(model, x, assignment)
    config = PruningConfig(
        variant="lambda" if spec.method == "plrp-lambda" else "matrix",
        mode=spec.mode or "fixed",
        p=float(p) if p is not None else 0.0,
        min_gain=min_gain,
    )
    return lambda x: explain_plrp(model, x, assignment, config)


def run_sweep(spec: SweepSpec):
    """Evaluate every (sample, method, p) cell of a sweep.

    Returns ``(data_rows, summary_rows, skipped, failures)``. Baseline and
    gain-mode entries do not depend on p and contribute one row per
    sample. Robustness and faithfulness are skipped (with a recorded
    reason) on one-hot sequence data, where input perturbations are not
    well defined; the Lipschitz estimate is restricted to the first
    ``lipschitz_inputs`` samples.
    """
    ds = spec.dataset
    model = spec.model
    discrete = ds.kind == "genome"
    active = []
    skipped = []
    for m in spec.metrics:
        if m not in ("gini", "entropy", "rma", "lipschitz", "faithAUC"):
            raise ValueError(f"unknown metric {m!r}")
        if discrete and m in ("lipschitz", "faithAUC"):
            skipped.append(
                {
                    "metric": m,
                    "reason": "inputs are one-hot sequences; input perturbations are not well-defined",
                }
            )
        else:
            active.append(m)

    assignment = RuleAssignment.composite(model, gamma=spec.gamma, epsilon=spec.epsilon)
    pad = spec.lipschitz_radius
    assignment_pad = RuleAssignment.composite(
        model, gamma=spec.gamma, epsilon=spec.epsilon, input_low=-pad, input_high=1.0 + pad
    )
    flip_baseline = ds.inputs.mean(axis=0) if "faithAUC" in active else None

    data_rows = []
    failures = []
    for si in range(len(ds)):
        x = ds.inputs[si]
        mask = ds.masks[si]
        for ms in spec.variants:
            grid = spec.p_values if ms.sweeps_p() else [None]
            for p in grid:
                row = {
                    "sampleId": si,
                    "method": ms.token,
                    "variant": ms.variant,
                    "mode": ms.mode,
                    "pOrMinGain": (spec.min_gain if ms.mode == "gain" else p),
                    "gini": None,
                    "entropy": None,
                    "rma": None,
                    "lipschitz": None,
                    "faithAUC": None,
                }
                explain = make_explainer(model, assignment, ms, p, spec.min_gain)
                try:
                    r0 = explain(x).input_relevance
                    if "gini" in active:
                        row["gini"] = gini(r0)
                    if "entropy" in active:
                        row["entropy"] = entropy(r0)
                    if "rma" in active:
                        row["rma"] = rma(r0, mask)
                    if "lipschitz" in active and si < spec.lipschitz_inputs:
                        lip_explain = make_explainer(
                            model, assignment_pad, ms, p, spec.min_gain
                        )
                        row["lipschitz"] = lipschitz_estimate(
                            lambda xx: lip_explain(xx).input_relevance,
                            x,
                            radius=spec.lipschitz_radius,
                            n_samples=spec.lipschitz_samples,
                            seed=spec.seed + si,
                        )
                    if "faithAUC" in active:
                        flip = pixel_flip(
                            model,
                            x,
                            r0,
                            steps=spec.flip_steps,
                            baseline=flip_baseline,
                            patch_size=spec.patch_size,
                        )
                        row["faithAUC"] = None if flip is None else flip.auc
                except PlrpError as e:
                    failures.append(
                        {
                            "sampleId": si,
                            "method": ms.token,
                            "pOrMinGain": row["pOrMinGain"],
                            "error": str(e),
                        }
                    )
                    continue
                data_rows.append(row)

    summary_rows = _median_summary(data_rows)
    return data_rows, summary_rows, skipped, failures


def _median_summary(data_rows):
    groups = {}
    order = []
    for row in data_rows:
        key = (row["method"], row["mode"], row["pOrMinGain"])
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    summary = []
    for key in order:
        method, mode, p = key
        agg = {
            "sampleId": "median",
            "method": method,
            "variant": groups[key][0]["variant"],
            "mode": mode,
            "pOrMinGain": p,
        }
        for metric in ("gini", "entropy", "rma", "lipschitz", "faithAUC"):
            vals = [r[metric] for r in groups[key] if r[metric] is not None]
            agg[metric] = float(np.median(vals)) if vals else None
        summary.append(agg)
    return summary


def run_flip(model, ds, variants, p, steps, patch_size, epsilon, gamma, min_gain=1.0):
    """Flip curves for every sample and method at one pruning level."""
    if ds.kind == "genome":
        raise DataError(
            "faithfulness needs a continuous input domain; one-hot sequence data is excluded"
        )
    assignment = RuleAssignment.composite(model, gamma=gamma, epsilon=epsilon)
    baseline = ds.inputs.mean(axis=0)
    curve_rows = []
    auc_by_method = {}
    for si in range(len(ds)):
        x = ds.inputs[si]
        for ms in variants:
            explain = make_explainer(model, assignment, ms, p, min_gain)
            r0 = explain(x).input_relevance
            flip = pixel_flip(model, x, r0, steps=steps, baseline=baseline, patch_size=patch_size)
            if flip is None:
                continue
            p_cell = min_gain if ms.mode == "gain" else (p if ms.method != "lrp" else None)
            for frac, score in zip(flip.fractions, flip.scores):
                curve_rows.append(
                    {
                        "sampleId": si,
                        "method": ms.token,
                        "p": p_cell,
                        "fraction": float(frac),
                        "score": float(score),
                    }
                )
            auc_by_method.setdefault(ms.token, []).append(flip.auc)
    auc_rows = [
        {"method": m, "p": (None if m == "lrp" else p), "meanAUC": float(np.mean(v)), "samples": len(v)}
        for m, v in auc_by_method.items()
    ]
    return curve_rows, auc_rows


def _fmt(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in header])


def _read_csv(path):
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


# ---------------------------------------------------------------------------
# commands


def cmd_gen_data(args) -> int:
    if args.kind == "genome":
        motifs = dict(GENOME_MOTIFS)
        if args.motifs:
            motifs = {}
            for part in args.motifs.split(","):
                label, _, motif = part.partition(":")
                if not motif:
                    raise DataError(f"bad motif spec {part!r}; expected LABEL:MOTIF")
                motifs[int(label)] = motif
        ds = gen_genome_dataset(
            args.n, motifs, noise_rate=args.noise_rate, seed=args.seed, length=args.length
        )
    else:
        ds = gen_shape_dataset(args.n, image_size=args.image_size, seed=args.seed)
    save_dataset(ds, args.out)
    print(f"wrote {len(ds)} {ds.kind} samples to {args.out}")
    return 0


def cmd_train(args) -> int:
    ds = load_dataset(args.data)
    model = PRESETS[args.preset](args.seed)
    inputs, labels = ds.inputs, ds.labels
    n_hold = int(round(len(ds) * args.holdout))
    train_x, train_y = inputs[: len(ds) - n_hold], labels[: len(ds) - n_hold]
    hold_x, hold_y = inputs[len(ds) - n_hold :], labels[len(ds) - n_hold :]

    log_rows = []

    def on_epoch(epoch, loss, acc):
        log_rows.append({"epoch": epoch, "loss": loss, "trainAccuracy": acc})

    trained = train_sgd(
        model,
        (train_x, train_y),
        epochs=args.epochs,
        learning_rate=args.lr,
        seed=args.seed,
        batch_size=args.batch_size,
        on_epoch=on_epoch,
    )
    save_model(trained, args.out)
    log_path = args.log or os.path.splitext(args.out)[0] + "_train_log.csv"
    _write_csv(log_path, ["epoch", "loss", "trainAccuracy"], log_rows)
    if n_hold:
        acc = evaluate_accuracy(trained, hold_x, hold_y)
        print(f"held-out accuracy {acc:.4f} over {n_hold} samples")
    else:
        acc = evaluate_accuracy(trained, train_x, train_y)
        print(f"train accuracy {acc:.4f} (no held-out split)")
    print(f"wrote model to {args.out}")
    return 0


def cmd_explain(args) -> int:
    model = load_model(args.model)
    ds = load_dataset(args.data)
    if not 0 <= args.index < len(ds):
        raise DataError(f"sample index {args.index} outside [0, {len(ds)})")
    x = ds.inputs[args.index]
    assignment = RuleAssignment.composite(model, gamma=args.gamma, epsilon=args.epsilon)
    spec = parse_method(args.variant if not args.mode else f"{args.variant}:{args.mode}")
    explain = make_explainer(model, assignment, spec, args.p, args.min_gain)
    trace = explain(x)
    os.makedirs(args.out, exist_ok=True)
    save_trace(trace, os.path.join(args.out, "trace.json"))
    r0 = trace.input_relevance
    if ds.kind == "genome":
        write_logo_tsv(os.path.join(args.out, "logo.tsv"), r0)
        if args.figures:
            figures.logo_figure(r0, os.path.join(args.out, "logo.png"))
    else:
        write_ppm(os.path.join(args.out, "heatmap.ppm"), heatmap_raster(r0))
        if args.figures:
            figures.heatmap_figure(r0, os.path.join(args.out, "heatmap.png"))
    print(
        f"explained sample {args.index} ({spec.token}): class {trace.target_class}, "
        f"score {trace.target_score:.6g}; artifacts in {args.out}"
    )
    return 0


def cmd_sweep(args) -> int:
    model = load_model(args.model)
    ds = load_dataset(args.data)
    spec = SweepSpec(
        model=model,
        dataset=ds,
        p_values=p_grid(args.p_start, args.p_end, args.p_step),
        variants=parse_variants(args.variants),
        metrics=tuple(m.strip() for m in args.metrics.split(",") if m.strip()),
        seed=args.seed,
        min_gain=args.min_gain,
        epsilon=args.epsilon,
        gamma=args.gamma,
        patch_size=args.patch_size,
        flip_steps=args.flip_steps,
        lipschitz_radius=args.lipschitz_radius,
        lipschitz_samples=args.lipschitz_samples,
    )
    data_rows, summary_rows, skipped, failures = run_sweep(spec)
    os.makedirs(args.out, exist_ok=True)
    _write_csv(os.path.join(args.out, "metrics.csv"), DATA_COLUMNS, data_rows + summary_rows)
    if skipped:
        _write_csv(os.path.join(args.out, "skipped_metrics.csv"), ["metric", "reason"], skipped)
    if failures:
        _write_csv(
            os.path.join(args.out, "failures.csv"),
            ["sampleId", "method", "pOrMinGain", "error"],
            failures,
        )
    if args.figures:
        figures.sweep_figures(data_rows, args.out)
    print(
        f"sweep over {len(ds)} samples, {len(spec.variants)} methods, "
        f"{len(spec.p_values)} p values: {len(data_rows)} data rows -> {args.out}"
    )
    for item in skipped:
        print(f"skipped {item['metric']}: {item['reason']}")
    return 0


def cmd_flip(args) -> int:
    model = load_model(args.model)
    ds = load_dataset(args.data)
    variants = parse_variants(args.variants)
    curve_rows, auc_rows = run_flip(
        model,
        ds,
        variants,
        p=args.p,
        steps=args.flip_steps,
        patch_size=args.patch_size,
        epsilon=args.epsilon,
        gamma=args.gamma,
        min_gain=args.min_gain,
    )
    os.makedirs(args.out, exist_ok=True)
    _write_csv(
        os.path.join(args.out, "curves.csv"),
        ["sampleId", "method", "p", "fraction", "score"],
        curve_rows,
    )
    _write_csv(
        os.path.join(args.out, "auc_summary.csv"), ["method", "p", "meanAUC", "samples"], auc_rows
    )
    if args.figures:
        figures.flip_figure(curve_rows, os.path.join(args.out, "fig_flip_curves.png"))
    print(f"flip curves for {len(ds)} samples -> {args.out}")
    return 0


def cmd_report(args) -> int:
    rows = _read_csv(args.metrics)
    data_rows = [r for r in rows if r.get("sampleId") != "median"]
    if not data_rows:
        raise DataError(f"{args.metrics}: no data rows")
    os.makedirs(args.out, exist_ok=True)
    written = figures.sweep_figures(data_rows, args.out)
    print(f"rendered {len(written)} figures -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_rule_flags(p):
    p.add_argument("--epsilon", type=float, default=1e-6, help="epsilon-rule stabilizer")
    p.add_argument("--gamma", type=float, default=0.25, help="gamma-rule weight tilt")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="plrp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset with ground truth")
    p.add_argument("--kind", choices=("genome", "shapes"), required=True)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--motifs", help="genome motifs as LABEL:MOTIF[,LABEL:MOTIF...]")
    p.add_argument("--noise-rate", type=float, default=0.0)
    p.add_argument("--length", type=int, default=250)
    p.add_argument("--image-size", type=int, default=16)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a preset model on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--preset", choices=sorted(PRESETS), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--holdout", type=float, default=0.2)
    p.add_argument("--log", help="training-log CSV path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("explain", help="attribute one sample and write artifacts")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--variant", choices=METHODS, default="lrp")
    p.add_argument("--mode", choices=("fixed", "gain"), default="")
    p.add_argument("--p", type=float, default=0.25)
    p.add_argument("--min-gain", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    _add_rule_flags(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("sweep", help="metric table over a grid of pruning levels")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variants", default="lrp,plrp-lambda")
    p.add_argument("--p-start", type=float, default=0.0)
    p.add_argument("--p-end", type=float, default=0.95)
    p.add_argument("--p-step", type=float, default=0.05)
    p.add_argument("--metrics", default="gini,entropy,rma")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-gain", type=float, default=1.0)
    p.add_argument("--patch-size", type=int, default=8)
    p.add_argument("--flip-steps", type=int, default=64)
    p.add_argument("--lipschitz-radius", type=float, default=0.1)
    p.add_argument("--lipschitz-samples", type=int, default=10)
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    _add_rule_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("flip", help="faithfulness curves at one pruning level")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variants", default="lrp,plrp-lambda")
    p.add_argument("--p", type=float, default=0.15)
    p.add_argument("--min-gain", type=float, default=1.0)
    p.add_argument("--patch-size", type=int, default=8)
    p.add_argument("--flip-steps", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    _add_rule_flags(p)
    p.set_defaults(func=cmd_flip)

    p = sub.add_parser("report", help="render figures from an existing metrics CSV")
    p.add_argument("--metrics", required=True, help="metrics.csv produced by sweep")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except (
        DataError,
        ModelFormatError,
        InvalidModelError,
        ShapeMismatchError,
        FileNotFoundError,
        IsADirectoryError,
        NotADirectoryError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (NumericalError, PlrpError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
