"""``lowrank-shield`` command line: gen, train, attack, defend, bench, sweep.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .attacks import ATTACKS, AttackConfig, LabeledDataset, LinearSoftmaxClassifier, accuracy, run_attack, train_classifier
from .bench import BenchReport, parse_defense, rank_range, run_bench, sweep_configs
from .config import parse_config
from .defense import defend
from .errors import DataError, ShieldError, UsageError
from .imageio import SyntheticSpec, generate_synthetic, load_dataset, save_dataset


def parse_eps(text: str) -> float:
    """Accept ``0.03``, ``8/255`` and similar rational forms."""
    try:
        value = float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"invalid epsilon {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("epsilon must be >= 0")
    return value


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise DataError(f"cannot write: {exc.strerror}", path=str(path)) from None


def _eval_split(data: LabeledDataset, split: str | None) -> LabeledDataset:
    if split is None or data.splits is None:
        return data
    if split not in data.splits:
        raise UsageError(f"no records tagged {split!r} in the manifest")
    return data.subset(split)


def _names(manifest, split: str | None) -> list[str]:
    return [r.path for r in manifest.records if split is None or r.split == split]


def cmd_gen(args) -> int:
    k = tuple(args.ranks)
    if len(k) != 2:
        raise UsageError("--ranks expects two values, e.g. 4,4")
    spec = SyntheticSpec(
        classes=args.classes, width=args.width, height=args.height, per_class=args.per_class,
        ranks=k, sigma=args.sigma, seed=args.seed,
    )
    data, _ = generate_synthetic(spec)
    manifest = save_dataset(data, args.out, spec.classes)
    print(f"wrote {len(manifest)} images to {args.out}")
    return 0


def cmd_train(args) -> int:
    data, manifest = load_dataset(args.manifest)
    train = data.subset("train") if data.splits and "train" in data.splits else data
    model = train_classifier(
        train, epochs=args.epochs, lr=args.lr, seed=args.seed,
        batch_size=args.batch_size, init_scale=args.init_scale, classes=manifest.classes,
    )
    model.save(args.out)
    held = data.subset("test") if data.splits and "test" in data.splits else train
    print(f"clean accuracy: {accuracy(model, held):.4f}")
    return 0


def _attack_cfg(args) -> AttackConfig:
    return AttackConfig(epsilon=args.eps, alpha=args.alpha, tau=args.tau, iters=args.iters, seed=args.seed)


def cmd_attack(args) -> int:
    data, manifest = load_dataset(args.manifest)
    model = LinearSoftmaxClassifier.load(args.model)
    subset = _eval_split(data, args.split)
    adv = run_attack(args.attack, model, subset.images, subset.labels, _attack_cfg(args))
    out = LabeledDataset(adv, subset.labels, subset.splits)
    save_dataset(out, args.out, manifest.classes, _names(manifest, args.split))
    print(f"clean accuracy: {accuracy(model, subset):.4f}")
    print(f"attacked accuracy: {accuracy(model, out):.4f}")
    return 0


def cmd_defend(args) -> int:
    cfg = parse_config(args.config)
    data, manifest = load_dataset(args.manifest)
    defended, report = defend(data.images, cfg, args.threads)
    out = LabeledDataset(defended, data.labels, data.splits)
    save_dataset(out, args.out, manifest.classes, [r.path for r in manifest.records])
    report_path = Path(args.report) if args.report else Path(args.out) / "defense_report.csv"
    _write_text(report_path, report.to_csv())
    print(f"defended {len(out)} images in {report.seconds:.2f}s; "
          f"mean relative error {report.mean_error:.4f}; failures {report.failures}")
    if args.model:
        model = LinearSoftmaxClassifier.load(args.model)
        print(f"defended accuracy: {accuracy(model, out):.4f}")
    return 0


def _emit(report: BenchReport, out: str | None) -> None:
    if out:
        _write_text(Path(out), report.to_csv())
    else:
        sys.stdout.write(report.to_csv())
    print(report.to_table(), file=sys.stderr if not out else sys.stdout)


def cmd_bench(args) -> int:
    data, _ = load_dataset(args.manifest)
    model = LinearSoftmaxClassifier.load(args.model)
    subset = _eval_split(data, args.split)
    defenses = [parse_defense(c) for c in (args.config or [])]
    if not defenses:
        raise UsageError("give at least one --config (a defense config string or 'slq')")
    attacks = args.attack or list(ATTACKS)
    report = run_bench(model, subset, defenses, attacks, _attack_cfg(args), args.threads)
    _emit(report, args.out)
    return 0


def cmd_sweep(args) -> int:
    ranks = rank_range(args.rank_start, args.rank_stop, args.rank_step)
    configs = sweep_configs(ranks, args.batches, seed=args.seed)
    data, _ = load_dataset(args.manifest)
    model = LinearSoftmaxClassifier.load(args.model)
    subset = _eval_split(data, args.split)
    report = run_bench(model, subset, configs, [args.attack], _attack_cfg(args), args.threads)
    _emit(report, args.out)
    return 0


def _attack_flags(p: argparse.ArgumentParser, multi: bool) -> None:
    if multi:
        p.add_argument("--attack", action="append", choices=ATTACKS,
                       help="attack to run (repeatable; default: all)")
    else:
        p.add_argument("--attack", choices=ATTACKS, default="pgd")
    p.add_argument("--eps", type=parse_eps, default=8 / 255, help="l-inf budget, e.g. 8/255")
    p.add_argument("--alpha", type=parse_eps, default=None, help="I-FGSM step (default eps/4)")
    p.add_argument("--tau", type=parse_eps, default=None, help="PGD step (default eps/4)")
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lowrank-shield",
        description="Low-rank tensor defenses against adversarial image perturbations.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate the synthetic low-rank dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--per-class", type=int, default=200)
    p.add_argument("--ranks", type=_int_list, default=[4, 4], help="spatial Tucker ranks k1,k2")
    p.add_argument("--sigma", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train the linear softmax surrogate")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="model file (.npz)")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--init-scale", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attack", help="write adversarial copies of a dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default=None, help="only attack records with this split tag")
    _attack_flags(p, multi=False)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("defend", help="apply a defense config to a dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", required=True,
                   help='e.g. "decomposition=tensor-train representation=4-mode batch=5 ranks=5,90,3 seed=42"')
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None, help="report CSV (default: OUT/defense_report.csv)")
    p.add_argument("--model", default=None, help="also print defended accuracy")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_defend)

    p = sub.add_parser("bench", help="accuracy/runtime for configs x attacks")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--config", action="append", help="defense config string or 'slq' (repeatable)")
    p.add_argument("--split", default="test")
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    p.add_argument("--threads", type=int, default=None)
    _attack_flags(p, multi=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="sweep the middle TT rank over batch sizes")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--rank-start", type=int, default=50)
    p.add_argument("--rank-stop", type=int, default=120)
    p.add_argument("--rank-step", type=int, default=5)
    p.add_argument("--batches", type=_int_list, default=[1, 5, 10, 20, 50])
    p.add_argument("--split", default="test")
    p.add_argument("--out", default=None)
    p.add_argument("--threads", type=int, default=None)
    _attack_flags(p, multi=False)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ShieldError as exc:
        print(f"lowrank-shield {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
