"""Command-line workbench.

Every output file begins with a single '# config:' header line that embeds
the resolved parameters, so re-running a command with the same flags
reproduces the file byte for byte. Machine-readable numbers carry 17
significant digits; human-readable tables on stdout use 6.

Exit codes: 0 success, 2 bad parameters, 3 missing file, 4 schema mismatch,
5 dimension mismatch, 6 enumeration capacity exceeded, 7 degenerate unit.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import network, selection, uniformize
from .attack import AdvTrainConfig, AttackBudget, adversarial_train, attack_curve, jsma
from .errors import CapacityError, DegenerateFunctionError, DimensionError, SchemaError
from .fourier import ExactChow, MonteCarloChow, chow_exact, chow_mc
from .network import (
    Activation,
    LabeledDataset,
    TrainConfig,
    accuracy,
    first_layer_ltf,
    load_dataset,
    load_model,
    save_dataset,
    save_model,
    stabilize_subset,
    train_sgd,
)
from .neuron import PNorm, accuracy_bound_lp, accuracy_bound_p1

EXIT_OK = 0
EXIT_PARAMS = 2
EXIT_MISSING_FILE = 3
EXIT_SCHEMA = 4
EXIT_DIMENSION = 5
EXIT_CAPACITY = 6
EXIT_DEGENERATE = 7

_FMT = "%.17g"


def _config_header(cmd: str, args: argparse.Namespace, keys) -> str:
    parts = [f"cmd={cmd}"] + [f"{k}={getattr(args, k)}" for k in sorted(keys)]
    return "# config: " + " ".join(parts)


def _write(path, header: str, lines) -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for ln in lines:
            fh.write(ln + "\n")


def _parse_p(text: str) -> PNorm:
    return PNorm(math.inf if text in ("inf", "infinity") else float(text))


def _chow_source(args):
    if args.chow_mode == "exact":
        return ExactChow(cap=args.cap)
    return MonteCarloChow(epsilon=args.chow_epsilon, delta=args.chow_delta, seed=args.chow_seed)


def _add_chow_flags(sp):
    sp.add_argument("--chow-mode", choices=["exact", "mc"], default="exact")
    sp.add_argument("--chow-epsilon", type=float, default=0.05)
    sp.add_argument("--chow-delta", type=float, default=0.01)
    sp.add_argument("--chow-seed", type=int, default=0)
    sp.add_argument("--cap", type=int, default=22)


def _load_split(prefix: str, split: str) -> LabeledDataset:
    return load_dataset(f"{prefix}.{split}.csv", split=split)


# --- gen-data ---------------------------------------------------------------


def _teacher_labels(kind: str, X: np.ndarray, rng: np.random.Generator, teacher_width: int):
    n = X.shape[1]
    if kind == "planted-ltf":
        w = rng.normal(size=n)
        return np.where(X @ w >= 0.0, 1.0, -1.0)
    if kind == "planted-mlp":
        W1 = rng.normal(size=(teacher_width, n))
        b1 = rng.normal(scale=0.5, size=teacher_width)
        W2 = rng.normal(size=teacher_width)
        score = np.tanh(X @ W1.T + b1) @ W2
        return np.where(score >= 0.0, 1.0, -1.0)
    if kind == "noisy-majority":
        return np.where(X.sum(axis=1) >= 0.0, 1.0, -1.0)
    raise ValueError(f"unknown kind {kind!r}")


def cmd_gen_data(args) -> int:
    header = _config_header(
        "gen-data",
        args,
        ["kind", "n", "train", "val", "test", "noise", "seed", "teacher_width"],
    )
    if args.kind == "uniformize":
        return _gen_data_uniformize(args)
    rng = np.random.default_rng(args.seed)
    sizes = {"train": args.train, "validation": args.val, "test": args.test}
    total = sum(sizes.values())
    X = (1.0 - 2.0 * rng.integers(0, 2, size=(total, args.n))).astype(np.float64)
    y = _teacher_labels(args.kind, X, rng, args.teacher_width)
    if args.noise > 0.0:
        flip = rng.random(total) < args.noise
        y = np.where(flip, -y, y)
    start = 0
    for split, m in sizes.items():
        ds = LabeledDataset(X[start : start + m], y[start : start + m], split=split)
        path = f"{args.out}.{split}.csv"
        save_dataset(ds, path)
        _prepend_header(path, header)
        start += m
    print(f"wrote {args.out}.{{train,validation,test}}.csv ({total} examples, n={args.n})")
    return EXIT_OK


def _prepend_header(path: str, header: str) -> None:
    with open(path) as fh:
        body = fh.read()
    with open(path, "w") as fh:
        fh.write(header + "\n" + body)


def _gen_data_uniformize(args) -> int:
    header = _config_header("gen-data", args, ["kind", "input", "seed"])
    raw = np.loadtxt(args.input, delimiter=",", ndmin=2)
    if args.labels:
        labels = np.loadtxt(args.labels, ndmin=1)
        if labels.shape[0] != raw.shape[0]:
            raise DimensionError("label count does not match input rows")
    else:
        labels = np.ones(raw.shape[0])
    model = uniformize.fit(raw)
    model.validate()
    bits = uniformize.binarize(model, raw)
    ds = LabeledDataset(bits, np.where(labels >= 0, 1.0, -1.0), split="train")
    path = f"{args.out}.train.csv"
    save_dataset(ds, path)
    _prepend_header(path, header)
    uniformize.save_covariance_model(model, f"{args.out}.covmodel.txt")
    print(f"wrote {path} and {args.out}.covmodel.txt (d={model.d}, m={raw.shape[0]})")
    return EXIT_OK


# --- training ----------------------------------------------------------------


def _train_cfg(args) -> TrainConfig:
    return TrainConfig(
        width=args.width,
        activation=Activation(args.activation),
        epochs=args.epochs,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        seed=args.seed,
    )


def cmd_train(args) -> int:
    data = _load_split(args.data, "train")
    net = train_sgd(data, _train_cfg(args))
    save_model(net, args.out)
    _prepend_header(
        args.out,
        _config_header("train", args, ["data", "width", "activation", "epochs", "lr", "batch_size", "seed"]),
    )
    print(f"train accuracy {accuracy(net, data):.6f}; model -> {args.out}")
    return EXIT_OK


def cmd_adv_train(args) -> int:
    data = _load_split(args.data, "train")
    net = adversarial_train(
        data, _train_cfg(args), AdvTrainConfig(epochs=args.at_epochs, epsilon_l1=args.at_epsilon)
    )
    save_model(net, args.out)
    _prepend_header(
        args.out,
        _config_header(
            "adv-train",
            args,
            ["data", "width", "activation", "epochs", "lr", "batch_size", "seed", "at_epochs", "at_epsilon"],
        ),
    )
    print(f"train accuracy {accuracy(net, data):.6f}; model -> {args.out}")
    return EXIT_OK


# --- analysis ----------------------------------------------------------------


def cmd_chow(args) -> int:
    net = load_model(args.model)
    ltf = first_layer_ltf(net, args.unit)
    if args.chow_mode == "exact":
        est = chow_exact(ltf.handle(), net.n, cap=args.cap)
    else:
        est = chow_mc(ltf.handle(), net.n, args.chow_epsilon, args.chow_delta, args.chow_seed)
    header = _config_header(
        "chow", args, ["model", "unit", "chow_mode", "chow_epsilon", "chow_delta", "chow_seed", "cap"]
    )
    lines = [
        "coefficient,value",
        "empty," + _FMT % est.h_empty,
    ]
    lines += [f"{i},{_FMT % v}" for i, v in enumerate(est.h_vec)]
    lines.append(f"# mode={est.mode} samples={est.samples} epsilon={est.epsilon} delta={est.delta}")
    _write(args.out, header, lines)
    print(f"unit {args.unit}: h_empty={est.h_empty:.6f}, ||h||_1={np.abs(est.h_vec).sum():.6f}")
    return EXIT_OK


def cmd_stabilize(args) -> int:
    net = load_model(args.model)
    units = range(net.t) if args.units == "all" else [int(u) for u in args.units.split(",")]
    p = _parse_p(args.p)
    out = stabilize_subset(net, units, p, _chow_source(args), rescale=args.rescale)
    save_model(out, args.out)
    _prepend_header(
        args.out,
        _config_header(
            "stabilize",
            args,
            ["model", "units", "p", "rescale", "chow_mode", "chow_epsilon", "chow_delta", "chow_seed", "cap"],
        ),
    )
    changed = int(np.sum(out.stabilized_mask & ~net.stabilized_mask))
    print(f"stabilized {changed} unit(s) at p={args.p}; model -> {args.out}")
    return EXIT_OK


def cmd_select(args) -> int:
    net = load_model(args.model)
    val = _load_split(args.data, "validation")
    cfg = selection.SelectionConfig(
        beta=args.beta,
        p=_parse_p(args.p),
        chow_source=_chow_source(args),
        a_bar=args.a_bar,
        rescale=args.rescale,
    )
    algo = {"gmb": selection.gmb, "gmbc": selection.gmbc, "gmb-fast": selection.gmb_fast}[
        args.algorithm
    ]
    model, trace = algo(net, val, cfg)
    save_model(model, args.out_model)
    header = _config_header(
        "select",
        args,
        [
            "model", "data", "algorithm", "beta", "a_bar", "p",
            "chow_mode", "chow_epsilon", "chow_delta", "chow_seed", "cap", "rescale",
        ],
    )
    _prepend_header(args.out_model, header)
    _write(args.out_trace, header, selection.trace_to_csv(trace).rstrip("\n").split("\n"))
    for w in trace.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(
        f"accepted {len(trace.accepted)}/{net.t} units, proxy_total={trace.proxy_total:.6f}, "
        f"accuracy_evaluations={trace.accuracy_evaluations}"
    )
    return EXIT_OK


def cmd_attack(args) -> int:
    net = load_model(args.model)
    data = _load_split(args.data, args.split)
    budget = AttackBudget(args.epsilon)
    header = _config_header("attack", args, ["model", "data", "split", "epsilon"])
    lines = ["example,true_label,clean_label,success,l1_cost,flips"]
    preds = net.predict(data.X)
    for i in range(data.m):
        outcome = jsma(net, data.X[i], data.y[i], budget)
        flips = ";".join(str(f) for f in outcome.flips)
        lines.append(
            f"{i},{int(data.y[i])},{int(preds[i])},{int(outcome.success)},"
            f"{_FMT % outcome.l1_cost},{flips}"
        )
    _write(args.out, header, lines)
    n_success = sum(1 for ln in lines[1:] if ln.split(",")[3] == "1")
    print(f"attacked {data.m} examples at epsilon={args.epsilon:g}: {n_success} successes")
    return EXIT_OK


def cmd_eval(args) -> int:
    net = load_model(args.model)
    data = _load_split(args.data, args.split)
    epsilons = [float(e) for e in args.epsilons.split(",")]
    rows = attack_curve(net, data, epsilons)
    header = _config_header("eval", args, ["model", "data", "split", "epsilons"])
    lines = ["epsilon,clean_accuracy,robust_accuracy,mean_l1_cost_success"]
    for eps, clean, robust, cost in rows:
        lines.append(f"{_FMT % eps},{_FMT % clean},{_FMT % robust},{_FMT % cost}")
    _write(args.out, header, lines)
    for eps, clean, robust, cost in rows:
        print(f"epsilon={eps:g} clean={clean:.6f} robust={robust:.6f} mean_cost={cost:.6f}")
    return EXIT_OK


def cmd_bounds(args) -> int:
    net = load_model(args.model)
    ltf = first_layer_ltf(net, args.unit)
    p = _parse_p(args.p)
    if args.chow_mode == "exact":
        est = chow_exact(ltf.handle(), net.n, cap=args.cap)
    else:
        est = chow_mc(ltf.handle(), net.n, args.chow_epsilon, args.chow_delta, args.chow_seed)
    if args.mus:
        mus = [float(m) for m in args.mus.split(",")]
    else:
        # Default grid around the normalized bias theta/sqrt(n).
        base = ltf.theta / math.sqrt(net.n)
        mus = [0.0, base / 2.0, base, 2.0 * base]
    header = _config_header(
        "bounds",
        args,
        ["model", "unit", "p", "mus", "chow_mode", "chow_epsilon", "chow_delta", "chow_seed", "cap"],
    )
    lines = ["mu,gamma,bound,bound_clamped,epsilon_be,sigma,e_mu,alpha"]
    for mu in mus:
        if p.p == 1.0:
            rep = accuracy_bound_p1(est, net.n, mu)
        else:
            rep = accuracy_bound_lp(est, p, mu)
        opt = lambda v: _FMT % v if v is not None else "nan"
        lines.append(
            f"{_FMT % mu},{_FMT % rep.gamma},{_FMT % rep.bound},{_FMT % rep.bound_clamped},"
            f"{_FMT % rep.epsilon_be},{opt(rep.sigma)},{opt(rep.e_mu)},{opt(rep.alpha)}"
        )
        print(f"mu={mu:.6g} gamma={rep.gamma:.6g} bound={rep.bound:.6g}")
    _write(args.out, header, lines)
    return EXIT_OK


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fourierstab",
        description="Weight stabilization workbench for binary-input networks",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("gen-data", help="generate synthetic +-1 datasets")
    sp.add_argument("--kind", choices=["planted-ltf", "planted-mlp", "noisy-majority", "uniformize"], required=True)
    sp.add_argument("--n", type=int, default=20)
    sp.add_argument("--train", type=int, default=1000)
    sp.add_argument("--val", type=int, default=500)
    sp.add_argument("--test", type=int, default=500)
    sp.add_argument("--noise", type=float, default=0.0)
    sp.add_argument("--teacher-width", type=int, default=8)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--input", help="real-valued CSV matrix (uniformize only)")
    sp.add_argument("--labels", help="optional +-1 label file, one per row (uniformize only)")
    sp.add_argument("--out", required=True, help="output path prefix")
    sp.set_defaults(fn=cmd_gen_data)

    for name, fn in (("train", cmd_train), ("adv-train", cmd_adv_train)):
        sp = sub.add_parser(name)
        sp.add_argument("--data", required=True, help="dataset path prefix")
        sp.add_argument("--width", type=int, default=32)
        sp.add_argument("--activation", choices=[a.value for a in Activation], default="logistic")
        sp.add_argument("--epochs", type=int, default=20)
        sp.add_argument("--lr", type=float, default=0.5)
        sp.add_argument("--batch-size", type=int, default=64)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", required=True)
        if name == "adv-train":
            sp.add_argument("--at-epochs", type=int, default=2)
            sp.add_argument("--at-epsilon", type=float, default=20.0)
        sp.set_defaults(fn=fn)

    sp = sub.add_parser("chow", help="degree-<=1 coefficients of a first-layer unit")
    sp.add_argument("--model", required=True)
    sp.add_argument("--unit", type=int, required=True)
    _add_chow_flags(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_chow)

    sp = sub.add_parser("stabilize", help="replace unit weights by stabilized analogs")
    sp.add_argument("--model", required=True)
    sp.add_argument("--units", default="all", help="'all' or comma-separated indices")
    sp.add_argument("--p", default="1")
    sp.add_argument("--rescale", choices=["none", "match-qnorm"], default="none")
    _add_chow_flags(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_stabilize)

    sp = sub.add_parser("select", help="choose a unit subset under an accuracy floor")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True, help="dataset path prefix (validation split used)")
    sp.add_argument("--algorithm", choices=["gmb", "gmbc", "gmb-fast"], default="gmb")
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--a-bar", type=float, default=None)
    sp.add_argument("--p", default="1")
    sp.add_argument("--rescale", choices=["none", "match-qnorm"], default="none")
    _add_chow_flags(sp)
    sp.add_argument("--out-model", required=True)
    sp.add_argument("--out-trace", required=True)
    sp.set_defaults(fn=cmd_select)

    sp = sub.add_parser("attack", help="greedy bit-flip attack on each example")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--split", default="test")
    sp.add_argument("--epsilon", type=float, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_attack)

    sp = sub.add_parser("eval", help="robust-accuracy curve over an epsilon grid")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--split", default="test")
    sp.add_argument("--epsilons", required=True, help="comma-separated l1 budgets")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("bounds", help="accuracy-loss bound report over a mu grid")
    sp.add_argument("--model", required=True)
    sp.add_argument("--unit", type=int, required=True)
    sp.add_argument("--p", default="1")
    sp.add_argument("--mus", default="", help="comma-separated mu grid (default: multiples of theta/sqrt(n))")
    _add_chow_flags(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_bounds)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except DimensionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except DegenerateFunctionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMS


if __name__ == "__main__":
    sys.exit(main())
