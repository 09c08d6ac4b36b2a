"""Two-layer fully-connected network over +-1 inputs.

The first layer is the unit of stabilization: unit j realizes the
linear-threshold function with w = W1[j] and theta = -b1[j]. The prediction
statistic is the head score minus the activation midpoint (0.5 for logistic,
0 otherwise), so label = sign(margin) with sign(0) = +1.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Union

import numpy as np

from .errors import DegenerateFunctionError, DimensionError, SchemaError
from .fourier import ExactChow, MonteCarloChow
from .neuron import LinearThresholdNeuron, PNorm, norm, sign_pm1, stabilize

ChowSource = Union[ExactChow, MonteCarloChow]


class Activation(enum.Enum):
    SIGN = "sign"
    LOGISTIC = "logistic"
    TANH = "tanh"
    RELU = "relu"

    def apply(self, z: np.ndarray) -> np.ndarray:
        if self is Activation.SIGN:
            return sign_pm1(z)
        if self is Activation.LOGISTIC:
            return 1.0 / (1.0 + np.exp(-z))
        if self is Activation.TANH:
            return np.tanh(z)
        return np.maximum(z, 0.0)

    def derivative(self, z: np.ndarray, a: np.ndarray) -> np.ndarray:
        """d act/dz given pre-activation z and activation a (sign has none)."""
        if self is Activation.LOGISTIC:
            return a * (1.0 - a)
        if self is Activation.TANH:
            return 1.0 - a * a
        if self is Activation.RELU:
            return (z > 0.0).astype(np.float64)
        raise ValueError("sign activation has no usable derivative")

    @property
    def midpoint(self) -> float:
        return 0.5 if self is Activation.LOGISTIC else 0.0


@dataclass(frozen=True)
class BinaryMlp:
    W1: np.ndarray  # (t, n)
    b1: np.ndarray  # (t,)
    act: Activation
    W2: np.ndarray  # (t,)
    b2: float
    stabilized_mask: np.ndarray  # (t,) bool
    seed_lineage: str = ""

    def __post_init__(self):
        W1 = np.asarray(self.W1, dtype=np.float64)
        object.__setattr__(self, "W1", W1)
        object.__setattr__(self, "b1", np.asarray(self.b1, dtype=np.float64))
        object.__setattr__(self, "W2", np.asarray(self.W2, dtype=np.float64))
        object.__setattr__(self, "stabilized_mask", np.asarray(self.stabilized_mask, dtype=bool))
        t, n = W1.shape
        if self.b1.shape != (t,) or self.W2.shape != (t,) or self.stabilized_mask.shape != (t,):
            raise DimensionError("inconsistent layer shapes")

    @property
    def n(self) -> int:
        return self.W1.shape[1]

    @property
    def t(self) -> int:
        return self.W1.shape[0]

    def hidden(self, X: np.ndarray) -> np.ndarray:
        return self.act.apply(X @ self.W1.T + self.b1)

    def score(self, X: np.ndarray) -> np.ndarray:
        return self.hidden(X) @ self.W2 + self.b2

    def margin(self, X: np.ndarray) -> np.ndarray:
        """Score minus the activation midpoint; label = sign(margin)."""
        return self.score(X) - self.act.midpoint

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.n:
            raise DimensionError(f"input dimension {X.shape[-1]} != {self.n}")
        return sign_pm1(self.margin(X))


def fresh_mask(t: int) -> np.ndarray:
    return np.zeros(t, dtype=bool)


def forward(net: BinaryMlp, x) -> tuple[float, float]:
    """Score and +-1 label for a single input."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.n,):
        raise DimensionError(f"x has shape {x.shape}, expected ({net.n},)")
    s = float(net.score(x[None, :])[0])
    return s, 1.0 if s - net.act.midpoint >= 0.0 else -1.0


@dataclass(frozen=True)
class LabeledDataset:
    X: np.ndarray  # (m, n) entries in {-1, +1}
    y: np.ndarray  # (m,) labels in {-1, +1}
    split: str = "train"

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if X.ndim != 2 or X.shape[0] < 1:
            raise ValueError("X must be a nonempty matrix")
        if y.shape != (X.shape[0],):
            raise DimensionError("label count does not match example count")
        if not np.all(np.abs(X) == 1.0):
            raise ValueError("features must be exactly +-1")
        if not np.all(np.abs(y) == 1.0):
            raise ValueError("labels must be exactly +-1")

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    width: int
    activation: Activation
    epochs: int
    learning_rate: float
    batch_size: int
    seed: int


def _logistic_loss_grad(margin: np.ndarray, y: np.ndarray) -> np.ndarray:
    """d/d margin of log(1 + exp(-y*margin))."""
    return -y / (1.0 + np.exp(y * margin))


def train_sgd(data: LabeledDataset, cfg: TrainConfig, perturb=None) -> BinaryMlp:
    """Logistic-loss SGD with backpropagation; deterministic given cfg.seed.

    Sign activation is trained through a tanh surrogate and snapped to sign
    after the last step. perturb, when given, maps (net, Xb, yb) to a
    replacement batch before each gradient step (adversarial training hook).
    """
    if data.m < 1:
        raise ValueError("training split is empty")
    n, t = data.n, cfg.width
    rng = np.random.default_rng(cfg.seed)
    W1 = rng.normal(0.0, 1.0 / np.sqrt(n), size=(t, n))
    b1 = np.zeros(t)
    W2 = rng.normal(0.0, 1.0 / np.sqrt(t), size=t)
    b2 = 0.0
    act = Activation.TANH if cfg.activation is Activation.SIGN else cfg.activation
    mid = act.midpoint
    lr = cfg.learning_rate
    for _ in range(cfg.epochs):
        order = rng.permutation(data.m)
        for start in range(0, data.m, cfg.batch_size):
            sel = order[start : start + cfg.batch_size]
            Xb, yb = data.X[sel], data.y[sel]
            if perturb is not None:
                net = BinaryMlp(W1, b1, act, W2, b2, fresh_mask(t))
                Xb = perturb(net, Xb, yb)
            B = Xb.shape[0]
            Z = Xb @ W1.T + b1
            A = act.apply(Z)
            g = _logistic_loss_grad(A @ W2 + b2 - mid, yb)
            dZ = (g[:, None] * W2[None, :]) * act.derivative(Z, A)
            W2 = W2 - lr * (g @ A) / B
            b2 = b2 - lr * float(g.mean())
            W1 = W1 - lr * (dZ.T @ Xb) / B
            b1 = b1 - lr * dZ.mean(axis=0)
    return BinaryMlp(
        W1=W1,
        b1=b1,
        act=cfg.activation,
        W2=W2,
        b2=b2,
        stabilized_mask=fresh_mask(t),
        seed_lineage=f"train:seed={cfg.seed}",
    )


def first_layer_ltf(net: BinaryMlp, j: int) -> LinearThresholdNeuron:
    """Unit j as a linear-threshold function: w = W1[j], theta = -b1[j]."""
    if not 0 <= j < net.t:
        raise DimensionError(f"unit index {j} out of range for width {net.t}")
    return LinearThresholdNeuron(net.W1[j].copy(), -float(net.b1[j]))


def stabilize_subset(
    net: BinaryMlp,
    S: Iterable[int],
    p: PNorm,
    chow_source: Optional[ChowSource] = None,
    rescale: str = "none",
) -> BinaryMlp:
    """Replace the weights of the first-layer units in S by their stabilized
    analogs; biases are untouched under rescale="none".

    rescale="match-qnorm" multiplies each replacement (w*, theta) by the
    original ||w||_q so the pre-activation scale is preserved for saturating
    activations. Degenerate units (zero row or zero coefficient vector) are
    skipped with a warning.
    """
    if rescale not in ("none", "match-qnorm"):
        raise ValueError(f"unknown rescale mode {rescale!r}")
    W1 = net.W1.copy()
    b1 = net.b1.copy()
    mask = net.stabilized_mask.copy()
    for j in sorted(set(int(j) for j in S)):
        if not 0 <= j < net.t:
            raise DimensionError(f"unit index {j} out of range for width {net.t}")
        if not np.any(W1[j] != 0.0):
            warnings.warn(f"unit {j} has a zero weight row; skipped")
            continue
        ltf = LinearThresholdNeuron(W1[j], -float(b1[j]))
        chow = None
        if p.p != 1.0:
            if chow_source is None:
                raise ValueError("p > 1 stabilization requires a chow_source")
            chow = chow_source.estimate(ltf.handle(), net.n, key=j)
        try:
            res = stabilize(ltf, p, chow, mu=ltf.theta)
        except DegenerateFunctionError:
            warnings.warn(f"unit {j} is degenerate (zero coefficient vector); skipped")
            continue
        scale = norm(ltf.w, p.q) if rescale == "match-qnorm" else 1.0
        W1[j] = res.w_star * scale
        b1[j] = -ltf.theta * scale
        mask[j] = True
    return replace(net, W1=W1, b1=b1, stabilized_mask=mask)


def accuracy(net: BinaryMlp, data: LabeledDataset) -> float:
    if data.n != net.n:
        raise DimensionError(f"dataset dimension {data.n} != model dimension {net.n}")
    return float(np.mean(net.predict(data.X) == data.y))


# --- serialization -----------------------------------------------------------

_FMT = "%.17g"


def _fmt_vec(v: np.ndarray) -> str:
    return ",".join(_FMT % x for x in np.asarray(v, dtype=np.float64))


def save_model(net: BinaryMlp, path) -> None:
    """Self-describing text document; numbers carry 17 significant digits."""
    lines = [
        "# binary-mlp v1",
        f"n={net.n}",
        f"t={net.t}",
        f"activation={net.act.value}",
        f"seed_lineage={net.seed_lineage}",
        "b2=" + (_FMT % net.b2),
        "W2=" + _fmt_vec(net.W2),
        "b1=" + _fmt_vec(net.b1),
        "stabilized_mask=" + ",".join("1" if b else "0" for b in net.stabilized_mask),
    ]
    for j in range(net.t):
        lines.append(f"W1.{j}=" + _fmt_vec(net.W1[j]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> BinaryMlp:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    # CLI outputs carry a leading "# config:" provenance line; skip it.
    while lines and lines[0].startswith("# config:"):
        lines = lines[1:]
    if not lines or lines[0] != "# binary-mlp v1":
        raise SchemaError(f"{path}: missing binary-mlp header")
    kv = {}
    for ln in lines[1:]:
        if not ln:
            continue
        key, _, val = ln.partition("=")
        kv[key] = val
    try:
        n = int(kv["n"])
        t = int(kv["t"])
        act = Activation(kv["activation"])
        b2 = float(kv["b2"])
        W2 = np.array([float(x) for x in kv["W2"].split(",")])
        b1 = np.array([float(x) for x in kv["b1"].split(",")])
        mask = np.array([c == "1" for c in kv["stabilized_mask"].split(",")])
        W1 = np.array([[float(x) for x in kv[f"W1.{j}"].split(",")] for j in range(t)])
    except (KeyError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed model document ({exc})") from exc
    if W1.shape != (t, n):
        raise SchemaError(f"{path}: W1 shape {W1.shape} != ({t}, {n})")
    return BinaryMlp(
        W1=W1,
        b1=b1,
        act=act,
        W2=W2,
        b2=b2,
        stabilized_mask=mask,
        seed_lineage=kv.get("seed_lineage", ""),
    )


def save_dataset(ds: LabeledDataset, path) -> None:
    """CSV: header 'n=<n>', then n +-1 feature columns and one label column."""
    with open(path, "w") as fh:
        fh.write(f"n={ds.n}\n")
        for row, label in zip(ds.X, ds.y):
            cells = ["+1" if v > 0 else "-1" for v in row]
            cells.append("+1" if label > 0 else "-1")
            fh.write(",".join(cells) + "\n")


def load_dataset(path, split: str = "train") -> LabeledDataset:
    with open(path) as fh:
        header = fh.readline().strip()
        while header.startswith("# config:"):
            header = fh.readline().strip()
        if not header.startswith("n="):
            raise SchemaError(f"{path}: expected 'n=<n>' header, got {header!r}")
        try:
            n = int(header[2:])
        except ValueError as exc:
            raise SchemaError(f"{path}: bad header {header!r}") from exc
        rows, labels = [], []
        for lineno, ln in enumerate(fh, start=2):
            ln = ln.strip()
            if not ln:
                continue
            cells = ln.split(",")
            if len(cells) != n + 1:
                raise SchemaError(f"{path}:{lineno}: expected {n + 1} columns, got {len(cells)}")
            try:
                vals = [float(c) for c in cells]
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: non-numeric cell") from exc
            rows.append(vals[:n])
            labels.append(vals[n])
    if not rows:
        raise SchemaError(f"{path}: dataset has no examples")
    return LabeledDataset(np.array(rows), np.array(labels), split=split)
