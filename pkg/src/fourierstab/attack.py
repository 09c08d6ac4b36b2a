"""Greedy bit-flip evasion attack on +-1 inputs and the training loop that
hardens against it.

Impact is measured by exact one-flip forward evaluation of the logistic loss
rather than a gradient saliency map: models here are small enough that the
exact version is cheap, and it sidesteps the gradient-vs-discrete mismatch.
A bit flip costs 2 in l1, so a budget epsilon allows floor(epsilon/2) flips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError
from .network import BinaryMlp, LabeledDataset, TrainConfig, train_sgd


@dataclass(frozen=True)
class AttackBudget:
    epsilon_l1: float

    def __post_init__(self):
        if self.epsilon_l1 < 0.0:
            raise ValueError("epsilon_l1 must be >= 0")

    @property
    def max_flips(self) -> int:
        return int(math.floor(self.epsilon_l1 / 2.0))


@dataclass(frozen=True)
class AttackOutcome:
    success: bool
    flips: tuple[int, ...]
    l1_cost: float
    final_label: float


def _loss(net: BinaryMlp, X: np.ndarray, y) -> np.ndarray:
    """Logistic loss of the prediction margin against label y."""
    return np.logaddexp(0.0, -np.asarray(y) * net.margin(X))


def flip_impact(net: BinaryMlp, x, y: float) -> np.ndarray:
    """Loss increase from flipping each single coordinate of x."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.n,):
        raise DimensionError(f"x has shape {x.shape}, expected ({net.n},)")
    base = float(_loss(net, x[None, :], y)[0])
    variants = np.tile(x, (net.n, 1))
    idx = np.arange(net.n)
    variants[idx, idx] = -variants[idx, idx]
    return _loss(net, variants, y) - base


def jsma(net: BinaryMlp, x, y: float, budget: AttackBudget) -> AttackOutcome:
    """Greedy highest-impact bit flipping until the model's own prediction
    changes or the budget is exhausted; coordinates are never re-flipped,
    ties break toward the lowest index."""
    x = np.asarray(x, dtype=np.float64).copy()
    orig = float(net.predict(x[None, :])[0])
    flips: list[int] = []
    for _ in range(budget.max_flips):
        impacts = flip_impact(net, x, y)
        if flips:
            impacts[flips] = -np.inf
        i = int(np.argmax(impacts))
        x[i] = -x[i]
        flips.append(i)
        label = float(net.predict(x[None, :])[0])
        if label != orig:
            return AttackOutcome(True, tuple(flips), 2.0 * len(flips), label)
    return AttackOutcome(False, tuple(flips), 2.0 * len(flips), float(net.predict(x[None, :])[0]))


def jsma_maxloss(net: BinaryMlp, x, y: float, k: int) -> np.ndarray:
    """Flip exactly min(k, n) coordinates in greedy impact order, regardless
    of misclassification; returns the perturbed input."""
    x = np.asarray(x, dtype=np.float64).copy()
    flips: list[int] = []
    for _ in range(min(k, net.n)):
        impacts = flip_impact(net, x, y)
        if flips:
            impacts[flips] = -np.inf
        i = int(np.argmax(impacts))
        x[i] = -x[i]
        flips.append(i)
    return x


def jsma_maxloss_batch(net: BinaryMlp, X: np.ndarray, y: np.ndarray, k: int) -> np.ndarray:
    """Row-wise jsma_maxloss, vectorized across the batch.

    Each round evaluates all single-flip variants of every row at once; the
    greedy path per row is identical to the scalar version.
    """
    X = np.asarray(X, dtype=np.float64).copy()
    y = np.asarray(y, dtype=np.float64)
    m, n = X.shape
    if k <= 0:
        return X
    flipped = np.zeros((m, n), dtype=bool)
    rows = np.arange(m)
    for _ in range(min(k, n)):
        base = _loss(net, X, y)
        variants = np.repeat(X, n, axis=0)
        cols = np.tile(np.arange(n), m)
        flat = np.arange(m * n)
        variants[flat, cols] = -variants[flat, cols]
        impacts = (_loss(net, variants, np.repeat(y, n)) - np.repeat(base, n)).reshape(m, n)
        impacts[flipped] = -np.inf
        best = np.argmax(impacts, axis=1)
        X[rows, best] = -X[rows, best]
        flipped[rows, best] = True
    return X


def robust_accuracy(net: BinaryMlp, data: LabeledDataset, budget: AttackBudget) -> float:
    """Fraction of examples both correctly classified clean and unbroken by
    the greedy attack within budget."""
    preds = net.predict(data.X)
    robust = 0
    for i in range(data.m):
        if preds[i] != data.y[i]:
            continue
        if not jsma(net, data.X[i], data.y[i], budget).success:
            robust += 1
    return robust / data.m


def attack_curve(net: BinaryMlp, data: LabeledDataset, epsilons) -> list[tuple[float, float, float, float]]:
    """Per-epsilon (epsilon, clean accuracy, robust accuracy, mean l1 cost of
    successful attacks; nan when none succeed)."""
    preds = net.predict(data.X)
    clean = float(np.mean(preds == data.y))
    out = []
    for eps in epsilons:
        budget = AttackBudget(float(eps))
        robust = 0
        costs = []
        for i in range(data.m):
            if preds[i] != data.y[i]:
                continue
            outcome = jsma(net, data.X[i], data.y[i], budget)
            if outcome.success:
                costs.append(outcome.l1_cost)
            else:
                robust += 1
        mean_cost = float(np.mean(costs)) if costs else float("nan")
        out.append((float(eps), clean, robust / data.m, mean_cost))
    return out


@dataclass(frozen=True)
class AdvTrainConfig:
    epochs: int
    epsilon_l1: float


def adversarial_train(data: LabeledDataset, cfg: TrainConfig, at_cfg: AdvTrainConfig) -> BinaryMlp:
    """SGD where every batch is replaced by its budgeted loss-maximizing
    perturbation against the current model; deterministic given cfg.seed.

    With epsilon_l1 = 0 the trajectory is identical to plain train_sgd.
    """
    k = AttackBudget(at_cfg.epsilon_l1).max_flips

    def perturb(net: BinaryMlp, Xb: np.ndarray, yb: np.ndarray) -> np.ndarray:
        return jsma_maxloss_batch(net, Xb, yb, k)

    net = train_sgd(data, replace(cfg, epochs=at_cfg.epochs), perturb=perturb)
    lineage = f"{net.seed_lineage};adv:epochs={at_cfg.epochs},epsilon={at_cfg.epsilon_l1:g}"
    return replace(net, seed_lineage=lineage)
