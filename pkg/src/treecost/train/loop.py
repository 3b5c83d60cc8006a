"""Level-wise mini-batch training with early stopping."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..features import CodeLayout, EncodedNode, collate
from ..model import OMEGA_CANDIDATES, TargetNormalizer, TreeCostModel, qerror_loss, qerrors
from ..nn import Adam, NonFiniteError

log = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    lr: float = 1e-3
    omega: float = 1.0
    patience: int = 5
    val_fraction: float = 0.1
    seed: int = 0


@dataclass
class History:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_card_mean: list[float] = field(default_factory=list)
    val_cost_mean: list[float] = field(default_factory=list)
    best_epoch: int = -1
    steps: int = 0
    stopped_early: bool = False


def layout_of(model: TreeCostModel) -> CodeLayout:
    return CodeLayout(model.widths["n_columns"], model.widths["string_dim"])


def split_indices(n: int, val_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    n_val = int(round(n * val_fraction))
    if n > 1:
        n_val = min(max(n_val, 1), n - 1) if val_fraction > 0 else 0
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def fit_normalizer(trees: Sequence[EncodedNode]) -> TargetNormalizer:
    costs, cards = [], []

    def walk(n):
        if n is None:
            return
        costs.append(n.cost)
        cards.append(n.card)
        walk(n.left)
        walk(n.right)

    for t in trees:
        walk(t)
    return TargetNormalizer.fit(costs, cards)


def batch_loss(model: TreeCostModel, trees: Sequence[EncodedNode], norm: TargetNormalizer, omega: float):
    batch = collate(trees, layout_of(model), model.widths)
    _, r = model.forward_batch(batch)[0]
    cost, card = model.heads(r)
    card_t, cost_t = batch.root_labels()
    return qerror_loss(cost, card, norm.normalize_cost(cost_t), norm.normalize_card(card_t), omega)


def predict(model: TreeCostModel, norm: TargetNormalizer, trees: Sequence[EncodedNode],
            batch_size: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Root (cost, card) estimates in natural units."""
    costs, cards = [], []
    for i in range(0, len(trees), batch_size):
        batch = collate(trees[i: i + batch_size], layout_of(model), model.widths)
        c, k = model.predict_batch(batch)
        costs.append(norm.denormalize_cost(c))
        cards.append(norm.denormalize_card(k))
    if not costs:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(costs), np.concatenate(cards)


def _root_labels(trees: Sequence[EncodedNode]) -> tuple[np.ndarray, np.ndarray]:
    return np.array([t.cost for t in trees]), np.array([t.card for t in trees])


def train(
    model: TreeCostModel,
    trees: Sequence[EncodedNode],
    cfg: TrainConfig,
    val_trees: Sequence[EncodedNode] | None = None,
    normalizer: TargetNormalizer | None = None,
) -> tuple[TargetNormalizer, History]:
    """Adam on the q-error loss; keeps the parameters of the best validation epoch.

    Without ``val_trees`` a ``cfg.val_fraction`` split of ``trees`` is held out.
    Early stopping watches the validation mean cardinality q-error.
    """
    trees = list(trees)
    if val_trees is None:
        tr, va = split_indices(len(trees), cfg.val_fraction, cfg.seed)
        val_trees = [trees[i] for i in va]
        trees = [trees[i] for i in tr]
    norm = normalizer or fit_normalizer(trees)
    opt = Adam(model.params(), lr=cfg.lr)
    hist = History()
    rng = np.random.default_rng(cfg.seed)
    best_state, best_score, bad_epochs = model.state_dict(), math.inf, 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(trees))
        losses = []
        for s in range(0, len(order), cfg.batch_size):
            chunk = [trees[i] for i in order[s: s + cfg.batch_size]]
            try:
                loss = batch_loss(model, chunk, norm, cfg.omega)
            except NonFiniteError as e:
                raise TrainingDiverged(f"epoch {epoch} step {hist.steps}: {e}; recent losses {losses[-5:]}") from e
            value = float(loss.value)
            if not math.isfinite(value):
                raise TrainingDiverged(f"epoch {epoch} step {hist.steps}: loss {value}; recent losses {losses[-5:]}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(value)
            hist.steps += 1
        hist.train_loss.append(float(np.mean(losses)) if losses else math.nan)
        if val_trees:
            cost_t, card_t = _root_labels(val_trees)
            cost_e, card_e = predict(model, norm, val_trees)
            qc, qk = qerrors(cost_t, cost_e), qerrors(card_t, card_e)
            hist.val_cost_mean.append(float(qc.mean()))
            hist.val_card_mean.append(float(qk.mean()))
            hist.val_loss.append(float(batch_loss(model, list(val_trees), norm, cfg.omega).value))
            score = hist.val_card_mean[-1]
        else:
            score = hist.train_loss[-1]
        log.info("epoch %d train %.4f val card %.3f", epoch, hist.train_loss[-1], score)
        if score < best_score:
            best_score, best_state, bad_epochs = score, model.state_dict(), 0
            hist.best_epoch = epoch
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                hist.stopped_early = True
                break
    model.load_state_dict(best_state)
    return norm, hist


# ------------------------------------------------------------ loss weight


def select_loss_weight(score: Callable[[float, int], float], n_folds: int,
                       candidates: Sequence[float] = OMEGA_CANDIDATES) -> tuple[float, dict[float, float]]:
    """The candidate with the lowest mean fold score; ties go to the smaller weight."""
    if n_folds < 2:
        raise ValueError("cross validation needs at least two folds")
    table = {}
    best, best_v = None, math.inf
    for w in sorted(candidates):
        v = float(np.mean([score(w, k) for k in range(n_folds)]))
        table[w] = v
        if v < best_v:
            best, best_v = w, v
    return best, table


def cross_validate_omega(make_model: Callable[[], TreeCostModel], trees: Sequence[EncodedNode], cfg: TrainConfig,
                         n_folds: int = 2, candidates: Sequence[float] = OMEGA_CANDIDATES) -> tuple[float, dict[float, float]]:
    """Pick omega by k-fold validation of mean (cost q-error + card q-error)."""
    trees = list(trees)
    folds = np.array_split(np.random.default_rng(cfg.seed).permutation(len(trees)), n_folds)

    def score(w: float, k: int) -> float:
        val = [trees[i] for i in folds[k]]
        tr = [trees[i] for j, f in enumerate(folds) if j != k for i in f]
        model = make_model()
        fold_cfg = TrainConfig(**{**cfg.__dict__, "omega": w})
        norm, _ = train(model, tr, fold_cfg, val_trees=val)
        cost_t, card_t = _root_labels(val)
        cost_e, card_e = predict(model, norm, val)
        return float(np.mean(qerrors(cost_t, cost_e) + qerrors(card_t, card_e)))

    return select_loss_weight(score, n_folds, candidates)
