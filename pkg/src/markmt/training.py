"""Weighted-likelihood fine-tuning objectives and the training loop.

Both feedback forms reduce to one token-weighted negative log-likelihood:
corrections weight every target token by 1, markings weight hypothesis
tokens by a scheme-dependent delta (reward correct tokens, optionally
penalize marked ones), and the sentence-level variant applies one constant
delta per sentence.  EOS is a trained token: weight vectors cover the
surface tokens plus a final EOS slot, which the schemes fill with
delta_plus, so an all-correct marking reproduces the correction objective
exactly.

Losses are minimized (negative weighted log-likelihood), summed over the
tokens of a sentence and averaged over the sentences of a batch.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import model as model_lib
from .corpus import EOS, batch_iterator
from .feedback import Marking, PostEdit
from .metrics import bleu, corpus_ter
from .model import ModelParams, zero_grads

SCHEME_KINDS = ("zero_one", "signed", "custom")
OBJECTIVES = ("corrections", "markings", "sentence_level")
OPTIMIZERS = ("sgd", "adam")
POLARITIES = ("fraction_correct", "fraction_flagged")
# Fine-tuning set sizes for the data-ablation sweep.
SWEEP_SIZES = (125, 250, 375, 500, 625, 750, 875)


@dataclass(frozen=True)
class TokenWeightVector:
    """Per-step deltas for one hypothesis, EOS slot included."""

    hypothesis_id: str
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if not all(math.isfinite(w) for w in self.weights):
            raise ValueError("weights must be finite")


@dataclass(frozen=True)
class WeightScheme:
    """How marking flags translate to per-token deltas."""

    kind: str
    delta_plus: float
    delta_minus: float

    def __post_init__(self) -> None:
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown weight scheme {self.kind!r}")
        if self.kind == "zero_one" and (self.delta_plus, self.delta_minus) != (1.0, 0.0):
            raise ValueError("zero_one fixes deltas at (1, 0)")
        if self.delta_plus <= self.delta_minus:
            raise ValueError("delta_plus must exceed delta_minus")

    @classmethod
    def zero_one(cls) -> "WeightScheme":
        return cls(kind="zero_one", delta_plus=1.0, delta_minus=0.0)

    @classmethod
    def signed(cls, delta_plus: float = 0.5, delta_minus: float = -0.5) -> "WeightScheme":
        return cls(kind="signed", delta_plus=delta_plus, delta_minus=delta_minus)

    @classmethod
    def custom(cls, delta_plus: float, delta_minus: float) -> "WeightScheme":
        return cls(kind="custom", delta_plus=delta_plus, delta_minus=delta_minus)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    batch_size: int = 8
    epochs: int = 10
    optimizer: str = "sgd"
    seed: int = 0
    patience: int | None = None  # early stop on dev TER; None disables

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.patience is not None and self.patience < 0:
            raise ValueError("patience must be non-negative")


def token_weights(
    flags: Sequence[bool], scheme: WeightScheme, hypothesis_id: str = ""
) -> TokenWeightVector:
    """Flags to deltas: correct -> delta_plus, marked -> delta_minus.

    The returned vector has one extra delta_plus entry for EOS, which no
    annotator can mark and which counts as correct.
    """
    weights = tuple(
        scheme.delta_minus if flag else scheme.delta_plus for flag in flags
    ) + (scheme.delta_plus,)
    return TokenWeightVector(hypothesis_id=hypothesis_id, weights=weights)


def sentence_weight_reduction(
    annotation: Marking | PostEdit | Sequence[bool],
    polarity: str = "fraction_correct",
) -> TokenWeightVector:
    """One constant delta per sentence from its flagged-token ratio.

    The default polarity weights a sentence by its fraction of correct
    tokens (an unflagged sentence gets 1.0, i.e. full correction
    weighting); the literal alternative uses the flagged fraction.
    """
    if polarity not in POLARITIES:
        raise ValueError(f"unknown polarity {polarity!r}")
    if isinstance(annotation, Marking):
        hyp_id, flags = annotation.hypothesis_id, annotation.flags
    elif isinstance(annotation, PostEdit):
        hyp_id, flags = annotation.hypothesis_id, annotation.edit_flags
    else:
        hyp_id, flags = "", tuple(annotation)
    if len(flags) == 0:
        raise ValueError("zero-length hypothesis has no sentence weight")
    flagged = sum(bool(f) for f in flags) / len(flags)
    delta = flagged if polarity == "fraction_flagged" else 1.0 - flagged
    return TokenWeightVector(hypothesis_id=hyp_id, weights=(delta,) * (len(flags) + 1))


def _batch_loss_and_grads(
    params: ModelParams,
    batch: Sequence[tuple[Sequence[int], Sequence[int], Sequence[float]]],
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean over sentences of (-sum_t delta_t log p), with its gradient."""
    total = 0.0
    grads = zero_grads(params)
    for x, y, weights in batch:
        y_steps = list(y) + [EOS]
        log_probs = model_lib.forward(params, x, [model_lib.BOS] + list(y))
        steps = log_probs[np.arange(len(y_steps)), y_steps]
        total -= float(np.dot(weights, steps))
        sentence_grads = model_lib.backward(params, x, y_steps, weights)
        for name in grads:
            grads[name] -= sentence_grads[name]
    n = len(batch)
    for name in grads:
        grads[name] /= n
    return total / n, grads


def correction_loss(
    params: ModelParams, batch: Sequence[tuple[Sequence[int], Sequence[int]]]
) -> tuple[float, dict[str, np.ndarray]]:
    """Negative log-likelihood of full corrections (all-ones weights)."""
    if not batch:
        raise ValueError("empty batch")
    expanded = []
    for x, y_star in batch:
        if len(y_star) == 0:
            raise ValueError("corrections must be non-empty")
        expanded.append((x, y_star, np.ones(len(y_star) + 1)))
    return _batch_loss_and_grads(params, expanded)


def marking_loss(
    params: ModelParams,
    batch: Sequence[tuple[Sequence[int], Sequence[int], TokenWeightVector]],
) -> tuple[float, dict[str, np.ndarray]]:
    """Token-weighted negative log-likelihood of marked hypotheses."""
    if not batch:
        raise ValueError("empty batch")
    expanded = []
    for x, hyp, weight_vector in batch:
        if len(weight_vector.weights) != len(hyp) + 1:
            raise ValueError("weights must cover the hypothesis plus EOS")
        expanded.append((x, hyp, np.asarray(weight_vector.weights)))
    return _batch_loss_and_grads(params, expanded)


class _Optimizer:
    def __init__(self, config: TrainConfig, params: ModelParams) -> None:
        self.config = config
        self.step_count = 0
        if config.optimizer == "adam":
            self.m = zero_grads(params)
            self.v = zero_grads(params)

    def step(self, params: ModelParams, grads: dict[str, np.ndarray]) -> None:
        lr = self.config.learning_rate
        self.step_count += 1
        if self.config.optimizer == "sgd":
            for name, grad in grads.items():
                params.tensors[name] -= lr * grad
            return
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        for name, grad in grads.items():
            self.m[name] = beta1 * self.m[name] + (1 - beta1) * grad
            self.v[name] = beta2 * self.v[name] + (1 - beta2) * grad**2
            m_hat = self.m[name] / (1 - beta1**self.step_count)
            v_hat = self.v[name] / (1 - beta2**self.step_count)
            params.tensors[name] -= lr * m_hat / (np.sqrt(v_hat) + eps)


@dataclass(frozen=True)
class FineTuneResult:
    params: ModelParams  # the best-dev checkpoint (final params without dev)
    log: tuple[dict, ...]
    best_epoch: int


def evaluate_dev(
    params: ModelParams, dev_set: Sequence[tuple[Sequence[int], Sequence[int]]]
) -> tuple[float, float]:
    """Greedy-decode the dev sources and score TER/BLEU against references."""
    hyps = [model_lib.greedy_decode(params, x) for x, _ in dev_set]
    refs = [list(ref) for _, ref in dev_set]
    return corpus_ter(hyps, refs), bleu(hyps, refs)


def _resolve_weights(
    example: tuple, objective: str
) -> tuple[Sequence[int], Sequence[int], np.ndarray]:
    if objective == "corrections":
        x, y = example[0], example[1]
        return x, y, np.ones(len(y) + 1)
    x, y, weight_vector = example
    if not isinstance(weight_vector, TokenWeightVector):
        raise ValueError(f"objective {objective!r} needs TokenWeightVector entries")
    if len(weight_vector.weights) != len(y) + 1:
        raise ValueError("weights must cover the hypothesis plus EOS")
    return x, y, np.asarray(weight_vector.weights)


def fine_tune(
    params: ModelParams,
    dataset: Sequence[tuple],
    objective: str,
    config: TrainConfig,
    dev_set: Sequence[tuple[Sequence[int], Sequence[int]]] | None = None,
    clock: Callable[[], float] = time.monotonic,
) -> FineTuneResult:
    """Continue training on annotated data; deterministic given the seed.

    Dataset entries are (x, y) for the corrections objective and
    (x, hypothesis, TokenWeightVector) otherwise.  Epoch 0 logs the
    starting point; when a dev set is given, the returned parameters are
    the checkpoint with the lowest dev TER (ties to the earliest epoch,
    so a fruitless fine-tune falls back to the starting parameters).
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    if not dataset:
        raise ValueError("empty dataset")
    if config.patience is not None and dev_set is None:
        raise ValueError("early stopping needs a dev set")
    examples = [_resolve_weights(ex, objective) for ex in dataset]

    start = clock()
    log: list[dict] = []
    working = params.copy()

    def epoch_row(epoch: int, loss: float) -> dict:
        dev_ter = dev_bleu = None
        if dev_set is not None:
            dev_ter, dev_bleu = evaluate_dev(working, dev_set)
        return {
            "epoch": epoch,
            "objective": objective,
            "loss": loss,
            "dev_ter": dev_ter,
            "dev_bleu": dev_bleu,
            "wallclock_s": clock() - start,
        }

    initial_loss, _ = _batch_loss_and_grads(working, examples)
    log.append(epoch_row(0, initial_loss))
    best = (log[0]["dev_ter"], 0)
    best_params = working.copy()

    optimizer = _Optimizer(config, working)
    for epoch in range(1, config.epochs + 1):
        epoch_seed = (config.seed * 1_000_003 + epoch) % 2**32
        epoch_loss = 0.0
        n_batches = 0
        for batch in batch_iterator(examples, config.batch_size, seed=epoch_seed):
            loss, grads = _batch_loss_and_grads(working, batch)
            optimizer.step(working, grads)
            epoch_loss += loss
            n_batches += 1
        row = epoch_row(epoch, epoch_loss / n_batches)
        log.append(row)
        if dev_set is not None and row["dev_ter"] < best[0]:
            best = (row["dev_ter"], epoch)
            best_params = working.copy()
        if (
            config.patience is not None
            and epoch - best[1] > config.patience
        ):
            break

    if dev_set is None:
        best_params, best = working, (None, config.epochs)
    best_params.assert_finite()
    return FineTuneResult(params=best_params, log=tuple(log), best_epoch=best[1])


def write_training_log(rows: Iterable[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def read_training_log(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def sweep_subsets(
    dataset: Sequence, sizes: Sequence[int] = SWEEP_SIZES, seed: int = 0
) -> dict[int, list]:
    """Nested, seed-shuffled subsets for the data-size ablation.

    Every size takes a prefix of one shuffled order, so smaller sets are
    contained in larger ones and results are comparable across sizes.
    """
    order = np.random.default_rng(seed).permutation(len(dataset))
    out = {}
    for k in sizes:
        if k > len(dataset):
            raise ValueError(f"sweep size {k} exceeds dataset size {len(dataset)}")
        out[k] = [dataset[i] for i in order[:k]]
    return out
