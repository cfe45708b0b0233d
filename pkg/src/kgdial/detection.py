"""Knowledge-seeking turn detection.

The dialog is flattened to one string (current user turn first, then the
history from the beginning, every turn prefixed by its speaker tag), hashed
into a bag of word unigrams and bigrams, extended with a one-hot turn-count
bucket, and scored by a bias-free sigmoid linear model trained with
full-batch gradient descent on binary log loss.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .corpus import Corpus, DialogInstance, Speaker
from .embedding import tokenize

SPEAKER_PREFIX = {Speaker.USER: "[User]", Speaker.SYS: "[Sys]"}


def serialize_dialog(dialog: DialogInstance) -> str:
    """Flatten a dialog: current user turn first, then the history in order.

    Every turn is prefixed by "[User]" or "[Sys]". Injective up to turn texts
    that themselves contain those literal tags.
    """
    turns = dialog.turns
    if not turns or turns[-1].speaker is not Speaker.USER:
        raise ValueError(f"dialog {dialog.id}: last turn must be a user turn")
    parts = [SPEAKER_PREFIX[Speaker.USER], turns[-1].text]
    for turn in turns[:-1]:
        parts.append(SPEAKER_PREFIX[turn.speaker])
        parts.append(turn.text)
    return "".join(parts)


def ngram_hash(ngram: str) -> int:
    """Stable 64-bit hash of an n-gram (big-endian blake2b digest)."""
    return int.from_bytes(hashlib.blake2b(ngram.encode("utf-8"), digest_size=8).digest(), "big")


def featurize(serialized: str, turn_count: int, hash_dim: int, turn_buckets: int) -> np.ndarray:
    """Hashed unigram+bigram counts followed by a one-hot turn-count bucket.

    Speaker tags survive tokenization as the tokens "user" and "sys". Each
    n-gram adds 1.0 at ``ngram_hash(ngram) % hash_dim``; the bucket index is
    ``min(turn_count, turn_buckets) - 1``.
    """
    if hash_dim < 1 or turn_buckets < 1:
        raise ValueError(f"need hash_dim >= 1 and turn_buckets >= 1, got {hash_dim}, {turn_buckets}")
    if turn_count < 1:
        raise ValueError(f"turn_count must be >= 1, got {turn_count}")
    tokens = tokenize(serialized)
    values = np.zeros(hash_dim + turn_buckets)
    for gram in tokens:
        values[ngram_hash(gram) % hash_dim] += 1.0
    for first, second in zip(tokens, tokens[1:]):
        values[ngram_hash(first + " " + second) % hash_dim] += 1.0
    values[hash_dim + min(turn_count, turn_buckets) - 1] = 1.0
    return values


@dataclass(frozen=True)
class DetectorModel:
    """Bias-free sigmoid linear scorer over hashed dialog features."""

    weights: np.ndarray
    hash_dim: int
    turn_buckets: int
    threshold: float = 0.5

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", weights)
        if self.hash_dim < 16:
            raise ValueError(f"hash_dim must be >= 16, got {self.hash_dim}")
        if self.turn_buckets < 1:
            raise ValueError(f"turn_buckets must be >= 1, got {self.turn_buckets}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must lie in (0, 1), got {self.threshold}")
        if weights.shape != (self.hash_dim + self.turn_buckets,):
            raise ValueError(
                f"weights must have length hash_dim + turn_buckets = "
                f"{self.hash_dim + self.turn_buckets}, got shape {weights.shape}"
            )
        if not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite")


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + np.exp(-z))
    e = np.exp(z)
    return e / (1.0 + e)


def detect_score(model: DetectorModel, values: np.ndarray) -> float:
    """Probability sigmoid(weights . values); raises on dimension mismatch."""
    values = np.asarray(values, dtype=float)
    if values.shape != model.weights.shape:
        raise ValueError(f"feature shape {values.shape} does not match weights {model.weights.shape}")
    return float(_sigmoid(float(model.weights @ values)))


class DetectionResult(NamedTuple):
    probability: float
    triggered: bool


def detect(model: DetectorModel, dialog: DialogInstance) -> DetectionResult:
    """Score one dialog; triggered when probability >= threshold (boundary in)."""
    values = featurize(
        serialize_dialog(dialog), len(dialog.turns), model.hash_dim, model.turn_buckets
    )
    probability = detect_score(model, values)
    return DetectionResult(probability, probability >= model.threshold)


@dataclass(frozen=True)
class DetectorHyper:
    hash_dim: int = 4096
    turn_buckets: int = 16
    lr: float = 0.1
    epochs: int = 100
    seed: int = 42
    threshold: float = 0.5
    line_search: bool = False


def _sigmoid_vector(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    positive = z >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-z[positive]))
    exp = np.exp(z[~positive])
    out[~positive] = exp / (1.0 + exp)
    return out


def _log_loss(matrix: np.ndarray, labels: np.ndarray, weights: np.ndarray) -> float:
    z = matrix @ weights
    return float(np.logaddexp(0.0, (1.0 - 2.0 * labels) * z).mean())


def train_detector(
    corpus: Corpus, hyper: DetectorHyper = DetectorHyper()
) -> tuple[DetectorModel, list[float]]:
    """Full-batch gradient descent on mean binary log loss from zero init.

    Labels come from each dialog's target flag; both classes must be present.
    Returns the model and the loss trajectory (epochs + 1 entries, first at
    initialization). With ``line_search`` the step is halved until the loss
    does not increase. Deterministic for fixed inputs and hyperparameters.
    """
    if not corpus.dialogs:
        raise ValueError("corpus has no dialogs")
    matrix = np.array(
        [
            featurize(serialize_dialog(d), len(d.turns), hyper.hash_dim, hyper.turn_buckets)
            for d in corpus.dialogs
        ]
    )
    labels = np.array([1.0 if d.target else 0.0 for d in corpus.dialogs])
    if labels.min() == labels.max():
        raise ValueError("training corpus must contain both target and non-target dialogs")

    weights = np.zeros(hyper.hash_dim + hyper.turn_buckets)
    losses = [_log_loss(matrix, labels, weights)]
    for _ in range(hyper.epochs):
        probabilities = _sigmoid_vector(matrix @ weights)
        gradient = matrix.T @ (probabilities - labels) / len(labels)

        if hyper.line_search:
            step = hyper.lr
            for _ in range(60):
                trial = weights - step * gradient
                if _log_loss(matrix, labels, trial) <= losses[-1]:
                    weights = trial
                    break
                step /= 2
        else:
            weights = weights - hyper.lr * gradient
        losses.append(_log_loss(matrix, labels, weights))
    model = DetectorModel(weights, hyper.hash_dim, hyper.turn_buckets, hyper.threshold)
    return model, losses


def save_detector(model: DetectorModel, path) -> None:
    """Write the model as JSON with exact float round-trip."""
    payload = {
        "hash_dim": model.hash_dim,
        "turn_buckets": model.turn_buckets,
        "threshold": model.threshold,
        "weights": model.weights.tolist(),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_detector(path) -> DetectorModel:
    """Read a model file written by :func:`save_detector`."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        return DetectorModel(
            np.array(payload["weights"], dtype=float),
            int(payload["hash_dim"]),
            int(payload["turn_buckets"]),
            float(payload["threshold"]),
        )
    except KeyError as exc:
        raise ValueError(f"{path}: missing field {exc.args[0]!r}") from None
