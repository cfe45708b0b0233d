"""Independent straight-line oracles and tiny providers used across tests.

Everything here is deliberately unvectorized and written separately from the
package so it can serve as a reference implementation.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

from kgdial.embedding import (
    MAX_KNOWLEDGE_TOKENS,
    MAX_QUESTION_TOKENS,
    tokenize,
)


class FixedProvider:
    """Maps listed tokens to given vectors; everything else to zeros."""

    kind = "fixed"

    def __init__(self, vectors: dict[str, list[float]]):
        self._vectors = {t: np.array(v, dtype=float) for t, v in vectors.items()}
        self.dim = next(iter(self._vectors.values())).size

    def embed(self, token):
        return self._vectors.get(token, np.zeros(self.dim))

    def embed_tokens(self, tokens):
        return np.array([self.embed(t) for t in tokens])


class ScaledProvider:
    """Wraps a provider and multiplies every vector by a constant."""

    def __init__(self, base, factor: float):
        self.base = base
        self.factor = factor
        self.dim = base.dim

    def embed(self, token):
        return self.factor * self.base.embed(token)

    def embed_tokens(self, tokens):
        return np.array([self.embed(t) for t in tokens])


def naive_cosine(a, b) -> float:
    dot = 0.0
    na = 0.0
    nb = 0.0
    for x, y in zip(a, b):
        dot += float(x) * float(y)
        na += float(x) * float(x)
        nb += float(y) * float(y)
    na = math.sqrt(na)
    nb = math.sqrt(nb)
    if na < 1e-12 or nb < 1e-12:
        return 0.0
    return dot / (na * nb)


def naive_node_features(question, candidates, provider, bank) -> np.ndarray:
    """Triple-loop re-implementation of the per-candidate kernel features."""
    features = []
    q_tokens = tokenize(question)[:MAX_QUESTION_TOKENS]
    for candidate in candidates:
        k_tokens = tokenize(candidate.title + " " + candidate.body)[:MAX_KNOWLEDGE_TOKENS]
        q_vectors = [provider.embed(t) for t in q_tokens]
        k_vectors = [provider.embed(t) for t in k_tokens]
        similarity = [[naive_cosine(q, k) for k in k_vectors] for q in q_vectors]
        row = []
        for mu, sigma in zip(bank.mus, bank.sigmas):
            total = 0.0
            for i in range(len(q_vectors)):
                inner = 0.0
                for j in range(len(k_vectors)):
                    delta = similarity[i][j] - float(mu)
                    inner += math.exp(-(delta * delta) / (2.0 * float(sigma) * float(sigma)))
                total += math.log(max(inner, 1e-10))
            row.append(total / len(q_vectors))
        features.append(row)
    return np.array(features)


def oracle_ngram_index(ngram: str, hash_dim: int) -> int:
    digest = hashlib.blake2b(ngram.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % hash_dim


def oracle_detection_metrics(predictions, gold) -> dict:
    tp = sum(1 for p, g in zip(predictions, gold) if p and g)
    fp = sum(1 for p, g in zip(predictions, gold) if p and not g)
    fn = sum(1 for p, g in zip(predictions, gold) if not p and g)
    tn = sum(1 for p, g in zip(predictions, gold) if not p and not g)
    precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
    return {
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "counts": {"tp": tp, "fp": fp, "fn": fn, "tn": tn},
    }


def oracle_selection_metrics(positions) -> dict:
    n = len(positions)
    acc1 = sum(1 for p in positions if p == 1) / n
    acc5 = sum(1 for p in positions if p <= 5) / n
    reciprocal = 0.0
    for p in positions:
        reciprocal += (1.0 / p) if p <= 5 else 0.0
    return {"acc_at_1": acc1, "acc_at_5": acc5, "mrr_at_5": reciprocal / n, "n_instances": n}


def finite_difference_gradient(loss_of_weights, weights: np.ndarray, h: float = 1e-5) -> np.ndarray:
    gradient = np.zeros_like(weights)
    for k in range(weights.size):
        upper = weights.copy()
        lower = weights.copy()
        upper[k] += h
        lower[k] -= h
        gradient[k] = (loss_of_weights(upper) - loss_of_weights(lower)) / (2.0 * h)
    return gradient
