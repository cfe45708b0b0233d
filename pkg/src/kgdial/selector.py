"""Kernel-based knowledge selection over question-knowledge similarity matrices.

Each candidate snippet becomes one node: the question and snippet token
embeddings form an m x p cosine translation matrix, a bank of Gaussian
kernels turns that matrix into a K-dimensional soft match-count feature, and
a shared linear readout followed by a softmax over candidates yields the
selection distribution. Embeddings and kernels stay frozen; only the readout
weights train, so the objective is convex and training deterministic.

Feature convention: per query token, kernel responses are summed over
knowledge tokens, clamped at 1e-10, logged, then averaged over query tokens.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, KnowledgeSnippet, SnippetRef, candidate_set
from .embedding import PairEmbedding, embed_pair, provider_from_description

# Floor applied to summed kernel responses before the log.
KERNEL_EPS = 1e-10

# The exact-match kernel counts near-identical tokens (cosine ~ 1).
EXACT_MU = 1.0
EXACT_SIGMA = 1e-3

SOFT_SIGMA = 0.1


@dataclass(frozen=True)
class KernelBank:
    """Gaussian kernel centers and widths; the exact-match kernel sits last."""

    mus: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        mus = np.asarray(self.mus, dtype=float)
        sigmas = np.asarray(self.sigmas, dtype=float)
        object.__setattr__(self, "mus", mus)
        object.__setattr__(self, "sigmas", sigmas)
        if mus.ndim != 1 or mus.shape != sigmas.shape:
            raise ValueError("mus and sigmas must be equal-length vectors")
        if mus.size < 2:
            raise ValueError(f"need at least 2 kernels, got {mus.size}")
        if np.any(sigmas <= 0):
            raise ValueError("sigmas must be positive")
        if np.any(np.abs(mus) > 1):
            raise ValueError("mus must lie in [-1, 1]")
        exact = (mus == EXACT_MU) & (sigmas == EXACT_SIGMA)
        if not exact[-1] or np.any(exact[:-1]):
            raise ValueError(
                f"exactly one exact-match kernel (mu={EXACT_MU}, sigma={EXACT_SIGMA}) "
                "must sit at the last index"
            )

    @property
    def size(self) -> int:
        return self.mus.size


def default_kernel_bank(n_kernels: int = 11) -> KernelBank:
    """n_kernels - 1 evenly spaced soft kernels (sigma 0.1) plus the exact-match kernel.

    Soft centers are the midpoints of an even partition of [-1, 1]; for the
    default 11 kernels they are -0.9, -0.7, ..., 0.9.
    """
    if n_kernels < 2:
        raise ValueError(f"n_kernels must be >= 2, got {n_kernels}")
    n_soft = n_kernels - 1
    mus = [-1.0 + (2 * i + 1) / n_soft for i in range(n_soft)] + [EXACT_MU]
    sigmas = [SOFT_SIGMA] * n_soft + [EXACT_SIGMA]
    return KernelBank(np.array(mus), np.array(sigmas))


def translation_matrix(pair: PairEmbedding) -> np.ndarray:
    """m x p cosine similarities between question and knowledge token vectors.

    Rows or columns backed by a vector of norm < 1e-12 produce entries of 0.
    """
    def normalize(vectors):
        norms = np.linalg.norm(vectors, axis=1)
        inv = np.zeros_like(norms)
        nonzero = norms >= 1e-12
        inv[nonzero] = 1.0 / norms[nonzero]
        return vectors * inv[:, None]

    return normalize(pair.question_vectors) @ normalize(pair.knowledge_vectors).T


def kernel_features(matrix: np.ndarray, bank: KernelBank) -> np.ndarray:
    """Length-K soft match-count feature of one translation matrix.

    Per kernel k: (1/m) * sum_i log(max(sum_j exp(-(M_ij - mu_k)^2 /
    (2 sigma_k^2)), 1e-10)).
    """
    diff = matrix[:, :, None] - bank.mus[None, None, :]
    responses = np.exp(-(diff**2) / (2.0 * bank.sigmas[None, None, :] ** 2))
    pooled = responses.sum(axis=1)
    return np.log(np.maximum(pooled, KERNEL_EPS)).mean(axis=0)


def node_features(
    question: str, candidates: list[KnowledgeSnippet], provider, bank: KernelBank
) -> np.ndarray:
    """l x K matrix of per-candidate kernel features, rows in candidate order."""
    if not candidates:
        raise ValueError("candidates must be non-empty")
    return np.array(
        [
            kernel_features(translation_matrix(embed_pair(provider, question, c)), bank)
            for c in candidates
        ]
    )


def cross_node_attention(features: np.ndarray) -> np.ndarray:
    """Parameter-free mixing of node features by scaled dot-product weights.

    Row n of the output is sum_j alpha_nj * S_j with alpha_n = softmax over j
    of S_n . S_j / sqrt(K). A single node passes through unchanged.
    """
    k = features.shape[1]
    logits = features @ features.T / np.sqrt(k)
    logits -= logits.max(axis=1, keepdims=True)
    alpha = np.exp(logits)
    alpha /= alpha.sum(axis=1, keepdims=True)
    return alpha @ features


@dataclass(frozen=True)
class SelectorModel:
    """Frozen kernel bank plus the trainable linear readout.

    The readout has no bias: adding a constant to every candidate score
    leaves the softmax unchanged, so a bias is unidentifiable.
    """

    kernels: KernelBank
    readout_weights: np.ndarray
    attention_enabled: bool = False

    def __post_init__(self):
        weights = np.asarray(self.readout_weights, dtype=float)
        object.__setattr__(self, "readout_weights", weights)
        if weights.shape != (self.kernels.size,):
            raise ValueError(
                f"readout_weights must have length {self.kernels.size}, got shape {weights.shape}"
            )
        if not np.all(np.isfinite(weights)):
            raise ValueError("readout_weights must be finite")


@dataclass(frozen=True)
class SelectionDistribution:
    """Per-candidate selection probabilities with their pre-softmax scores."""

    probabilities: np.ndarray
    scores: np.ndarray
    candidate_refs: tuple[SnippetRef, ...] | None = None

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "scores", np.asarray(self.scores, dtype=float))
        if p.ndim != 1 or p.size < 1 or p.shape != self.scores.shape:
            raise ValueError("probabilities and scores must be equal-length vectors")
        if self.candidate_refs is not None and len(self.candidate_refs) != p.size:
            raise ValueError("candidate_refs length must match probabilities")
        if np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("probabilities must be positive and sum to 1")

    @property
    def size(self) -> int:
        return self.probabilities.size


def readout(
    features: np.ndarray,
    model: SelectorModel,
    candidate_refs: tuple[SnippetRef, ...] | None = None,
) -> SelectionDistribution:
    """Softmax over per-node readout scores, with max-subtraction for stability.

    Applies cross-node attention to the features first when the model's flag
    is set.
    """
    if model.attention_enabled:
        features = cross_node_attention(features)
    scores = features @ model.readout_weights
    shifted = scores - scores.max()
    exp = np.exp(shifted)
    return SelectionDistribution(exp / exp.sum(), scores, candidate_refs)


def selection_loss(dist: SelectionDistribution, golden_index: int) -> float:
    """Cross-entropy -log P(golden), evaluated in log-space from the scores."""
    if not 0 <= golden_index < dist.size:
        raise IndexError(f"golden_index {golden_index} out of range for {dist.size} candidates")
    shifted = dist.scores - dist.scores.max()
    log_z = dist.scores.max() + np.log(np.exp(shifted).sum())
    return float(log_z - dist.scores[golden_index])


def loss_gradient(features: np.ndarray, model: SelectorModel, golden_index: int) -> np.ndarray:
    """Gradient of the cross-entropy loss with respect to the readout weights.

    Equals sum_n (P_n - 1[n = golden]) * S_n, where S_n is the attention
    output when the flag is set (the attention itself has no parameters).
    """
    if model.attention_enabled:
        features = cross_node_attention(features)
    dist = readout(features, SelectorModel(model.kernels, model.readout_weights))
    if not 0 <= golden_index < dist.size:
        raise IndexError(f"golden_index {golden_index} out of range for {dist.size} candidates")
    residual = dist.probabilities.copy()
    residual[golden_index] -= 1.0
    return residual @ features


@dataclass(frozen=True)
class SelectionInstance:
    """One trainable dialog: candidate features plus the golden row index."""

    features: np.ndarray
    golden_index: int
    candidate_refs: tuple[SnippetRef, ...]


def selection_instances(corpus: Corpus, provider, bank: KernelBank) -> list[SelectionInstance]:
    """Features for every labeled knowledge-seeking dialog, in corpus order.

    Candidates come from the golden reference's entity; the golden index is
    its position in the entity's stored snippet order.
    """
    instances = []
    for dialog in corpus.dialogs:
        if not dialog.target or dialog.golden is None:
            continue
        golden = dialog.golden
        candidates = candidate_set(corpus, dialog, (golden.domain, golden.entity_id))
        golden_index = next(
            i for i, c in enumerate(candidates) if c.doc_id == golden.doc_id
        )
        features = node_features(dialog.current_turn.text, candidates, provider, bank)
        instances.append(
            SelectionInstance(features, golden_index, tuple(c.ref for c in candidates))
        )
    return instances


@dataclass(frozen=True)
class SelectorHyper:
    lr: float = 0.5
    epochs: int = 200
    seed: int = 42
    attention_flag: bool = False
    n_kernels: int = 11
    line_search: bool = False


def _mean_loss(instances, model: SelectorModel) -> float:
    total = 0.0
    for instance in instances:
        total += selection_loss(readout(instance.features, model), instance.golden_index)
    return total / len(instances)


def train_selector(
    corpus: Corpus, provider, hyper: SelectorHyper = SelectorHyper()
) -> tuple[SelectorModel, list[float]]:
    """Full-batch gradient descent on the readout weights from zero init.

    Returns the trained model and the mean training loss trajectory
    (epochs + 1 entries, the first at initialization). With ``line_search``
    the step is halved until the mean loss does not increase, so the
    trajectory is non-increasing; without it the fixed ``lr`` is applied.
    Deterministic for fixed inputs and hyperparameters.
    """
    bank = default_kernel_bank(hyper.n_kernels)
    instances = selection_instances(corpus, provider, bank)
    if not instances:
        raise ValueError("corpus has no labeled knowledge-seeking dialogs to train on")

    weights = np.zeros(bank.size)
    model = SelectorModel(bank, weights, hyper.attention_flag)
    losses = [_mean_loss(instances, model)]
    for _ in range(hyper.epochs):
        gradient = np.zeros(bank.size)
        for instance in instances:
            gradient += loss_gradient(instance.features, model, instance.golden_index)
        gradient /= len(instances)

        if hyper.line_search:
            step = hyper.lr
            candidate = None
            for _ in range(60):
                trial = SelectorModel(bank, weights - step * gradient, hyper.attention_flag)
                if _mean_loss(instances, trial) <= losses[-1]:
                    candidate = trial
                    break
                step /= 2
            model = candidate if candidate is not None else model
        else:
            model = SelectorModel(bank, weights - hyper.lr * gradient, hyper.attention_flag)
        weights = model.readout_weights
        losses.append(_mean_loss(instances, model))
    return model, losses


def selection_distribution(
    model: SelectorModel, provider, question: str, candidates: list[KnowledgeSnippet]
) -> SelectionDistribution:
    """End-to-end distribution over the given candidates for one question."""
    features = node_features(question, candidates, provider, model.kernels)
    return readout(features, model, tuple(c.ref for c in candidates))


def rank(
    model: SelectorModel, provider, question: str, candidates: list[KnowledgeSnippet]
) -> list[tuple[SnippetRef, float]]:
    """Candidates ordered by selection probability, ties by candidate index."""
    dist = selection_distribution(model, provider, question, candidates)
    order = sorted(range(dist.size), key=lambda i: (-dist.probabilities[i], i))
    return [(dist.candidate_refs[i], float(dist.probabilities[i])) for i in order]


def save_selector(model: SelectorModel, provider, path) -> None:
    """Write the model and its provider description as JSON with exact float round-trip."""
    payload = {
        "mus": model.kernels.mus.tolist(),
        "sigmas": model.kernels.sigmas.tolist(),
        "readout_weights": model.readout_weights.tolist(),
        "attention_flag": model.attention_enabled,
        "provider": provider.describe(),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_selector(path) -> tuple[SelectorModel, object]:
    """Read a model file written by :func:`save_selector`; returns (model, provider)."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        bank = KernelBank(np.array(payload["mus"]), np.array(payload["sigmas"]))
        model = SelectorModel(
            bank, np.array(payload["readout_weights"]), bool(payload["attention_flag"])
        )
        provider = provider_from_description(payload["provider"])
    except KeyError as exc:
        raise ValueError(f"{path}: missing field {exc.args[0]!r}") from None
    return model, provider
