"""Tokenization, deterministic token-embedding providers, and a TF-IDF ranker.

Providers stand in for a large contextual encoder: they map each token to a
fixed vector, so question and knowledge sides can be embedded independently
and compared by cosine. Two providers are available:

* :class:`HashedGaussianVectors` draws each token's vector from a generator
  keyed by (seed, token); no vocabulary file needed, stable across runs.
* :class:`FileVectors` reads pretrained vectors from a text file
  (``token v_1 ... v_d`` per line); unknown tokens embed to the zero vector.

Question/knowledge token sequences are truncated to 64 and 128 tokens.
"""

from __future__ import annotations

import hashlib
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Corpus, KnowledgeSnippet

# Sentinel emitted for text with no alphanumeric content, so every text
# embeds to at least one row.
EMPTY_TOKEN = "⟨empty⟩"

MAX_QUESTION_TOKENS = 64
MAX_KNOWLEDGE_TOKENS = 128

# Unicode alphanumeric runs, underscore excluded.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs, dropping empty pieces.

    Returns ``[EMPTY_TOKEN]`` when the text has no alphanumeric character.
    """
    tokens = _TOKEN_RE.findall(text.lower())
    return tokens if tokens else [EMPTY_TOKEN]


class HashedGaussianVectors:
    """Standard-normal token vectors keyed by (seed, token) via a stable hash.

    The full d-dimensional draw makes vector-level collisions of distinct
    tokens a probability-zero event. Deterministic across processes.
    """

    kind = "hashed-gaussian"

    def __init__(self, seed: int, dim: int):
        if dim < 2:
            raise ValueError(f"dim must be >= 2, got {dim}")
        self.seed = int(seed)
        self.dim = int(dim)
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, token: str) -> np.ndarray:
        vector = self._cache.get(token)
        if vector is None:
            key = hashlib.blake2b(
                self.seed.to_bytes(8, "big", signed=True) + token.encode("utf-8"),
                digest_size=16,
            ).digest()
            rng = np.random.default_rng(int.from_bytes(key, "big"))
            vector = rng.standard_normal(self.dim)
            vector.flags.writeable = False
            self._cache[token] = vector
        return vector

    def embed_tokens(self, tokens: list[str]) -> np.ndarray:
        return np.array([self.embed(t) for t in tokens])

    def describe(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "dim": self.dim}


class FileVectors:
    """Token vectors loaded from a text file, one ``token v_1 ... v_d`` line each.

    Out-of-vocabulary tokens embed to the zero vector, which downstream cosine
    computation treats as similarity 0 to everything.
    """

    kind = "file-vectors"

    def __init__(self, path):
        self.path = str(path)
        self._vectors: dict[str, np.ndarray] = {}
        dim = None
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                parts = line.split()
                if len(parts) < 3:
                    raise ValueError(
                        f"{path}:{lineno}: expected 'token v_1 ... v_d' with d >= 2"
                    )
                token = parts[0]
                try:
                    vector = np.array([float(x) for x in parts[1:]])
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: non-numeric vector entry") from None
                if dim is None:
                    dim = vector.size
                elif vector.size != dim:
                    raise ValueError(
                        f"{path}:{lineno}: dimension {vector.size} differs from {dim}"
                    )
                if token in self._vectors:
                    raise ValueError(f"{path}:{lineno}: duplicate token {token!r}")
                vector.flags.writeable = False
                self._vectors[token] = vector
        if dim is None:
            raise ValueError(f"{path}: no vectors found")
        self.dim = int(dim)
        self._zero = np.zeros(self.dim)
        self._zero.flags.writeable = False

    def embed(self, token: str) -> np.ndarray:
        return self._vectors.get(token, self._zero)

    def embed_tokens(self, tokens: list[str]) -> np.ndarray:
        return np.array([self.embed(t) for t in tokens])

    def describe(self) -> dict:
        return {"kind": self.kind, "path": self.path, "dim": self.dim}


def provider_from_description(description: dict):
    """Rebuild a provider from its :meth:`describe` dictionary."""
    kind = description.get("kind")
    if kind == HashedGaussianVectors.kind:
        return HashedGaussianVectors(seed=description["seed"], dim=description["dim"])
    if kind == FileVectors.kind:
        provider = FileVectors(description["path"])
        if "dim" in description and provider.dim != description["dim"]:
            raise ValueError(
                f"{description['path']}: dimension {provider.dim} "
                f"does not match recorded {description['dim']}"
            )
        return provider
    raise ValueError(f"unknown provider kind {kind!r}")


@dataclass(frozen=True)
class PairEmbedding:
    """Token-level embedding layout of one question-knowledge pair.

    ``question_vectors`` is m x d, ``knowledge_vectors`` is p x d, and
    ``cls_vector`` is the mean over all m + p token vectors (a summary slot
    kept for layout fidelity; the kernel features never consume it).
    """

    cls_vector: np.ndarray
    question_vectors: np.ndarray
    knowledge_vectors: np.ndarray

    def __post_init__(self):
        m, p, d = self.m, self.p, self.dim
        if m < 1 or p < 1 or d < 2:
            raise ValueError(f"need m >= 1, p >= 1, d >= 2, got m={m}, p={p}, d={d}")
        if m > MAX_QUESTION_TOKENS or p > MAX_KNOWLEDGE_TOKENS:
            raise ValueError(f"m <= {MAX_QUESTION_TOKENS} and p <= {MAX_KNOWLEDGE_TOKENS} required")
        if self.knowledge_vectors.shape[1] != d or self.cls_vector.shape != (d,):
            raise ValueError("question, knowledge, and cls dimensions differ")
        for a in (self.cls_vector, self.question_vectors, self.knowledge_vectors):
            if not np.all(np.isfinite(a)):
                raise ValueError("embedding entries must be finite")

    @property
    def m(self) -> int:
        return self.question_vectors.shape[0]

    @property
    def p(self) -> int:
        return self.knowledge_vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.question_vectors.shape[1]


def embed_pair(provider, question: str, knowledge: KnowledgeSnippet) -> PairEmbedding:
    """Embed a question against one snippet (title and body joined by a space)."""
    q_tokens = tokenize(question)[:MAX_QUESTION_TOKENS]
    k_tokens = tokenize(knowledge.text)[:MAX_KNOWLEDGE_TOKENS]
    question_vectors = provider.embed_tokens(q_tokens)
    knowledge_vectors = provider.embed_tokens(k_tokens)
    cls_vector = np.concatenate([question_vectors, knowledge_vectors]).mean(axis=0)
    return PairEmbedding(cls_vector, question_vectors, knowledge_vectors)


@dataclass
class Vocabulary:
    """Dense token ids and per-token document frequencies over snippet texts."""

    ids: dict[str, int] = field(default_factory=dict)
    doc_freq: dict[str, int] = field(default_factory=dict)
    n_documents: int = 0


def build_vocabulary(corpus: Corpus) -> Vocabulary:
    """Index every token of every snippet text, ids in first-appearance order."""
    vocab = Vocabulary()
    for snippets in corpus.snippets.values():
        for snippet in snippets:
            vocab.n_documents += 1
            seen_here = set()
            for token in tokenize(snippet.text):
                if token not in vocab.ids:
                    vocab.ids[token] = len(vocab.ids)
                if token not in seen_here:
                    seen_here.add(token)
                    vocab.doc_freq[token] = vocab.doc_freq.get(token, 0) + 1
    return vocab


def _tfidf_weights(tokens: list[str], vocab: Vocabulary) -> dict[str, float]:
    n = vocab.n_documents
    weights = {}
    for token, count in Counter(tokens).items():
        df = vocab.doc_freq.get(token)
        if df is None:
            continue
        weights[token] = count * (math.log((1 + n) / (1 + df)) + 1.0)
    return weights


def tfidf_rank(
    corpus: Corpus,
    question: str,
    candidates: list[KnowledgeSnippet],
    vocab: Vocabulary | None = None,
) -> list[tuple[KnowledgeSnippet, float]]:
    """Rank candidates by TF-IDF cosine against the question, descending.

    Term frequency is the raw count; idf = ln((1+N)/(1+df)) + 1 with N the
    corpus snippet count. Question tokens outside the snippet vocabulary are
    dropped. Ties keep candidate-index order. Scores lie in [0, 1].
    """
    if not candidates:
        raise ValueError("candidates must be non-empty")
    if vocab is None:
        vocab = build_vocabulary(corpus)
    q_weights = _tfidf_weights(tokenize(question), vocab)
    q_norm = math.sqrt(sum(w * w for w in q_weights.values()))

    scored = []
    for snippet in candidates:
        c_weights = _tfidf_weights(tokenize(snippet.text), vocab)
        c_norm = math.sqrt(sum(w * w for w in c_weights.values()))
        if q_norm < 1e-12 or c_norm < 1e-12:
            score = 0.0
        else:
            dot = sum(w * c_weights[t] for t, w in q_weights.items() if t in c_weights)
            score = min(max(dot / (q_norm * c_norm), 0.0), 1.0)
        scored.append((snippet, score))
    scored.sort(key=lambda pair: -pair[1])
    return scored
