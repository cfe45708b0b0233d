"""DSTC-style corpus loading, validation, and synthesis.

A corpus pairs a knowledge base of FAQ-style snippets (domain -> entity ->
documents, each a question-form title plus an answer body) with dialog logs
and optional per-dialog labels. All three files are UTF-8 JSON:

* knowledge: ``{domain: {entity_id: {"name": ..., "docs": {doc_id:
  {"title": ..., "body": ...}}}}}``
* logs: array of dialogs, each an array of ``{"speaker": "U" | "S",
  "text": ...}``
* labels: array aligned by index with logs, each
  ``{"target": bool, "knowledge": [{"domain", "entity_id", "doc_id"}],
  "response": ...}``

Dialog ids are positional (``d0000``, ``d0001``, ...) and are regenerated on
load. Loaded corpora are immutable by convention and safe for concurrent
reads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import NamedTuple

import numpy as np

# Token that marks a synthetic dialog as chit-chat (not knowledge-seeking).
MARKER_TOKEN = "chitchat"

OVERLAP_MODES = ("token-overlap", "paraphrase")


class CorpusError(ValueError):
    """Raised for malformed corpus files or unresolvable references."""


class Speaker(Enum):
    USER = "U"
    SYS = "S"


class SnippetRef(NamedTuple):
    """Identity of one knowledge snippet."""

    domain: str
    entity_id: str
    doc_id: str


@dataclass(frozen=True)
class KnowledgeSnippet:
    """One external knowledge document: a question-form title and an answer body."""

    domain: str
    entity_id: str
    doc_id: str
    title: str
    body: str

    @property
    def ref(self) -> SnippetRef:
        return SnippetRef(self.domain, self.entity_id, self.doc_id)

    @property
    def text(self) -> str:
        """Title and body joined by a single space."""
        return self.title + " " + self.body


@dataclass(frozen=True)
class DialogTurn:
    speaker: Speaker
    text: str


@dataclass(frozen=True)
class DialogInstance:
    """One dialog with its optional gold annotation.

    The final turn is always a user turn (the turn under detection), and
    ``golden`` is set exactly when ``target`` is true in labeled corpora.
    """

    id: str
    turns: tuple[DialogTurn, ...]
    target: bool = False
    golden: SnippetRef | None = None
    response: str | None = None

    @property
    def current_turn(self) -> DialogTurn:
        return self.turns[-1]


@dataclass
class Corpus:
    """Knowledge snippets plus dialogs; immutable after construction.

    ``snippets`` maps ``(domain, entity_id)`` to that entity's documents in
    file order; this stored order is the candidate order everywhere
    downstream.
    """

    snippets: dict[tuple[str, str], list[KnowledgeSnippet]]
    dialogs: list[DialogInstance]
    entity_names: dict[tuple[str, str], str] = field(default_factory=dict)

    def find_snippet(self, ref: SnippetRef) -> KnowledgeSnippet | None:
        for snippet in self.snippets.get((ref.domain, ref.entity_id), []):
            if snippet.doc_id == ref.doc_id:
                return snippet
        return None

    @property
    def n_snippets(self) -> int:
        return sum(len(docs) for docs in self.snippets.values())


def _dialog_id(index: int) -> str:
    return f"d{index:04d}"


def _duplicate_rejecting_pairs(pairs):
    obj = {}
    for key, value in pairs:
        if key in obj:
            raise CorpusError(f"duplicate key {key!r}")
        obj[key] = value
    return obj


def _read_json(path, reject_duplicate_keys: bool = False):
    text = Path(path).read_text(encoding="utf-8")
    hook = _duplicate_rejecting_pairs if reject_duplicate_keys else None
    try:
        return json.loads(text, object_pairs_hook=hook)
    except json.JSONDecodeError as exc:
        raise CorpusError(
            f"{path}: parse error at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None
    except CorpusError as exc:
        raise CorpusError(f"{path}: {exc}") from None


def load_knowledge(
    knowledge_path,
) -> tuple[dict[tuple[str, str], list[KnowledgeSnippet]], dict[tuple[str, str], str]]:
    """Parse a knowledge file into snippet lists keyed by (domain, entity_id).

    Rejects duplicate keys, empty titles, and entities without documents.
    Returns the snippet map and the entity display names.
    """
    raw = _read_json(knowledge_path, reject_duplicate_keys=True)
    if not isinstance(raw, dict):
        raise CorpusError(f"{knowledge_path}: expected a domain -> entities object")
    snippets: dict[tuple[str, str], list[KnowledgeSnippet]] = {}
    names: dict[tuple[str, str], str] = {}
    for domain, entities in raw.items():
        if not isinstance(entities, dict):
            raise CorpusError(f"{knowledge_path}: domain {domain!r}: expected an object")
        for entity_id, entity in entities.items():
            if not isinstance(entity, dict) or "docs" not in entity:
                raise CorpusError(
                    f"{knowledge_path}: entity ({domain!r}, {entity_id!r}): missing 'docs'"
                )
            docs = entity["docs"]
            if not isinstance(docs, dict) or not docs:
                raise CorpusError(
                    f"{knowledge_path}: entity ({domain!r}, {entity_id!r}): 'docs' must be a non-empty object"
                )
            key = (str(domain), str(entity_id))
            names[key] = str(entity.get("name", ""))
            listed = []
            for doc_id, doc in docs.items():
                if not isinstance(doc, dict) or not isinstance(doc.get("title"), str):
                    raise CorpusError(
                        f"{knowledge_path}: doc ({domain!r}, {entity_id!r}, {doc_id!r}): missing string 'title'"
                    )
                title = doc["title"]
                if not title:
                    raise CorpusError(
                        f"{knowledge_path}: doc ({domain!r}, {entity_id!r}, {doc_id!r}): title is empty"
                    )
                body = doc.get("body", "")
                if not isinstance(body, str):
                    raise CorpusError(
                        f"{knowledge_path}: doc ({domain!r}, {entity_id!r}, {doc_id!r}): 'body' must be a string"
                    )
                listed.append(KnowledgeSnippet(key[0], key[1], str(doc_id), title, body))
            snippets[key] = listed
    return snippets, names


def _parse_turns(logs_path, index: int, raw_dialog) -> tuple[DialogTurn, ...]:
    dialog_id = _dialog_id(index)
    if not isinstance(raw_dialog, list) or not raw_dialog:
        raise CorpusError(f"{logs_path}: dialog {dialog_id}: expected a non-empty turn array")
    turns = []
    for turn_no, raw_turn in enumerate(raw_dialog):
        if not isinstance(raw_turn, dict):
            raise CorpusError(f"{logs_path}: dialog {dialog_id} turn {turn_no}: expected an object")
        speaker_code = raw_turn.get("speaker")
        try:
            speaker = Speaker(speaker_code)
        except ValueError:
            raise CorpusError(
                f"{logs_path}: dialog {dialog_id} turn {turn_no}: speaker must be 'U' or 'S', got {speaker_code!r}"
            ) from None
        text = raw_turn.get("text")
        if not isinstance(text, str) or not text.strip():
            raise CorpusError(
                f"{logs_path}: dialog {dialog_id} turn {turn_no}: text must be a non-empty string"
            )
        turns.append(DialogTurn(speaker, text))
    if turns[-1].speaker is not Speaker.USER:
        raise CorpusError(f"{logs_path}: dialog {dialog_id}: last turn must be a user turn")
    return tuple(turns)


def _parse_label(labels_path, index: int, raw_label) -> tuple[bool, SnippetRef | None, str | None]:
    dialog_id = _dialog_id(index)
    if not isinstance(raw_label, dict) or not isinstance(raw_label.get("target"), bool):
        raise CorpusError(f"{labels_path}: dialog {dialog_id}: label must carry a boolean 'target'")
    target = raw_label["target"]
    knowledge = raw_label.get("knowledge") or []
    if not target:
        if knowledge:
            raise CorpusError(
                f"{labels_path}: dialog {dialog_id}: non-target label must not carry knowledge"
            )
        return False, None, None
    if len(knowledge) != 1:
        raise CorpusError(
            f"{labels_path}: dialog {dialog_id}: expected exactly one golden knowledge reference, got {len(knowledge)}"
        )
    entry = knowledge[0]
    if not isinstance(entry, dict):
        raise CorpusError(f"{labels_path}: dialog {dialog_id}: knowledge entry must be an object")
    try:
        ref = SnippetRef(str(entry["domain"]), str(entry["entity_id"]), str(entry["doc_id"]))
    except KeyError as exc:
        raise CorpusError(
            f"{labels_path}: dialog {dialog_id}: knowledge entry missing {exc.args[0]!r}"
        ) from None
    response = raw_label.get("response")
    if response is not None and not isinstance(response, str):
        raise CorpusError(f"{labels_path}: dialog {dialog_id}: 'response' must be a string")
    return True, ref, response


def load_corpus(knowledge_path, logs_path, labels_path=None) -> Corpus:
    """Load and validate a corpus from its knowledge, logs, and labels files.

    Without a labels file every dialog is unlabeled (``target`` false, no
    golden reference). Raises :class:`CorpusError` on parse errors (with
    line/column), duplicate snippet keys, malformed turns or labels, and
    golden references that do not resolve in the knowledge base.
    """
    snippets, names = load_knowledge(knowledge_path)
    raw_logs = _read_json(logs_path)
    if not isinstance(raw_logs, list):
        raise CorpusError(f"{logs_path}: expected an array of dialogs")

    raw_labels = None
    if labels_path is not None:
        raw_labels = _read_json(labels_path)
        if not isinstance(raw_labels, list):
            raise CorpusError(f"{labels_path}: expected an array of labels")
        if len(raw_labels) != len(raw_logs):
            raise CorpusError(
                f"{labels_path}: {len(raw_labels)} labels for {len(raw_logs)} dialogs"
            )

    corpus = Corpus(snippets, [], names)
    for index, raw_dialog in enumerate(raw_logs):
        turns = _parse_turns(logs_path, index, raw_dialog)
        target, golden, response = (False, None, None)
        if raw_labels is not None:
            target, golden, response = _parse_label(labels_path, index, raw_labels[index])
            if golden is not None and corpus.find_snippet(golden) is None:
                raise CorpusError(
                    f"{labels_path}: dialog {_dialog_id(index)}: golden reference "
                    f"({golden.domain!r}, {golden.entity_id!r}, {golden.doc_id!r}) not in knowledge base"
                )
        corpus.dialogs.append(DialogInstance(_dialog_id(index), turns, target, golden, response))
    return corpus


def candidate_set(
    corpus: Corpus, dialog: DialogInstance | None, entity: tuple[str, str]
) -> list[KnowledgeSnippet]:
    """The entity's snippets in stored order; the candidate set for selection.

    Raises :class:`CorpusError` for an unknown entity.
    """
    key = (entity[0], entity[1])
    try:
        return list(corpus.snippets[key])
    except KeyError:
        raise CorpusError(f"unknown entity ({key[0]!r}, {key[1]!r})") from None


def _write_json(payload, path) -> None:
    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )


def write_corpus(corpus: Corpus, knowledge_path, logs_path, labels_path=None) -> None:
    """Write a corpus back to the three-file layout read by :func:`load_corpus`.

    Stored snippet and dialog order is preserved, so write followed by load
    reproduces an equal corpus (dialog ids are positional on both sides).
    """
    knowledge: dict[str, dict] = {}
    for (domain, entity_id), docs in corpus.snippets.items():
        knowledge.setdefault(domain, {})[entity_id] = {
            "name": corpus.entity_names.get((domain, entity_id), ""),
            "docs": {s.doc_id: {"title": s.title, "body": s.body} for s in docs},
        }
    _write_json(knowledge, knowledge_path)

    logs = [
        [{"speaker": turn.speaker.value, "text": turn.text} for turn in dialog.turns]
        for dialog in corpus.dialogs
    ]
    _write_json(logs, logs_path)

    if labels_path is None:
        return
    labels = []
    for dialog in corpus.dialogs:
        entry: dict = {"target": dialog.target}
        if dialog.target and dialog.golden is not None:
            entry["knowledge"] = [dialog.golden._asdict()]
            if dialog.response is not None:
                entry["response"] = dialog.response
        labels.append(entry)
    _write_json(labels, labels_path)


@dataclass(frozen=True)
class SynthParams:
    """Parameters of the synthetic corpus generator.

    ``detect_marker_rate`` is the fraction of dialogs generated as chit-chat
    (marked with :data:`MARKER_TOKEN` and not knowledge-seeking).
    """

    n_dialogs: int = 200
    n_candidates: int = 8
    vocab_size: int = 64
    overlap_mode: str = "token-overlap"
    detect_marker_rate: float = 0.5

    def __post_init__(self):
        if self.n_dialogs < 1:
            raise ValueError(f"n_dialogs must be >= 1, got {self.n_dialogs}")
        if self.n_candidates < 2:
            raise ValueError(f"n_candidates must be >= 2, got {self.n_candidates}")
        if self.vocab_size < 4 * self.n_candidates:
            raise ValueError(
                f"vocab_size must be >= 4 * n_candidates = {4 * self.n_candidates}, got {self.vocab_size}"
            )
        if self.overlap_mode not in OVERLAP_MODES:
            raise ValueError(f"overlap_mode must be one of {OVERLAP_MODES}, got {self.overlap_mode!r}")
        if not 0.0 <= self.detect_marker_rate <= 1.0:
            raise ValueError(f"detect_marker_rate must be in [0, 1], got {self.detect_marker_rate}")


def synonym_token(token: str) -> str:
    """Paraphrase-mode surface form of a synthetic vocabulary token."""
    return "y" + token[1:]


def synth_corpus(seed: int, params: SynthParams) -> Corpus:
    """Generate a deterministic synthetic corpus for selection and detection runs.

    Every dialog owns one entity with ``n_candidates`` documents whose content
    tokens are mutually disjoint. Knowledge-seeking dialogs end in a question
    sharing at least two of the golden document's tokens (their synonym-mapped
    forms in paraphrase mode); filler question tokens are drawn outside the
    candidate pools, so distractors share no token with the question. Chit-chat
    dialogs carry the marker token instead and get no golden label.
    """
    rng = np.random.default_rng(seed)
    width = max(2, len(str(params.vocab_size - 1)))
    vocab = [f"w{j:0{width}d}" for j in range(params.vocab_size)]

    n_marker = round(params.n_dialogs * params.detect_marker_rate)
    is_target = np.array([False] * n_marker + [True] * (params.n_dialogs - n_marker))
    rng.shuffle(is_target)

    snippets: dict[tuple[str, str], list[KnowledgeSnippet]] = {}
    names: dict[tuple[str, str], str] = {}
    dialogs: list[DialogInstance] = []
    for i in range(params.n_dialogs):
        domain, entity_id = "synth", f"e{i:04d}"
        perm = rng.permutation(params.vocab_size)
        candidate_tokens = [
            [vocab[int(j)] for j in perm[4 * c : 4 * c + 4]] for c in range(params.n_candidates)
        ]
        snippets[(domain, entity_id)] = [
            KnowledgeSnippet(
                domain, entity_id, str(c), " ".join(toks[:2]) + "?", " ".join(toks[2:]) + "."
            )
            for c, toks in enumerate(candidate_tokens)
        ]
        names[(domain, entity_id)] = f"synthetic entity {i}"
        filler_pool = [vocab[int(j)] for j in perm[4 * params.n_candidates :]]

        turns: list[DialogTurn] = []
        if rng.random() < 0.5:
            turns.append(DialogTurn(Speaker.USER, "hello there"))
            turns.append(DialogTurn(Speaker.SYS, "how can i help"))

        if is_target[i]:
            golden_idx = int(rng.integers(params.n_candidates))
            n_golden_tokens = int(rng.integers(2, 4))
            picked = [
                candidate_tokens[golden_idx][int(j)]
                for j in rng.choice(4, size=n_golden_tokens, replace=False)
            ]
            if params.overlap_mode == "paraphrase":
                picked = [synonym_token(t) for t in picked]
            n_filler = min(int(rng.integers(0, 3)), len(filler_pool))
            filler = (
                [filler_pool[int(j)] for j in rng.choice(len(filler_pool), size=n_filler, replace=False)]
                if n_filler
                else []
            )
            question_tokens = picked + filler
            order = rng.permutation(len(question_tokens))
            question = " ".join(question_tokens[int(j)] for j in order) + "?"
            turns.append(DialogTurn(Speaker.USER, question))
            dialogs.append(
                DialogInstance(
                    _dialog_id(i),
                    tuple(turns),
                    target=True,
                    golden=SnippetRef(domain, entity_id, str(golden_idx)),
                    response="yes " + " ".join(candidate_tokens[golden_idx][2:]) + ".",
                )
            )
        else:
            n_extra = int(rng.integers(1, 4))
            extra = [vocab[int(j)] for j in rng.choice(params.vocab_size, size=n_extra, replace=False)]
            turns.append(DialogTurn(Speaker.USER, " ".join([MARKER_TOKEN] + extra)))
            dialogs.append(DialogInstance(_dialog_id(i), tuple(turns)))
    return Corpus(snippets, dialogs, names)
