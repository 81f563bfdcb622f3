"""SensEval-2/3 lexical-sample corpora: parsing, preprocessing, statistics.

Both releases share one layout: a ``<corpus>`` of ``<lexelt>`` elements, each
holding ``<instance>`` elements whose ``<context>`` marks the target word with
a ``<head>`` tag.  Gold senses come from inline ``<answer>`` elements (train
releases) and/or a separate key file with ``lexelt instance-id sense-key
[sense-key ...]`` lines.  Sense keys stay opaque strings throughout; nothing
here consults WordNet.

Tokenization is the corpus's own whitespace tokenization.  Satellite marks
(``<sat>``) and any other inline markup are flattened to plain tokens; only
the first ``<head>`` of an instance is the target.
"""

from __future__ import annotations

import json
import re
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum

from .errors import ConsistencyError, CorpusParseError


class Pos(Enum):
    NOUN = "n"
    VERB = "v"
    ADJECTIVE = "a"

    @property
    def label(self) -> str:
        return {Pos.NOUN: "noun", Pos.VERB: "verb", Pos.ADJECTIVE: "adjective"}[self]


#: Reporting order used by tables (nouns, verbs, adjectives).
POS_ORDER = (Pos.NOUN, Pos.VERB, Pos.ADJECTIVE)

_POS_SUFFIXES = {
    "n": Pos.NOUN,
    "v": Pos.VERB,
    "a": Pos.ADJECTIVE,
    "adj": Pos.ADJECTIVE,
}


class Split(Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass(frozen=True)
class Lexelt:
    """One ambiguous word type: a lemma plus its part of speech."""

    lemma: str
    pos: Pos

    @classmethod
    def from_item(cls, item: str) -> "Lexelt":
        """Build from a lexelt item string such as ``"bank.n"``."""
        lemma, _, suffix = item.rpartition(".")
        if not lemma or suffix.lower() not in _POS_SUFFIXES:
            raise CorpusParseError(
                f"cannot derive part of speech from lexelt item {item!r}"
            )
        return cls(lemma=lemma.lower(), pos=_POS_SUFFIXES[suffix.lower()])

    @property
    def key(self) -> str:
        return f"{self.lemma}.{self.pos.value}"

    def sort_key(self) -> tuple[str, str]:
        return (self.lemma, self.pos.value)


@dataclass(frozen=True)
class Instance:
    """One annotated occurrence of an ambiguous word."""

    id: str
    lexelt: Lexelt
    tokens: tuple[str, ...]
    head_span: tuple[int, int]  # inclusive token index range of the target
    head_lemma: str
    gold_senses: frozenset[str]
    split: Split

    def __post_init__(self) -> None:
        lo, hi = self.head_span
        if not (0 <= lo <= hi < len(self.tokens)):
            raise ConsistencyError(
                f"instance {self.id!r}: head span {self.head_span} outside "
                f"{len(self.tokens)} tokens"
            )


@dataclass(frozen=True)
class Corpus:
    instances: tuple[Instance, ...]
    lexelts: frozenset[Lexelt]
    split: Split

    def by_id(self) -> dict[str, Instance]:
        return {inst.id: inst for inst in self.instances}

    def for_lexelt(self, lexelt: Lexelt) -> list[Instance]:
        return [inst for inst in self.instances if inst.lexelt == lexelt]


@dataclass(frozen=True)
class StatsReport:
    sentence_count: int
    avg_sentence_length: int
    distinct_sense_ids: int
    sense_embedding_count: int  # annotated (head, sense) pairs
    distinct_words: int
    noun_count: int
    adjective_count: int
    verb_count: int


# --------------------------------------------------------------------------
# XML / key parsing


_XML_DECL = re.compile(r"^\s*<\?xml[^>]*\?>")
_ENCODING_DECL = re.compile(rb"<\?xml[^>]*encoding=[\"']([A-Za-z0-9._-]+)[\"']")
# Bare ampersands are common in the raw SensEval files; escape anything that
# is not already a character or entity reference.
_BARE_AMP = re.compile(r"&(?!(?:amp|lt|gt|quot|apos|#[0-9]{1,7}|#x[0-9a-fA-F]{1,6});)")
_BAD_CTRL = re.compile("[\x00-\x08\x0b\x0c\x0e-\x1f]")


def _decode(data: bytes) -> str:
    match = _ENCODING_DECL.search(data[:200])
    if match:
        try:
            return data.decode(match.group(1).decode("ascii"))
        except (LookupError, UnicodeDecodeError):
            pass
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError:
        return data.decode("latin-1")


def _sanitize(text: str) -> str:
    text = _XML_DECL.sub("", text, count=1)
    text = _BARE_AMP.sub("&amp;", text)
    return _BAD_CTRL.sub(" ", text)


def _parse_xml_root(xml_bytes: bytes) -> ET.Element:
    text = _sanitize(_decode(xml_bytes))
    try:
        return ET.fromstring(text)
    except ET.ParseError as exc:
        line, column = exc.position
        raise CorpusParseError(
            f"malformed XML at line {line}, column {column}: {exc}"
        ) from exc


def parse_key_file(key_bytes: bytes) -> dict[str, set[str]]:
    """Parse an answer key into ``instance id -> sense keys``.

    Lines are ``lexelt instance-id sense-key [sense-key ...]``; repeated ids
    accumulate.
    """
    try:
        text = key_bytes.decode("utf-8")
    except UnicodeDecodeError:
        text = key_bytes.decode("latin-1")
    mapping: dict[str, set[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 3:
            raise CorpusParseError(
                f"key line {lineno}: expected 'lexelt instance-id sense-key"
                f" [sense-key ...]', got {raw!r}"
            )
        mapping.setdefault(parts[1], set()).update(parts[2:])
    return mapping


def _context_tokens(
    context: ET.Element, instance_id: str
) -> tuple[list[str], tuple[int, int]]:
    tokens: list[str] = []
    head_span: tuple[int, int] | None = None

    if context.text:
        tokens.extend(context.text.split())
    for child in context:
        inner = "".join(child.itertext())
        if child.tag == "head" and head_span is None:
            start = len(tokens)
            tokens.extend(inner.split())
            if len(tokens) == start:
                raise CorpusParseError(
                    f"instance {instance_id!r}: empty head element"
                )
            head_span = (start, len(tokens) - 1)
        else:
            # Satellites, extra heads, and other inline markup: plain words.
            tokens.extend(inner.split())
        if child.tail:
            tokens.extend(child.tail.split())

    if head_span is None:
        raise CorpusParseError(f"instance {instance_id!r}: no head tag in context")
    return tokens, head_span


def parse_lexical_sample(
    xml_bytes: bytes,
    key_bytes: bytes | None = None,
    split: Split = Split.TRAIN,
) -> Corpus:
    """Parse lexical-sample XML (plus an optional key file) into a Corpus.

    Gold senses are the union of inline ``<answer>`` sense ids and the key
    file's entries.  A key id absent from the XML is a consistency error, as
    is a Train instance that ends up with no gold sense at all.
    """
    root = _parse_xml_root(xml_bytes)
    key = parse_key_file(key_bytes) if key_bytes else {}

    instances: list[Instance] = []
    lexelts: set[Lexelt] = set()
    seen_ids: set[str] = set()

    for lexelt_el in root.iter("lexelt"):
        item = lexelt_el.get("item")
        if not item:
            raise CorpusParseError("lexelt element without an item attribute")
        lexelt = Lexelt.from_item(item)
        lexelts.add(lexelt)
        for inst_el in lexelt_el.iter("instance"):
            inst_id = inst_el.get("id")
            if not inst_id:
                raise CorpusParseError(
                    f"instance without an id attribute under lexelt {item!r}"
                )
            if inst_id in seen_ids:
                raise ConsistencyError(f"duplicate instance id {inst_id!r}")
            seen_ids.add(inst_id)

            context = inst_el.find("context")
            if context is None:
                raise CorpusParseError(f"instance {inst_id!r}: no context element")
            tokens, head_span = _context_tokens(context, inst_id)

            gold = {
                answer.get("senseid")
                for answer in inst_el.findall("answer")
                if answer.get("senseid")
            }
            gold.update(key.get(inst_id, ()))

            instances.append(
                Instance(
                    id=inst_id,
                    lexelt=lexelt,
                    tokens=tuple(tokens),
                    head_span=head_span,
                    head_lemma=lexelt.lemma,
                    gold_senses=frozenset(gold),
                    split=split,
                )
            )

    if not instances:
        raise CorpusParseError("no instance elements found")

    orphaned = sorted(set(key) - seen_ids)
    if orphaned:
        raise ConsistencyError(
            f"key file names {len(orphaned)} instance id(s) absent from the "
            f"XML, first: {orphaned[0]!r}"
        )
    if split is Split.TRAIN:
        for inst in instances:
            if not inst.gold_senses:
                raise ConsistencyError(
                    f"train instance {inst.id!r} has no gold sense"
                )

    return Corpus(tuple(instances), frozenset(lexelts), split)


# --------------------------------------------------------------------------
# Preprocessing


def preprocess_instance(inst: Instance) -> tuple[list[str], tuple[int, int]]:
    """Replace the head tokens by the head lemma, keep every other surface form.

    Returns the new token list and the head span within it (a multi-token
    head collapses to the single lemma token).
    """
    lo, hi = inst.head_span
    tokens = list(inst.tokens[:lo]) + [inst.head_lemma] + list(inst.tokens[hi + 1 :])
    return tokens, (lo, lo)


# --------------------------------------------------------------------------
# Statistics


def _round_half_up(numerator: int, denominator: int) -> int:
    if denominator == 0:
        return 0
    value = Decimal(numerator) / Decimal(denominator)
    return int(value.quantize(Decimal("1"), rounding=ROUND_HALF_UP))


def corpus_stats(corpus: Corpus) -> StatsReport:
    """Dataset overview counts; one sentence per instance context."""
    total_tokens = sum(len(inst.tokens) for inst in corpus.instances)
    senses: set[str] = set()
    pos_counts: Counter[Pos] = Counter()
    annotations = 0
    for inst in corpus.instances:
        senses.update(inst.gold_senses)
        annotations += len(inst.gold_senses)
        pos_counts[inst.lexelt.pos] += len(inst.gold_senses)

    return StatsReport(
        sentence_count=len(corpus.instances),
        avg_sentence_length=_round_half_up(total_tokens, len(corpus.instances)),
        distinct_sense_ids=len(senses),
        sense_embedding_count=annotations,
        distinct_words=len({lexelt.lemma for lexelt in corpus.lexelts}),
        noun_count=pos_counts[Pos.NOUN],
        adjective_count=pos_counts[Pos.ADJECTIVE],
        verb_count=pos_counts[Pos.VERB],
    )


_STATS_COLUMNS = [
    ("sentences", "sentence_count"),
    ("avg_len", "avg_sentence_length"),
    ("senses", "distinct_sense_ids"),
    ("sense_embeddings", "sense_embedding_count"),
    ("distinct_words", "distinct_words"),
    ("nouns", "noun_count"),
    ("adjectives", "adjective_count"),
    ("verbs", "verb_count"),
]


def stats_to_dict(report: StatsReport) -> dict[str, int]:
    return {name: getattr(report, attr) for name, attr in _STATS_COLUMNS}


def stats_table(rows: list[tuple[str, StatsReport]]) -> str:
    """Aligned text table with one row per dataset."""
    headers = ["dataset"] + [name for name, _ in _STATS_COLUMNS]
    body = [
        [label] + [str(getattr(report, attr)) for _, attr in _STATS_COLUMNS]
        for label, report in rows
    ]
    widths = [
        max(len(headers[i]), *(len(row[i]) for row in body)) if body else len(headers[i])
        for i in range(len(headers))
    ]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
    for row in body:
        lines.append("  ".join(cell.rjust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Most frequent sense


def sense_frequencies(corpus: Corpus) -> dict[Lexelt, Counter]:
    """Per-lexelt counts of gold annotations (one per instance-sense pair)."""
    freqs: dict[Lexelt, Counter] = {}
    for inst in corpus.instances:
        counter = freqs.setdefault(inst.lexelt, Counter())
        for sense in inst.gold_senses:
            counter[sense] += 1
    return freqs


def most_frequent(counter: Counter) -> str:
    """Highest-count sense; ties go to the lexicographically smallest key."""
    return min(counter.items(), key=lambda kv: (-kv[1], kv[0]))[0]


def mfs_table(train: Corpus) -> dict[Lexelt, str]:
    """Most frequent training sense per lexelt (absent if never annotated)."""
    if train.split is not Split.TRAIN:
        raise ConsistencyError("mfs_table expects the train split")
    return {
        lexelt: most_frequent(counter)
        for lexelt, counter in sense_frequencies(train).items()
        if counter
    }


# --------------------------------------------------------------------------
# Canonical serialization (round-trip safe)


def corpus_to_json(corpus: Corpus) -> str:
    payload = {
        "split": corpus.split.value,
        "lexelts": sorted(lexelt.key for lexelt in corpus.lexelts),
        "instances": [
            {
                "id": inst.id,
                "lexelt": inst.lexelt.key,
                "tokens": list(inst.tokens),
                "head_span": list(inst.head_span),
                "head_lemma": inst.head_lemma,
                "gold_senses": sorted(inst.gold_senses),
            }
            for inst in corpus.instances
        ],
    }
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2)


def corpus_from_json(text: str) -> Corpus:
    payload = json.loads(text)
    split = Split(payload["split"])
    instances = tuple(
        Instance(
            id=entry["id"],
            lexelt=Lexelt.from_item(entry["lexelt"]),
            tokens=tuple(entry["tokens"]),
            head_span=(entry["head_span"][0], entry["head_span"][1]),
            head_lemma=entry["head_lemma"],
            gold_senses=frozenset(entry["gold_senses"]),
            split=split,
        )
        for entry in payload["instances"]
    )
    lexelts = frozenset(Lexelt.from_item(item) for item in payload["lexelts"])
    return Corpus(instances, lexelts, split)
