"""Cosine-kNN classification over per-lexelt exemplar indexes.

Neighbors are restricted to exemplars of the same lexelt.  Search is an
exact full scan (per-lexelt exemplar counts are small) with similarities
accumulated in float64 over the float32 stored components.  All tie
handling is deterministic:

* neighbor ranking: descending similarity, stable in exemplar insertion
  order (train corpus order, senses sorted within an instance);
* vote ties: larger similarity sum, then higher training frequency, then
  lexicographically smaller sense key.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .corpus import Instance, Lexelt, Pos, Split, most_frequent
from .errors import ClassifierError, ConsistencyError, ZeroNormError


def cosine(a, b) -> float:
    """Cosine similarity in float64, clamped to [-1, 1]."""
    va = np.asarray(a, dtype=np.float64).reshape(-1)
    vb = np.asarray(b, dtype=np.float64).reshape(-1)
    if va.shape != vb.shape:
        raise ConsistencyError(
            f"cosine: length mismatch {va.shape[0]} vs {vb.shape[0]}"
        )
    na = np.linalg.norm(va)
    nb = np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise ZeroNormError("cosine undefined for a zero-norm vector")
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))


class PredictionSource(Enum):
    KNN = "knn"
    MFS_FALLBACK = "mfs_fallback"


@dataclass(frozen=True)
class VoteEntry:
    sense: str
    votes: int
    similarity_sum: float


@dataclass(frozen=True)
class Prediction:
    instance_id: str
    predicted: str
    tally: tuple[VoteEntry, ...]
    source: PredictionSource


@dataclass
class _LexeltBlock:
    matrix: np.ndarray  # (n, dim) float32
    norms: np.ndarray  # (n,) float64
    senses: list[str]
    instance_ids: list[str]


@dataclass
class ExemplarIndex:
    dim: int
    blocks: dict[Lexelt, _LexeltBlock]
    sense_freq: dict[Lexelt, Counter]
    mfs: dict[Lexelt, str]
    pos_mfs: dict[Pos, str]

    def exemplar_count(self, lexelt: Lexelt | None = None) -> int:
        if lexelt is not None:
            block = self.blocks.get(lexelt)
            return 0 if block is None else block.matrix.shape[0]
        return sum(block.matrix.shape[0] for block in self.blocks.values())


def build_index(pairs) -> ExemplarIndex:
    """Index (train instance, vector) pairs.

    An instance with several gold senses contributes one exemplar per sense,
    all sharing the vector.
    """
    per_lexelt: dict[Lexelt, list[tuple[np.ndarray, str, str]]] = {}
    sense_freq: dict[Lexelt, Counter] = {}
    pos_freq: dict[Pos, Counter] = {}
    dim: int | None = None

    for inst, vector in pairs:
        if inst.split is not Split.TRAIN:
            raise ConsistencyError(f"instance {inst.id!r} is not from the train split")
        if not inst.gold_senses:
            raise ConsistencyError(f"train instance {inst.id!r} has no gold sense")
        vec = np.asarray(vector, dtype=np.float32).reshape(-1)
        if dim is None:
            dim = vec.shape[0]
        elif vec.shape[0] != dim:
            raise ConsistencyError(
                f"instance {inst.id!r}: vector dim {vec.shape[0]} != index dim {dim}"
            )
        if not float(np.linalg.norm(vec.astype(np.float64))):
            raise ConsistencyError(f"instance {inst.id!r}: zero-norm vector rejected")
        bucket = per_lexelt.setdefault(inst.lexelt, [])
        freq = sense_freq.setdefault(inst.lexelt, Counter())
        posc = pos_freq.setdefault(inst.lexelt.pos, Counter())
        for sense in sorted(inst.gold_senses):
            bucket.append((vec, sense, inst.id))
            freq[sense] += 1
            posc[sense] += 1

    blocks = {}
    for lexelt, exemplars in per_lexelt.items():
        matrix = np.stack([vec for vec, _, _ in exemplars]).astype(np.float32)
        norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
        blocks[lexelt] = _LexeltBlock(
            matrix=matrix,
            norms=norms,
            senses=[sense for _, sense, _ in exemplars],
            instance_ids=[iid for _, _, iid in exemplars],
        )

    return ExemplarIndex(
        dim=0 if dim is None else dim,
        blocks=blocks,
        sense_freq=sense_freq,
        mfs={lexelt: most_frequent(c) for lexelt, c in sense_freq.items() if c},
        pos_mfs={pos: most_frequent(c) for pos, c in pos_freq.items() if c},
    )


def _rank_tally(
    top_senses: list[str],
    top_sims: list[float],
    freq: Counter,
) -> tuple[VoteEntry, ...]:
    votes: dict[str, int] = {}
    sims: dict[str, float] = {}
    for sense, sim in zip(top_senses, top_sims):
        votes[sense] = votes.get(sense, 0) + 1
        sims[sense] = sims.get(sense, 0.0) + sim
    order = sorted(
        votes,
        key=lambda s: (-votes[s], -sims[s], -freq.get(s, 0), s),
    )
    return tuple(VoteEntry(s, votes[s], sims[s]) for s in order)


def classify(
    index: ExemplarIndex,
    lexelt: Lexelt,
    query,
    k: int,
    instance_id: str = "",
) -> Prediction:
    """Exact cosine-kNN majority vote for one query vector."""
    if k < 1:
        raise ClassifierError(f"k must be >= 1, got {k}")
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if index.dim and q.shape[0] != index.dim:
        raise ConsistencyError(
            f"query dim {q.shape[0]} does not match index dim {index.dim}"
        )
    qnorm = np.linalg.norm(q)
    if qnorm == 0.0:
        raise ZeroNormError(f"query for {instance_id or lexelt.key!r} has zero norm")

    block = index.blocks.get(lexelt)
    if block is None or block.matrix.shape[0] == 0:
        fallback = index.pos_mfs.get(lexelt.pos)
        if fallback is None:
            raise ClassifierError(
                f"no exemplars for {lexelt.key!r} and no {lexelt.pos.label} "
                "fallback sense"
            )
        return Prediction(instance_id, fallback, (), PredictionSource.MFS_FALLBACK)

    sims = block.matrix.astype(np.float64) @ q
    sims /= block.norms * qnorm
    np.clip(sims, -1.0, 1.0, out=sims)

    effective_k = min(k, sims.shape[0])
    order = np.argsort(-sims, kind="stable")[:effective_k]
    top_senses = [block.senses[i] for i in order]
    top_sims = [float(sims[i]) for i in order]
    tally = _rank_tally(top_senses, top_sims, index.sense_freq.get(lexelt, Counter()))
    return Prediction(instance_id, tally[0].sense, tally, PredictionSource.KNN)


@dataclass
class ClassifyAllResult:
    predictions: list[Prediction] = field(default_factory=list)
    errors: list[tuple[str, str]] = field(default_factory=list)


def classify_all(index: ExemplarIndex, test_pairs, k: int) -> ClassifyAllResult:
    """Classify every (instance, vector) pair in input order.

    A failing instance is recorded in ``errors`` instead of aborting the run.
    """
    result = ClassifyAllResult()
    for inst, vector in test_pairs:
        try:
            result.predictions.append(
                classify(index, inst.lexelt, vector, k, instance_id=inst.id)
            )
        except (ZeroNormError, ClassifierError, ConsistencyError) as exc:
            result.errors.append((inst.id, str(exc)))
    return result


def answer_lines(predictions, instances_by_id: dict[str, Instance]) -> list[str]:
    """Render predictions as ``lexelt instance-id sense-key`` lines."""
    lines = []
    for pred in predictions:
        inst = instances_by_id.get(pred.instance_id)
        lexelt_key = inst.lexelt.key if inst is not None else "?"
        lines.append(f"{lexelt_key} {pred.instance_id} {pred.predicted}")
    return lines
