"""Exact t-SNE projection of one lexelt's embeddings to 2D.

O(n^2) exact affinities (no Barnes-Hut); point sets are at most a few
hundred.  Hyperparameters default to standard practice and are recorded in
the output metadata: perplexity min(30, (n-1)/3), 1000 iterations, learning
rate 200, early exaggeration 12 for the first 250 iterations, momentum 0.5
switching to 0.8 after iteration 250, mandatory seed.

Internally points are processed in a canonical order derived from a salted
digest of their coordinates, so the projection is equivariant to input
ordering: permuting the input rows permutes the output rows and changes
nothing else (identical rows excepted).
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .corpus import Corpus, Lexelt
from .errors import (
    EmptySelectionError,
    ProjectionError,
    UserArgumentError,
)

_ENTROPY_TOL = 1e-5
_MAX_SEARCH_STEPS = 50


@dataclass
class ProjectionConfig:
    perplexity: float | None = None  # default resolves to min(30, (n-1)/3)
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    exaggeration_until: int = 250  # also the momentum switch point
    momentum_start: float = 0.5
    momentum_late: float = 0.8
    seed: int = 0
    trace_every: int = 10

    def resolve_perplexity(self, n: int) -> float:
        if self.perplexity is not None:
            return float(self.perplexity)
        return float(max(1, min(30, (n - 1) // 3)))

    def as_dict(self, n: int) -> dict:
        return {
            "perplexity": self.resolve_perplexity(n),
            "iterations": self.iterations,
            "learning_rate": self.learning_rate,
            "early_exaggeration": self.early_exaggeration,
            "exaggeration_until": self.exaggeration_until,
            "momentum": [self.momentum_start, self.momentum_late],
            "trace_every": self.trace_every,
        }


def squared_distances(vectors: np.ndarray) -> np.ndarray:
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise ProjectionError(f"expected a 2-d point array, got shape {x.shape}")
    return squareform(pdist(x, "sqeuclidean"))


def perplexity_calibration(
    distances: np.ndarray, perplexity: float
) -> tuple[np.ndarray, np.ndarray]:
    """Per-point Gaussian bandwidths matching a target perplexity.

    Binary-searches each row's precision so the conditional distribution's
    Shannon entropy (bits) equals log2(perplexity) within 1e-5, at most 50
    steps.  Returns (sigmas, conditional matrix with zero diagonal).
    """
    d2 = np.asarray(distances, dtype=np.float64)
    n = d2.shape[0]
    if d2.shape != (n, n):
        raise ProjectionError(f"distance matrix must be square, got {d2.shape}")
    if n < 2:
        raise ProjectionError("need at least 2 points")
    if not np.isfinite(d2).all():
        raise ProjectionError("non-finite distances")
    if not 0.0 < perplexity < n:
        raise ProjectionError(
            f"perplexity must be in (0, n={n}), got {perplexity}"
        )

    target = math.log2(perplexity)
    sigmas = np.ones(n, dtype=np.float64)
    cond = np.zeros((n, n), dtype=np.float64)
    offdiag = ~np.eye(n, dtype=bool)

    for i in range(n):
        row = d2[i][offdiag[i]]
        if row.shape[0] == 1:
            cond[i][offdiag[i]] = 1.0  # forced normalization; entropy is fixed at 0
            sigmas[i] = math.sqrt(0.5)
            continue
        shifted = row - row.min()  # affinities are shift-invariant; avoids underflow
        beta = 1.0
        beta_min, beta_max = 0.0, np.inf
        p = np.empty_like(shifted)
        for _ in range(_MAX_SEARCH_STEPS):
            p = np.exp(-shifted * beta)
            p /= p.sum()
            nonzero = p > 0.0
            entropy = -float(np.sum(p[nonzero] * np.log2(p[nonzero])))
            diff = entropy - target
            if abs(diff) <= _ENTROPY_TOL:
                break
            if diff > 0.0:  # too flat: sharpen
                beta_min = beta
                beta = beta * 2.0 if beta_max == np.inf else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = (beta + beta_min) / 2.0
        cond[i][offdiag[i]] = p
        sigmas[i] = math.sqrt(1.0 / (2.0 * beta))

    return sigmas, cond


def joint_affinities(conditionals: np.ndarray) -> np.ndarray:
    """Symmetrized joint probabilities P = (C + C^T) / (2n)."""
    c = np.asarray(conditionals, dtype=np.float64)
    n = c.shape[0]
    if c.shape != (n, n):
        raise ProjectionError(f"conditional matrix must be square, got {c.shape}")
    if (c < 0).any():
        raise ProjectionError("conditional probabilities must be non-negative")
    row_sums = c.sum(axis=1)
    if not np.allclose(row_sums, 1.0, atol=1e-6):
        raise ProjectionError("conditional rows must each sum to 1")
    return (c + c.T) / (2.0 * n)


def _canonical_order(vectors: np.ndarray, seed: int) -> np.ndarray:
    salt = struct.pack("<Q", seed & 0xFFFFFFFFFFFFFFFF)
    digests = [
        hashlib.blake2b(salt + row.astype("<f8").tobytes(), digest_size=16).digest()
        for row in vectors
    ]
    return np.asarray(
        sorted(range(len(digests)), key=lambda i: (digests[i], i)), dtype=np.intp
    )


def _kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0.0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def project(
    vectors: np.ndarray, config: ProjectionConfig
) -> tuple[np.ndarray, list[float]]:
    """Gradient descent on KL(P||Q) with Student-t (1 dof) 2D affinities.

    Initialization is a seeded Gaussian with sigma 1e-4; the output is
    centered per axis.  KL against the unexaggerated P is recorded every
    ``trace_every`` iterations.  Raises on divergence, naming the iteration.
    """
    x = np.asarray(vectors, dtype=np.float64)
    n = x.shape[0]
    if x.ndim != 2 or n < 3:
        raise ProjectionError(f"need at least 3 points of uniform dim, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ProjectionError("non-finite input vectors")
    if config.iterations < 1:
        raise ProjectionError("iterations must be >= 1")

    perplexity = config.resolve_perplexity(n)
    order = _canonical_order(x, config.seed)
    inverse = np.empty_like(order)
    inverse[order] = np.arange(n)
    xc = x[order]

    _, cond = perplexity_calibration(squared_distances(xc), perplexity)
    p = joint_affinities(cond)
    p_floor = np.maximum(p, 1e-12)  # gradient floor; KL uses the exact P

    rng = np.random.RandomState(config.seed & 0xFFFFFFFF)
    y = rng.standard_normal((n, 2)) * 1e-4
    update = np.zeros_like(y)
    trace: list[float] = []

    for iteration in range(1, config.iterations + 1):
        exaggerating = iteration <= config.exaggeration_until
        momentum = config.momentum_start if exaggerating else config.momentum_late

        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            d2 = squareform(pdist(y, "sqeuclidean"))
            num = 1.0 / (1.0 + d2)
            np.fill_diagonal(num, 0.0)
            q = num / num.sum()

            p_eff = p_floor * config.early_exaggeration if exaggerating else p_floor
            pq_num = (p_eff - q) * num
            grad = 4.0 * (pq_num.sum(axis=1)[:, None] * y - pq_num @ y)

            update = momentum * update - config.learning_rate * grad
            y = y + update
            y = y - y.mean(axis=0)

        if not np.isfinite(y).all():
            raise ProjectionError(f"projection diverged at iteration {iteration}")

        if iteration % config.trace_every == 0 or iteration == config.iterations:
            trace.append(_kl_divergence(p, q))

    return y[inverse], trace


# --------------------------------------------------------------------------
# Point selection and plot data


@dataclass(frozen=True)
class PointSelection:
    vectors: np.ndarray
    senses: tuple[str, ...]
    instance_ids: tuple[str, ...]
    frequencies: dict[str, int]


def select_lexelt_points(
    corpus: Corpus,
    store: dict[str, np.ndarray],
    lexelt: Lexelt,
    min_freq: int = 3,
) -> PointSelection:
    """Training points of one lexelt whose sense frequency is at least min_freq.

    Frequencies count gold annotations over the whole corpus; an instance
    with several qualifying senses yields one point per sense.
    """
    if lexelt not in corpus.lexelts:
        available = ", ".join(sorted(l.key for l in corpus.lexelts))
        raise UserArgumentError(f"unknown lexelt {lexelt.key!r}; available: {available}")

    freq: Counter = Counter()
    for inst in corpus.instances:
        if inst.lexelt == lexelt:
            for sense in inst.gold_senses:
                freq[sense] += 1
    kept = {sense: count for sense, count in freq.items() if count >= min_freq}

    vectors, senses, ids = [], [], []
    for inst in corpus.instances:
        if inst.lexelt != lexelt:
            continue
        vec = store.get(inst.id)
        if vec is None:
            continue
        for sense in sorted(inst.gold_senses):
            if sense in kept:
                vectors.append(np.asarray(vec, dtype=np.float32))
                senses.append(sense)
                ids.append(inst.id)

    if not vectors:
        raise EmptySelectionError(
            f"nothing to plot for {lexelt.key!r}: no sense reaches frequency "
            f"{min_freq} with stored vectors"
        )
    return PointSelection(
        vectors=np.stack(vectors),
        senses=tuple(senses),
        instance_ids=tuple(ids),
        frequencies=kept,
    )


@dataclass(frozen=True)
class PlotPoint:
    x: float
    y: float
    sense: str
    instance_id: str


@dataclass(frozen=True)
class LegendEntry:
    sense: str
    freq: int
    label: str


@dataclass
class SensePlotData:
    lexelt: str
    model_tag: str
    seed: int
    config: dict
    points: list[PlotPoint] = field(default_factory=list)
    legend: list[LegendEntry] = field(default_factory=list)
    kl_trace: list[float] = field(default_factory=list)


def build_plot_data(
    corpus: Corpus,
    store: dict[str, np.ndarray],
    lexelt: Lexelt,
    config: ProjectionConfig,
    min_freq: int = 3,
    model_tag: str = "",
    labels: dict[str, str] | None = None,
) -> SensePlotData:
    """Select, project, and package one lexelt's sense map."""
    selection = select_lexelt_points(corpus, store, lexelt, min_freq)
    coords, trace = project(selection.vectors, config)
    labels = labels or {}
    legend = [
        LegendEntry(sense, freq, labels.get(sense, sense))
        for sense, freq in sorted(
            selection.frequencies.items(), key=lambda kv: (-kv[1], kv[0])
        )
    ]
    points = [
        PlotPoint(float(coords[i, 0]), float(coords[i, 1]), selection.senses[i],
                  selection.instance_ids[i])
        for i in range(len(selection.senses))
    ]
    return SensePlotData(
        lexelt=lexelt.key,
        model_tag=model_tag,
        seed=config.seed,
        config=config.as_dict(len(points)),
        points=points,
        legend=legend,
        kl_trace=trace,
    )


def plot_data_to_json(data: SensePlotData) -> str:
    payload = {
        "lexelt": data.lexelt,
        "model_tag": data.model_tag,
        "seed": data.seed,
        "config": data.config,
        "points": [
            {"x": p.x, "y": p.y, "sense": p.sense, "id": p.instance_id}
            for p in data.points
        ],
        "legend": [
            {"sense": e.sense, "freq": e.freq, "label": e.label}
            for e in data.legend
        ],
        "kl_trace": data.kl_trace,
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def plot_data_from_json(text: str) -> SensePlotData:
    payload = json.loads(text)
    return SensePlotData(
        lexelt=payload["lexelt"],
        model_tag=payload["model_tag"],
        seed=payload["seed"],
        config=payload["config"],
        points=[
            PlotPoint(p["x"], p["y"], p["sense"], p["id"]) for p in payload["points"]
        ],
        legend=[
            LegendEntry(e["sense"], e["freq"], e["label"]) for e in payload["legend"]
        ],
        kl_trace=list(payload["kl_trace"]),
    )


def emit_plot(data: SensePlotData, fmt: str = "json") -> bytes:
    """Render plot data as canonical JSON or a deterministic SVG scatter."""
    if fmt == "json":
        return plot_data_to_json(data).encode("utf-8")
    if fmt == "svg":
        from .plotting import render_sense_scatter

        return render_sense_scatter(data)
    raise UserArgumentError(f"unknown plot format {fmt!r} (expected json or svg)")
