"""Run a pretrained checkpoint over a corpus and dump per-head vectors.

One record per annotated head: the context is preprocessed so the head
carries the lemma and everything else keeps its surface form, the model
runs in inference mode, and the head vector is the mean of its subtoken
hidden states under the configured layer policy (final layer, or the
concatenation of the last four).  Contexts that exceed the length budget
are windowed symmetrically around the head.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import torch

from senseknn.corpus import Corpus, preprocess_instance
from senseknn.embedstore import EmbeddingWriter, LayerPolicy, write_debug_jsonl

from .align import AlignedEncoding, AlignmentError, encode_words

log = logging.getLogger("senseknn_extractor")

MEAN_SUBTOKENS = "mean-subtokens"


@dataclass
class ExtractionSpec:
    model_id: str
    layer_policy: LayerPolicy = LayerPolicy.FINAL_LAYER
    pooling: str = MEAN_SUBTOKENS
    max_length: int = 512
    device: str = "cpu"
    batch_size: int = 8

    def __post_init__(self) -> None:
        if self.pooling != MEAN_SUBTOKENS:
            raise ValueError(f"unsupported pooling {self.pooling!r}")
        if self.max_length < 8:
            raise ValueError("max_length must be at least 8")


@dataclass
class ExtractionSummary:
    written: int = 0
    dim: int = 0
    windowed: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)


def load_model(spec: ExtractionSpec):
    from transformers import AutoModel, AutoTokenizer

    try:
        from transformers.utils import logging as hf_logging

        hf_logging.disable_progress_bar()
    except Exception:
        pass
    tokenizer = AutoTokenizer.from_pretrained(spec.model_id)
    model = AutoModel.from_pretrained(spec.model_id)
    model.to(spec.device)
    model.eval()
    return tokenizer, model


def _window(piece_counts: list[int], head: int, budget: int) -> tuple[int, int]:
    """Widest word range around the head whose piece total fits the budget."""
    used = piece_counts[head]
    if used > budget:
        raise AlignmentError(
            f"head occupies {used} subtokens, more than the budget of {budget}"
        )
    lo = hi = head
    while True:
        moved = False
        if lo > 0 and used + piece_counts[lo - 1] <= budget:
            lo -= 1
            used += piece_counts[lo]
            moved = True
        if hi < len(piece_counts) - 1 and used + piece_counts[hi + 1] <= budget:
            hi += 1
            used += piece_counts[hi]
            moved = True
        if not moved:
            return lo, hi


def _prepare(
    inst, tokenizer, max_length: int
) -> tuple[AlignedEncoding, tuple[int, int], bool]:
    """Encode one instance; returns (encoding, head span, was_windowed)."""
    tokens, (head, _) = preprocess_instance(inst)
    enc = encode_words(tokenizer, tokens)
    windowed = False
    budget = max_length - enc.special_count
    # One pass suffices for tokenizers with context-free per-word pieces; the
    # retries absorb anything more exotic by tightening the budget.
    for _ in range(5):
        if len(enc.input_ids) <= max_length:
            return enc, enc.spans[head], windowed
        windowed = True
        lo, hi = _window(enc.piece_counts, head, budget)
        tokens = tokens[lo : hi + 1]
        head -= lo
        enc = encode_words(tokenizer, tokens)
        budget -= max(1, len(enc.input_ids) - max_length)
        if budget < enc.piece_counts[head]:
            break
    raise AlignmentError(f"cannot fit instance into {max_length} positions")


def _layer_states(hidden_states, policy: LayerPolicy) -> torch.Tensor:
    if policy is LayerPolicy.FINAL_LAYER:
        return hidden_states[-1]
    return torch.cat(tuple(hidden_states[-4:]), dim=-1)


def extract(
    spec: ExtractionSpec,
    corpus: Corpus,
    out_path,
    debug_jsonl_path=None,
) -> ExtractionSummary:
    """Write one embedding record per head into ``out_path``; corpus order."""
    tokenizer, model = load_model(spec)
    hidden = model.config.hidden_size
    if spec.layer_policy is LayerPolicy.CONCAT_LAST4:
        if getattr(model.config, "num_hidden_layers", 4) < 4:
            raise ValueError("concat4 needs at least four transformer layers")
        dim = 4 * hidden
    else:
        dim = hidden

    summary = ExtractionSummary(dim=dim)
    prepared: list[tuple[str, AlignedEncoding, tuple[int, int]]] = []
    for inst in corpus.instances:
        try:
            enc, span, windowed = _prepare(inst, tokenizer, spec.max_length)
        except AlignmentError as exc:
            log.warning("skipping %s: %s", inst.id, exc)
            summary.failures.append((inst.id, str(exc)))
            continue
        if windowed:
            log.warning("windowed %s around the head to fit %d positions",
                        inst.id, spec.max_length)
            summary.windowed += 1
        prepared.append((inst.id, enc, span))

    pad_id = tokenizer.pad_token_id if tokenizer.pad_token_id is not None else 0
    debug_records: list[tuple[str, np.ndarray]] = []

    with open(out_path, "wb") as sink:
        writer = EmbeddingWriter(sink, dim, spec.model_id, spec.layer_policy)
        with torch.no_grad():
            for start in range(0, len(prepared), spec.batch_size):
                batch = prepared[start : start + spec.batch_size]
                width = max(len(enc.input_ids) for _, enc, _ in batch)
                input_ids = torch.full(
                    (len(batch), width), pad_id, dtype=torch.long, device=spec.device
                )
                mask = torch.zeros_like(input_ids)
                for row, (_, enc, _) in enumerate(batch):
                    ids = torch.tensor(enc.input_ids, dtype=torch.long)
                    input_ids[row, : len(enc.input_ids)] = ids
                    mask[row, : len(enc.input_ids)] = 1
                output = model(
                    input_ids=input_ids,
                    attention_mask=mask,
                    output_hidden_states=True,
                )
                states = _layer_states(output.hidden_states, spec.layer_policy)
                for row, (inst_id, _, (lo, hi)) in enumerate(batch):
                    vec = states[row, lo : hi + 1].mean(dim=0)
                    array = vec.cpu().numpy().astype("<f4")
                    writer.add(inst_id, array)
                    summary.written += 1
                    if debug_jsonl_path is not None:
                        debug_records.append((inst_id, array))
        writer.close()

    if debug_jsonl_path is not None:
        with open(debug_jsonl_path, "w", encoding="utf-8") as handle:
            write_debug_jsonl(debug_records, handle)
    return summary
