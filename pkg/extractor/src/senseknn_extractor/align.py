"""Alignment between corpus whitespace tokens and model subtokens.

Every corpus token must map to a contiguous, non-empty span of subtoken
positions; the spans partition the content positions of the encoded
sequence (special tokens excluded).  Fast tokenizers provide the mapping
through word ids; anything else falls back to per-word tokenization.
"""

from __future__ import annotations

from dataclasses import dataclass


class AlignmentError(Exception):
    """A corpus token cannot be mapped onto the model tokenization."""


@dataclass
class AlignedEncoding:
    input_ids: list[int]
    spans: list[tuple[int, int]]  # per corpus token, inclusive positions

    @property
    def piece_counts(self) -> list[int]:
        return [hi - lo + 1 for lo, hi in self.spans]

    @property
    def special_count(self) -> int:
        return len(self.input_ids) - sum(self.piece_counts)


def align_subtokens(
    words: list[str], word_ids: list[int | None]
) -> list[tuple[int, int]]:
    """Spans from a per-position word-index list (None marks special tokens)."""
    spans: list[list[int] | None] = [None] * len(words)
    for pos, wid in enumerate(word_ids):
        if wid is None:
            continue
        if not 0 <= wid < len(words):
            raise AlignmentError(f"tokenizer produced out-of-range word index {wid}")
        span = spans[wid]
        if span is None:
            spans[wid] = [pos, pos]
        else:
            if pos != span[1] + 1:
                raise AlignmentError(
                    f"token {words[wid]!r} maps to non-contiguous subtokens"
                )
            span[1] = pos
    for i, span in enumerate(spans):
        if span is None:
            raise AlignmentError(f"token {words[i]!r} has no subtokens")
    return [(span[0], span[1]) for span in spans]


def _find_sublist(haystack: list[int], needle: list[int]) -> int:
    for start in range(len(haystack) - len(needle) + 1):
        if haystack[start : start + len(needle)] == needle:
            return start
    return -1


def _encode_words_fallback(tokenizer, words: list[str]) -> AlignedEncoding:
    pieces = []
    for word in words:
        word_pieces = tokenizer.tokenize(word)
        if not word_pieces:
            raise AlignmentError(f"token {word!r} has no subtokens")
        pieces.append(word_pieces)
    flat_ids = tokenizer.convert_tokens_to_ids([p for ps in pieces for p in ps])
    full = tokenizer(words, is_split_into_words=True, add_special_tokens=True)
    input_ids = list(full["input_ids"])
    offset = _find_sublist(input_ids, flat_ids)
    if offset < 0:
        raise AlignmentError(
            "per-word tokenization does not embed into the full sequence"
        )
    spans = []
    cursor = offset
    for word_pieces in pieces:
        spans.append((cursor, cursor + len(word_pieces) - 1))
        cursor += len(word_pieces)
    return AlignedEncoding(input_ids=input_ids, spans=spans)


def encode_words(tokenizer, words: list[str]) -> AlignedEncoding:
    """Encode a whitespace-tokenized sentence with per-token subtoken spans."""
    if not words:
        raise AlignmentError("empty sentence")
    if getattr(tokenizer, "is_fast", False):
        enc = tokenizer(words, is_split_into_words=True, add_special_tokens=True)
        spans = align_subtokens(words, enc.word_ids())
        return AlignedEncoding(input_ids=list(enc["input_ids"]), spans=spans)
    return _encode_words_fallback(tokenizer, words)
