"""Splitting a byte sequence into character blocks.

Blocks roughly correspond to words: the sequence is split at ASCII spaces
and newlines, and each separator run travels as a prefix of the word that
follows it (GPT-2-style vocabularies fold the leading space into word
tokens, so this keeps each block's default tokenization aligned with the
default tokenization of the whole sequence). Words no longer than the block
length limit L become T0 blocks; longer words are cut at default-token
boundaries into T1 blocks, and any single token longer than L is cropped
into T2 blocks of exactly L bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .tokenizer import TokenizerSpec, default_tokenize

SEPARATORS = frozenset(b" \n")


@dataclass(frozen=True)
class Block:
    """A contiguous byte span of the sequence, separator prefix included."""

    data: bytes
    kind: str  # "T0", "T1" or "T2"
    span: tuple[int, int]

    def __len__(self) -> int:
        return len(self.data)


def _split_units(s: bytes) -> list[tuple[int, int]]:
    """[start, end) offsets of separator-run + word units.

    A separator run with no following word (a trailing run, or an
    all-separator sequence) forms a unit of its own.
    """
    units = []
    n = len(s)
    i = 0
    while i < n:
        start = i
        while i < n and s[i] in SEPARATORS:
            i += 1
        while i < n and s[i] not in SEPARATORS:
            i += 1
        units.append((start, i))
    return units


def split_in_blocks(spec: TokenizerSpec, s: bytes, max_block_len: int) -> list[Block]:
    """Split `s` into blocks of at most `max_block_len` bytes.

    Total on any input: the blocks are contiguous, non-overlapping, and
    concatenate byte-for-byte back to `s`.
    """
    if max_block_len < 1:
        raise ValueError("max_block_len must be >= 1")
    blocks: list[Block] = []

    def emit(start: int, end: int, kind: str) -> None:
        blocks.append(Block(data=s[start:end], kind=kind, span=(start, end)))

    for unit_start, unit_end in _split_units(s):
        if unit_end - unit_start <= max_block_len:
            emit(unit_start, unit_end, "T0")
            continue
        # Long word: greedily pack consecutive default tokens up to the
        # limit (T1); crop any single over-long token at the limit (T2).
        unit = s[unit_start:unit_end]
        pieces = [spec.token_bytes[t] for t in default_tokenize(spec, unit).token_ids]
        cur_start = unit_start
        cur: list[bytes] = []
        cur_len = 0
        i = 0
        while i < len(pieces):
            piece = pieces[i]
            if cur_len + len(piece) <= max_block_len:
                cur.append(piece)
                cur_len += len(piece)
                i += 1
                continue
            if not cur:
                # The piece alone exceeds the limit: crop it, the remainder
                # starts the next block.
                while len(piece) > max_block_len:
                    emit(cur_start, cur_start + max_block_len, "T2")
                    cur_start += max_block_len
                    piece = piece[max_block_len:]
                if piece:
                    cur = [piece]
                    cur_len = len(piece)
                i += 1
                continue
            # Limit reached: emit what accumulated, but keep separator-final
            # tokens for the next block so the break stays at a
            # pre-tokenizer-stable position (whitespace chunking depends on
            # what follows).
            keep = len(cur)
            while keep > 0 and cur[keep - 1][-1:] in (b" ", b"\n"):
                keep -= 1
            if keep == 0:
                keep = 1
            emitted = sum(len(p) for p in cur[:keep])
            emit(cur_start, cur_start + emitted, "T1")
            cur_start += emitted
            cur = cur[keep:]
            cur_len -= emitted
        if cur:
            emit(cur_start, cur_start + cur_len, "T1")
    return blocks


def recommend_block_len(spec: TokenizerSpec, corpus) -> int:
    """Maximum byte length over the corpus of any default-tokenization token.

    Splitting with this value never produces T2 blocks on that corpus.
    """
    longest = 0
    seen = False
    for text in corpus:
        seen = True
        for tid in default_tokenize(spec, text).token_ids:
            longest = max(longest, len(spec.token_bytes[tid]))
    if not seen:
        raise ValueError("corpus must be non-empty")
    return max(longest, 1)
