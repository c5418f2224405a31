"""Byte-level BPE tokenizer: loading, default tokenization, and exhaustive
enumeration of the valid tokenizations of a byte span.

The tokenizer operates on raw bytes throughout. Vocabulary files use the
GPT-2 printable byte alphabet; they are translated to byte strings at load
time. Enumeration walks a prefix trie over token byte strings and yields
candidates ordered by ascending token count (ties broken by token-id
sequence), which lets callers keep only the top-M most plausible ones.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import regex

from .errors import TokenizerFormatError, UntokenizableSpanError

logger = logging.getLogger(__name__)

# Splitting pattern used by the GPT-2 tokenizer family. Kept as a plain
# string so a TokenizerSpec can carry a different one (or None to disable
# pre-tokenization entirely).
GPT2_PRETOKENIZER = (
    r"'s|'t|'re|'ve|'m|'ll|'d"
    r"| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+"
)


def printable_byte_encoder() -> dict[int, str]:
    """Bijection raw byte -> printable character, as used in vocab files.

    Printable latin-1 bytes map to themselves; the rest are shifted into
    unused codepoints starting at 256.
    """
    bs = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("\xa1"), ord("\xac") + 1))
        + list(range(ord("\xae"), ord("\xff") + 1))
    )
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return {b: chr(c) for b, c in zip(bs, cs)}


BYTE_ENCODER = printable_byte_encoder()
BYTE_DECODER = {c: b for b, c in BYTE_ENCODER.items()}


def _decode_printable(s: str) -> bytes:
    try:
        return bytes(BYTE_DECODER[c] for c in s)
    except KeyError as exc:
        raise TokenizerFormatError(
            f"token {s!r} contains characters outside the byte alphabet"
        ) from exc


class _TrieNode:
    __slots__ = ("children", "token_id")

    def __init__(self):
        self.children: dict[int, _TrieNode] = {}
        self.token_id: int | None = None


@dataclass(frozen=True)
class Tokenization:
    """One valid tokenization of a byte span."""

    token_ids: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.token_ids)

    @property
    def n(self) -> int:
        return len(self.token_ids)


@dataclass(frozen=True)
class CandidateSet:
    """Tokenizations of a span, shortest first, possibly truncated to M."""

    span: bytes
    candidates: tuple[Tokenization, ...]
    truncated: bool
    total_count: int = field(default=0)

    def __len__(self) -> int:
        return len(self.candidates)


class TokenizerSpec:
    """Vocabulary, merge rules and byte alphabet of a byte-level BPE tokenizer.

    Immutable after construction (the internal merge cache only memoizes);
    all operations are pure and safe to call concurrently.
    """

    def __init__(
        self,
        vocab: dict[bytes, int],
        merges: list[tuple[bytes, bytes]] | None = None,
        pretokenizer_pattern: str | None = GPT2_PRETOKENIZER,
    ):
        if not vocab:
            raise TokenizerFormatError("vocabulary is empty")
        if b"" in vocab:
            raise TokenizerFormatError("vocabulary contains an empty token")
        ids = sorted(vocab.values())
        if len(set(ids)) != len(ids):
            raise TokenizerFormatError("duplicate token ids in vocabulary")
        if ids[0] != 0 or ids[-1] != len(ids) - 1:
            raise TokenizerFormatError(
                f"token ids must be dense in [0, {len(ids)}), got range "
                f"[{ids[0]}, {ids[-1]}]"
            )
        self.vocab: dict[bytes, int] = dict(vocab)
        self.merges: list[tuple[bytes, bytes]] = list(merges or [])
        self.pretokenizer_pattern = pretokenizer_pattern
        self._pretokenizer = (
            regex.compile(pretokenizer_pattern) if pretokenizer_pattern else None
        )

        self.vocab_size = len(vocab)
        self.token_bytes: list[bytes] = [b""] * self.vocab_size
        for tok, tid in vocab.items():
            self.token_bytes[tid] = tok

        self.merge_ranks: dict[tuple[bytes, bytes], int] = {
            pair: rank for rank, pair in enumerate(self.merges)
        }
        for left, right in self.merges:
            for part in (left, right, left + right):
                if part not in self.vocab:
                    raise TokenizerFormatError(
                        f"merge pair ({left!r}, {right!r}) references "
                        f"{part!r}, which is not in the vocabulary"
                    )

        self.full_byte_coverage = all(
            bytes([b]) in self.vocab for b in range(256)
        )

        self._trie = _TrieNode()
        for tok, tid in vocab.items():
            node = self._trie
            for b in tok:
                node = node.children.setdefault(b, _TrieNode())
            node.token_id = tid

        self._bpe_cache: dict[bytes, tuple[int, ...]] = {}

    @classmethod
    def from_tokens(
        cls,
        tokens,
        merges: list[tuple[bytes, bytes]] | None = None,
        pretokenizer_pattern: str | None = GPT2_PRETOKENIZER,
    ) -> "TokenizerSpec":
        """Build a spec assigning ids 0..n-1 by position in `tokens`."""
        vocab = {tok: i for i, tok in enumerate(tokens)}
        if len(vocab) != len(tokens):
            raise TokenizerFormatError("duplicate tokens")
        return cls(vocab, merges, pretokenizer_pattern)

    # -- encoding / decoding -------------------------------------------------

    def decode(self, token_ids) -> bytes:
        return b"".join(self.token_bytes[t] for t in token_ids)

    def pretokenize(self, data: bytes) -> list[bytes]:
        """Split bytes into the chunks within which BPE merges apply.

        Invalid UTF-8 is carried through surrogate escapes, so the chunks
        always concatenate back to the input bytes.
        """
        if self._pretokenizer is None:
            return [data] if data else []
        text = data.decode("utf-8", errors="surrogateescape")
        return [
            chunk.encode("utf-8", errors="surrogateescape")
            for chunk in self._pretokenizer.findall(text)
        ]

    def _bpe_chunk(self, chunk: bytes) -> tuple[int, ...]:
        cached = self._bpe_cache.get(chunk)
        if cached is not None:
            return cached
        parts = [bytes([b]) for b in chunk]
        while len(parts) > 1:
            best_rank = None
            best_pair = None
            for pair in zip(parts, parts[1:]):
                rank = self.merge_ranks.get(pair)
                if rank is not None and (best_rank is None or rank < best_rank):
                    best_rank = rank
                    best_pair = pair
            if best_pair is None:
                break
            left, right = best_pair
            merged = left + right
            out = []
            i = 0
            while i < len(parts):
                if (
                    i < len(parts) - 1
                    and parts[i] == left
                    and parts[i + 1] == right
                ):
                    out.append(merged)
                    i += 2
                else:
                    out.append(parts[i])
                    i += 1
            parts = out
        try:
            ids = tuple(self.vocab[p] for p in parts)
        except KeyError as exc:
            raise UntokenizableSpanError(chunk) from exc
        self._bpe_cache[chunk] = ids
        return ids

    # -- span matching -------------------------------------------------------

    def token_matches(self, span: bytes) -> list[list[tuple[int, int]]]:
        """For each start offset, the (token_id, end_offset) pairs of vocab
        tokens matching there, sorted by token id."""
        n = len(span)
        matches: list[list[tuple[int, int]]] = []
        for i in range(n):
            node = self._trie
            found = []
            for j in range(i, n):
                node = node.children.get(span[j])
                if node is None:
                    break
                if node.token_id is not None:
                    found.append((node.token_id, j + 1))
            found.sort()
            matches.append(found)
        return matches


def _parse_vocab_mapping(raw) -> dict[bytes, int]:
    if not isinstance(raw, dict):
        raise TokenizerFormatError("vocab must be a JSON object")
    vocab: dict[bytes, int] = {}
    for tok, tid in raw.items():
        if not isinstance(tid, int):
            raise TokenizerFormatError(f"non-integer id for token {tok!r}")
        key = _decode_printable(tok)
        if key in vocab:
            raise TokenizerFormatError(f"duplicate token {tok!r}")
        vocab[key] = tid
    return vocab


def _parse_merges_lines(lines) -> list[tuple[bytes, bytes]]:
    merges: list[tuple[bytes, bytes]] = []
    for lineno, line in enumerate(lines):
        if lineno == 0 and line.startswith("#"):
            continue
        if not line.strip():
            continue
        parts = line.split(" ")
        if len(parts) != 2:
            raise TokenizerFormatError(
                f"merges line {lineno + 1} is not a space-separated pair: "
                f"{line!r}"
            )
        merges.append((_decode_printable(parts[0]), _decode_printable(parts[1])))
    return merges


def load_tokenizer(vocab_file, merges_file) -> TokenizerSpec:
    """Load GPT-2-format vocab.json and merges.txt files.

    Missing single-byte coverage is logged as a warning and recorded on the
    spec (`full_byte_coverage`); enumeration may then fail on some spans.
    """
    try:
        with open(vocab_file, encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise TokenizerFormatError(f"cannot read vocab file: {exc}") from exc
    try:
        with open(merges_file, encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as exc:
        raise TokenizerFormatError(f"cannot read merges file: {exc}") from exc

    spec = TokenizerSpec(_parse_vocab_mapping(raw), _parse_merges_lines(lines))
    if not spec.full_byte_coverage:
        logger.warning(
            "vocabulary lacks single-byte coverage: some byte strings may "
            "have no valid tokenization"
        )
    return spec


def tokenizer_from_payload(payload) -> TokenizerSpec:
    """Build a spec from the wire payload {"vocab": {...}, "merges": [...]}
    served by a remote scoring service."""
    if not isinstance(payload, dict) or "vocab" not in payload:
        raise TokenizerFormatError("tokenizer payload must carry a vocab")
    vocab = _parse_vocab_mapping(payload["vocab"])
    merges = _parse_merges_lines(payload.get("merges") or [])
    return TokenizerSpec(vocab, merges)


def default_tokenize(spec: TokenizerSpec, data: bytes) -> Tokenization:
    """Deterministic tokenization: greedy BPE merges within pre-tokenizer
    chunks, lowest merge rank first."""
    ids: list[int] = []
    for chunk in spec.pretokenize(data):
        ids.extend(spec._bpe_chunk(chunk))
    return Tokenization(tuple(ids))


def count_tokenizations(spec: TokenizerSpec, span: bytes) -> int:
    """Number of valid tokenizations of `span` (0 if untokenizable)."""
    n = len(span)
    matches = spec.token_matches(span)
    count = [0] * (n + 1)
    count[n] = 1
    for i in range(n - 1, -1, -1):
        total = 0
        for _, end in matches[i]:
            total += count[end]
        count[i] = total
    return count[0]


def enumerate_tokenizations(
    spec: TokenizerSpec, span: bytes, max_candidates: int | None = None
) -> CandidateSet:
    """All tokenizations of `span` whose tokens lie fully inside it.

    Candidates come out sorted by ascending token count, ties broken by the
    lexicographic order of token-id sequences. With `max_candidates` set,
    the search stops as soon as that many have been fixed; deeper (longer)
    tokenizations are provably ranked after them and never visited.
    """
    if not span:
        raise ValueError("span must be non-empty")
    if max_candidates is not None and max_candidates < 1:
        raise ValueError("max_candidates must be >= 1")

    n = len(span)
    matches = spec.token_matches(span)

    # Reachability DP from each suffix: feasible token-count range and the
    # exact number of tokenizations.
    inf = n + 1
    min_toks = [inf] * (n + 1)
    max_toks = [-1] * (n + 1)
    count = [0] * (n + 1)
    min_toks[n] = max_toks[n] = 0
    count[n] = 1
    for i in range(n - 1, -1, -1):
        for _, end in matches[i]:
            if count[end]:
                count[i] += count[end]
                if min_toks[end] + 1 < min_toks[i]:
                    min_toks[i] = min_toks[end] + 1
                if max_toks[end] + 1 > max_toks[i]:
                    max_toks[i] = max_toks[end] + 1

    total = count[0]
    if total == 0:
        raise UntokenizableSpanError(span)
    want = total if max_candidates is None else min(max_candidates, total)

    out: list[Tokenization] = []
    prefix: list[int] = []

    def emit(pos: int, remaining: int) -> bool:
        if remaining == 0:
            out.append(Tokenization(tuple(prefix)))
            return len(out) >= want
        rem = remaining - 1
        for tid, end in matches[pos]:
            if min_toks[end] <= rem <= max_toks[end]:
                prefix.append(tid)
                done = emit(end, rem)
                prefix.pop()
                if done:
                    return True
        return False

    depth = min_toks[0]
    while len(out) < want and depth <= max_toks[0]:
        if emit(0, depth):
            break
        depth += 1

    return CandidateSet(
        span=span,
        candidates=tuple(out),
        truncated=total > want,
        total_count=total,
    )
