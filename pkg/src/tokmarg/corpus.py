"""Building evaluation sequences out of raw texts.

Texts are greedily packed into sequences whose default tokenization stays
within a token budget, joined by a blank line; a text that alone exceeds
the budget becomes its own sequence, clipped at a token boundary. Every
sequence starts at a text boundary.
"""

from __future__ import annotations

import json

from .tokenizer import TokenizerSpec, default_tokenize

SEPARATOR = b"\n\n"


def build_sequences(spec: TokenizerSpec, texts, target_len: int) -> list[bytes]:
    """Pack texts into sequences of at most `target_len` default tokens.

    The separator's tokens count toward the budget, since they are part of
    the scored sequence.
    """
    if target_len < 1:
        raise ValueError("target_len must be >= 1")
    out: list[bytes] = []
    current: bytes | None = None

    def flush() -> None:
        nonlocal current
        if current is not None:
            out.append(current)
            current = None

    for text in texts:
        if not text:
            continue
        ids = default_tokenize(spec, text).token_ids
        if len(ids) > target_len:
            flush()
            out.append(_clip_to_tokens(spec, ids, target_len))
            continue
        if current is None:
            current = text
            continue
        joined = current + SEPARATOR + text
        if len(default_tokenize(spec, joined)) <= target_len:
            current = joined
        else:
            flush()
            current = text
    flush()
    return out


def _clip_to_tokens(spec: TokenizerSpec, ids, target_len: int) -> bytes:
    """Clip a token sequence to the budget and decode back to bytes.

    Clipping happens at token boundaries so the result stays exactly
    representable; re-tokenization of the clipped bytes is re-checked since
    chunk boundaries can shift at the cut.
    """
    ids = list(ids[:target_len])
    clipped = spec.decode(ids)
    while ids and len(default_tokenize(spec, clipped)) > target_len:
        ids.pop()
        clipped = spec.decode(ids)
    return clipped


def read_texts(path) -> list[bytes]:
    """Texts from a UTF-8 file or JSON Lines with a `text` field."""
    path = str(path)
    if path.endswith(".jsonl"):
        texts = []
        with open(path, encoding="utf-8") as f:
            for line in f:
                if not line.strip():
                    continue
                record = json.loads(line)
                texts.append(record["text"].encode("utf-8"))
        return texts
    with open(path, "rb") as f:
        return [f.read()]


def write_sequences_jsonl(path, sequences, sources=None) -> None:
    """One record per sequence with a provenance id."""
    with open(path, "w", encoding="utf-8") as f:
        for i, seq in enumerate(sequences):
            record = {
                "id": i,
                "text": seq.decode("utf-8", errors="surrogateescape"),
            }
            if sources is not None:
                record["source"] = sources[i]
            f.write(json.dumps(record, sort_keys=True))
            f.write("\n")


def read_sequences_jsonl(path) -> list[tuple[str, bytes]]:
    """(id, bytes) pairs from a sequences file."""
    out = []
    with open(path, encoding="utf-8") as f:
        for i, line in enumerate(f):
            if not line.strip():
                continue
            record = json.loads(line)
            out.append(
                (
                    str(record.get("id", i)),
                    record["text"].encode("utf-8", errors="surrogateescape"),
                )
            )
    return out
