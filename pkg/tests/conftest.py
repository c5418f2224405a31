"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the library's own search and scoring
paths: the splitter enumerates tokenizations by recursive prefix splitting
over a plain set of token strings, and the posterior helper renormalizes
joint scores directly.
"""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from tokmarg import TokenizerSpec
from tokmarg.tokenizer import BYTE_ENCODER


# -- independent oracles -------------------------------------------------------


def brute_force_tokenizations(token_set, span: bytes) -> list[tuple[bytes, ...]]:
    """All ways to split `span` into pieces from `token_set` (recursive)."""
    if not span:
        return [()]
    out = []
    for end in range(1, len(span) + 1):
        head = span[:end]
        if head in token_set:
            for tail in brute_force_tokenizations(token_set, span[end:]):
                out.append((head,) + tail)
    return out


def brute_force_posterior(spec, backend, span: bytes) -> dict[tuple[int, ...], float]:
    """P(T | span) over all tokenizations, by direct renormalization."""
    splits = brute_force_tokenizations(set(spec.vocab), span)
    scored = {}
    for pieces in splits:
        ids = tuple(spec.vocab[piece] for piece in pieces)
        scored[ids] = backend.score_continuations(backend.initial_prefix(), [ids])[0]
    total = max(scored.values()) + math.log(
        sum(math.exp(v - max(scored.values())) for v in scored.values())
    )
    return {ids: math.exp(v - total) for ids, v in scored.items()}


def q_of_all_paths(spec, backend, blocks, max_candidates):
    """Exhaustive recursion over per-block candidate choices: T -> Q(T|S).

    Mirrors the proposal's sequential renormalization directly, without the
    sampler; summing the returned values over all paths checks that the
    proposal is a proper distribution.
    """
    from tokmarg import enumerate_tokenizations

    out: dict[tuple[int, ...], float] = {}

    def recurse(i, prefix, log_q, ids):
        if i == len(blocks):
            out[tuple(ids)] = out.get(tuple(ids), 0.0) + math.exp(log_q)
            return
        cset = enumerate_tokenizations(spec, blocks[i].data, max_candidates)
        raw = backend.score_continuations(
            prefix, [c.token_ids for c in cset.candidates]
        )
        mx = max(raw)
        log_norm = mx + math.log(sum(math.exp(r - mx) for r in raw))
        for cand, r in zip(cset.candidates, raw):
            recurse(
                i + 1,
                prefix + list(cand.token_ids),
                log_q + (r - log_norm),
                ids + list(cand.token_ids),
            )

    recurse(0, backend.initial_prefix(), 0.0, [])
    return out


class CountingBackend:
    """Wraps a backend and counts score_continuations calls."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = 0

    def __getattr__(self, name):
        return getattr(self.inner, name)

    def score_continuations(self, prefix, candidates):
        self.calls += 1
        return self.inner.score_continuations(prefix, candidates)

    def initial_prefix(self):
        return self.inner.initial_prefix()


# -- spec builders -------------------------------------------------------------


def make_single_byte_spec() -> TokenizerSpec:
    return TokenizerSpec.from_tokens([bytes([b]) for b in range(256)])


def spec_with_merges(merges) -> TokenizerSpec:
    """Full single-byte coverage plus the products of the given merges."""
    vocab = {bytes([b]): b for b in range(256)}
    next_id = 256
    for left, right in merges:
        merged = left + right
        if merged not in vocab:
            vocab[merged] = next_id
            next_id += 1
    return TokenizerSpec(vocab, merges=list(merges))


def random_small_spec(rng: np.random.Generator, alphabet: bytes = b"abc",
                      max_extra: int = 9) -> TokenizerSpec:
    """Random vocab over a tiny alphabet, single-byte coverage guaranteed."""
    tokens = [bytes([b]) for b in alphabet]
    n_extra = int(rng.integers(0, max_extra + 1))
    seen = set(tokens)
    for _ in range(n_extra):
        length = int(rng.integers(2, 5))
        tok = bytes(int(b) for b in rng.choice(list(alphabet), size=length))
        if tok not in seen:
            seen.add(tok)
            tokens.append(tok)
    return TokenizerSpec.from_tokens(tokens)


def _printable(token: bytes) -> str:
    return "".join(BYTE_ENCODER[b] for b in token)


def write_spec_files(directory, spec: TokenizerSpec):
    """Serialize a spec to GPT-2-format vocab.json / merges.txt files."""
    vocab_path = directory / "vocab.json"
    merges_path = directory / "merges.txt"
    vocab_path.write_text(
        json.dumps({_printable(tok): tid for tok, tid in spec.vocab.items()}),
        encoding="utf-8",
    )
    lines = ["#version: 0.2"]
    lines += [f"{_printable(a)} {_printable(b)}" for a, b in spec.merges]
    merges_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return vocab_path, merges_path


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in nodeid:
                continue
            label = nodeid.split("::test_criterion_", 1)[1]
            number, _, rest = label.partition("_")
            lines.append((int(number), rest.replace("_", " "), outcome == "passed"))
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for number, rest, ok in sorted(lines):
            status = "PASS" if ok else "FAIL"
            terminalreporter.write_line(f"criterion {number} ({rest}): {status}")


# -- fixtures ------------------------------------------------------------------


@pytest.fixture
def cab_spec() -> TokenizerSpec:
    """The six-token vocabulary {a, ab, b, c, ca, cab}."""
    return TokenizerSpec.from_tokens(
        [b"a", b"ab", b"b", b"c", b"ca", b"cab"],
        merges=[(b"c", b"a"), (b"ca", b"b")],
    )


@pytest.fixture
def single_byte_spec() -> TokenizerSpec:
    return make_single_byte_spec()


@pytest.fixture
def english_spec() -> TokenizerSpec:
    """A merge-rich spec resembling a small word-piece-y BPE over ASCII."""
    merges = [
        (b"t", b"h"),
        (b"th", b"e"),
        (b" ", b"t"),
        (b" t", b"h"),
        (b" th", b"e"),
        (b"i", b"n"),
        (b"in", b"g"),
        (b"a", b"n"),
        (b"an", b"d"),
        (b" ", b"a"),
        (b" ", b"s"),
        (b"e", b"r"),
        (b"o", b"u"),
        (b" ", b"w"),
        (b" w", b"o"),
        (b" wo", b"r"),
        (b" wor", b"d"),
        (b"l", b"l"),
        (b"e", b"d"),
        (b" ", b"\n"),
        (b"\n", b"\n"),
    ]
    return spec_with_merges(merges)
