"""Autoregressive scoring backends.

A backend answers one question: given a token prefix, what is the log
probability of each candidate continuation (a short token-id sequence)?
All log probabilities are natural logs; conversion to bits happens only at
reporting time. Three implementations live here: a uniform toy backend, an
add-alpha n-gram model, and an HTTP client speaking the remote scoring
protocol (POST /score, GET /info, GET /tokenizer).
"""

from __future__ import annotations

import json
import math
import threading
from collections import defaultdict

import requests

from .errors import BackendError
from .tokenizer import TokenizerSpec


class ScoringBackend:
    """Contract all backends satisfy.

    Attributes:
        vocab_size: number of token ids the backend can score.
        context_limit: max prefix tokens accepted (0 = unlimited); longer
            prefixes are left-truncated.
        bos_token_id: token implicitly prepended to every sequence, or None.
            Callers thread it through unchanged when building prefixes.
    """

    vocab_size: int
    context_limit: int = 0
    bos_token_id: int | None = None

    def score_continuations(self, prefix, candidates) -> list[float]:
        """log P(candidate | prefix) for each candidate, natural log.

        Entry j is the sum over the candidate's tokens of the conditional
        log probability given the prefix plus the candidate tokens before
        it. -inf is allowed only for an exact zero.
        """
        raise NotImplementedError

    def initial_prefix(self) -> list[int]:
        return [] if self.bos_token_id is None else [self.bos_token_id]

    def _check_candidates(self, candidates) -> None:
        for cand in candidates:
            if len(cand) == 0:
                raise ValueError("candidates must be non-empty")


class UniformBackend(ScoringBackend):
    """Every token is equally likely regardless of context."""

    def __init__(self, vocab_size: int, bos_token_id: int | None = None):
        if vocab_size < 1:
            raise ValueError("vocab_size must be >= 1")
        self.vocab_size = vocab_size
        self.context_limit = 0
        self.bos_token_id = bos_token_id
        self._log_p = -math.log(vocab_size)

    def score_continuations(self, prefix, candidates) -> list[float]:
        self._check_candidates(candidates)
        for cand in candidates:
            for t in cand:
                if not 0 <= t < self.vocab_size:
                    raise BackendError(f"token id {t} out of range")
        return [len(cand) * self._log_p for cand in candidates]


class NGramBackend(ScoringBackend):
    """Add-alpha n-gram model over token ids.

    Prefixes shorter than n-1 tokens are scored with the context that is
    available (implicit back-off by truncation). Probabilities are strictly
    positive for every token since alpha > 0.
    """

    def __init__(
        self,
        order: int,
        alpha: float,
        vocab_size: int,
        gram_counts: dict[tuple[int, ...], int],
        bos_token_id: int | None = None,
    ):
        if order < 1:
            raise ValueError("order must be >= 1")
        if alpha <= 0:
            raise ValueError("alpha must be > 0")
        self.order = order
        self.alpha = alpha
        self.vocab_size = vocab_size
        self.context_limit = 0
        self.bos_token_id = bos_token_id
        self.gram_counts = dict(gram_counts)
        self.context_counts: dict[tuple[int, ...], int] = defaultdict(int)
        for gram, count in self.gram_counts.items():
            self.context_counts[gram[:-1]] += count
        self.context_counts = dict(self.context_counts)

    def _context(self, prefix) -> tuple[int, ...]:
        if self.order == 1:
            return ()
        return tuple(prefix[-(self.order - 1):])

    def logp(self, token: int, prefix) -> float:
        """log P(token | prefix) under add-alpha smoothing."""
        if not 0 <= token < self.vocab_size:
            raise BackendError(f"token id {token} out of range")
        ctx = self._context(prefix)
        num = self.gram_counts.get(ctx + (token,), 0) + self.alpha
        den = self.context_counts.get(ctx, 0) + self.alpha * self.vocab_size
        return math.log(num) - math.log(den)

    def score_continuations(self, prefix, candidates) -> list[float]:
        self._check_candidates(candidates)
        prefix = list(prefix)
        out = []
        for cand in candidates:
            running = prefix
            total = 0.0
            for t in cand:
                total += self.logp(t, running)
                running = running + [t]
            out.append(total)
        return out

    def save(self, path) -> None:
        payload = {
            "format": "tokmarg-ngram",
            "order": self.order,
            "alpha": self.alpha,
            "vocab_size": self.vocab_size,
            "bos_token_id": self.bos_token_id,
            "gram_counts": {
                " ".join(map(str, gram)): count
                for gram, count in sorted(self.gram_counts.items())
            },
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f)

    @classmethod
    def load(cls, path) -> "NGramBackend":
        with open(path, encoding="utf-8") as f:
            payload = json.load(f)
        if payload.get("format") != "tokmarg-ngram":
            raise BackendError(f"{path} is not an n-gram model file")
        gram_counts = {
            tuple(int(x) for x in key.split()): count
            for key, count in payload["gram_counts"].items()
        }
        return cls(
            order=payload["order"],
            alpha=payload["alpha"],
            vocab_size=payload["vocab_size"],
            gram_counts=gram_counts,
            bos_token_id=payload.get("bos_token_id"),
        )


def train_ngram(
    corpus,
    order: int,
    alpha: float,
    vocab_size: int,
    bos_token_id: int | None = None,
) -> NGramBackend:
    """Count all m-grams for m = 1..order over token-id sequences.

    Conditional probability is (count + alpha) / (context_count + alpha*V).
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    gram_counts: dict[tuple[int, ...], int] = defaultdict(int)
    seen = False
    for seq in corpus:
        seen = True
        seq = list(seq)
        if bos_token_id is not None:
            seq = [bos_token_id] + seq
        for j in range(len(seq)):
            if bos_token_id is not None and j == 0:
                continue  # never predict the BOS itself
            for m in range(1, order + 1):
                if j + 1 >= m:
                    gram_counts[tuple(seq[j - m + 1 : j + 1])] += 1
    if not seen:
        raise ValueError("corpus must be non-empty")
    return NGramBackend(order, alpha, vocab_size, dict(gram_counts), bos_token_id)


class RemoteBackend(ScoringBackend):
    """Client for a remote scoring service.

    Wire protocol: POST {url}/score with {"prefix": [int...],
    "candidates": [[int...]...]} returning {"logprobs": [float...]}
    (natural log); GET /info for model metadata; GET /tokenizer for the
    vocab and merges the service was built with.
    """

    def __init__(self, url: str, timeout: float = 60.0, session=None):
        self.url = url.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()
        # shareable across threads: requests on one connection serialize
        self._lock = threading.Lock()
        info = self._get("/info")
        try:
            self.vocab_size = int(info["vocab_size"])
            self.context_limit = int(info["context_limit"])
            self.model_name = str(info["model_name"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(f"malformed /info response: {info!r}") from exc
        bos = info.get("bos_token_id")
        self.bos_token_id = int(bos) if bos is not None else None

    def _get(self, route: str) -> dict:
        try:
            with self._lock:
                resp = self._session.get(self.url + route, timeout=self.timeout)
            resp.raise_for_status()
            return resp.json()
        except (requests.RequestException, ValueError) as exc:
            raise BackendError(f"GET {route} failed: {exc}") from exc

    def score_continuations(self, prefix, candidates) -> list[float]:
        self._check_candidates(candidates)
        body = {
            "prefix": [int(t) for t in prefix],
            "candidates": [[int(t) for t in cand] for cand in candidates],
        }
        try:
            with self._lock:
                resp = self._session.post(
                    self.url + "/score", json=body, timeout=self.timeout
                )
            resp.raise_for_status()
            payload = resp.json()
        except (requests.RequestException, ValueError) as exc:
            raise BackendError(f"POST /score failed: {exc}") from exc
        logprobs = payload.get("logprobs") if isinstance(payload, dict) else None
        if not isinstance(logprobs, list) or len(logprobs) != len(candidates):
            raise BackendError(f"malformed /score response: {payload!r}")
        return [float(x) for x in logprobs]

    def fetch_tokenizer(self) -> TokenizerSpec:
        """Build the TokenizerSpec the remote service is serving."""
        from .tokenizer import tokenizer_from_payload

        return tokenizer_from_payload(self._get("/tokenizer"))
