"""Aggregate analyses over sequences, blocks and per-sequence estimates.

Three reports: binning block occurrences by the proposal probability of
their default tokenization, the sampled-tokenization length distribution
split by block corpus frequency, and the dataset-level summary (BPC
columns plus per-sequence confidence-interval scatter data).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .estimator import LN2, MarginalEstimate, estimate_record
from .lm import ScoringBackend
from .sampler import TokenizationSample
from .segmenter import Block, split_in_blocks
from .tokenizer import TokenizerSpec, default_tokenize, enumerate_tokenizations
from .errors import UntokenizableSpanError

# Lower bin bounds, descending; the last must be 0. A value q lands in the
# first bin whose bound it exceeds (the bottom bin is inclusive of 0).
DEFAULT_Q_BINS = (0.999, 0.99, 0.9, 0.5, 0.0)


@dataclass
class QDefaultBin:
    label: str
    lower: float
    upper: float
    count: int = 0
    examples: list[str] = field(default_factory=list)

    def frequency(self, total: int) -> float:
        return self.count / total if total else 0.0


def _make_bins(bounds) -> list[QDefaultBin]:
    bounds = tuple(bounds)
    if len(bounds) < 1 or bounds[-1] != 0.0:
        raise ValueError("bin bounds must end at 0.0")
    if list(bounds) != sorted(bounds, reverse=True) or len(set(bounds)) != len(bounds):
        raise ValueError("bin bounds must be strictly descending")
    if bounds[0] >= 1.0:
        raise ValueError("top bin bound must be below 1.0")
    bins = []
    upper = 1.0
    for bound in bounds:
        label = f">{bound:g}" if upper == 1.0 else f"{bound:g}-{upper:g}"
        bins.append(QDefaultBin(label=label, lower=bound, upper=upper))
        upper = bound
    return bins


def bin_blocks_by_q_default(
    spec: TokenizerSpec,
    backend: ScoringBackend,
    sequences,
    max_block_len: int,
    max_candidates: int | None,
    bin_bounds=DEFAULT_Q_BINS,
    examples_per_bin: int = 8,
) -> list[QDefaultBin]:
    """Tally block occurrences by the proposal weight of their default.

    The weight is the normalized score of the block's default tokenization
    among its candidates, conditioning on the default tokenization of the
    preceding blocks, which makes the statistic independent of any sampled
    path.
    """
    bins = _make_bins(bin_bounds)
    for s in sequences:
        blocks = split_in_blocks(spec, s, max_block_len)
        prefix = backend.initial_prefix()
        for block in blocks:
            cset = enumerate_tokenizations(spec, block.data, max_candidates)
            try:
                default_ids = default_tokenize(spec, block.data).token_ids
            except UntokenizableSpanError:
                default_ids = None
            raw = np.asarray(
                backend.score_continuations(
                    prefix, [c.token_ids for c in cset.candidates]
                ),
                dtype=float,
            )
            weights = np.exp(raw - logsumexp(raw))
            rank = None
            if default_ids is not None:
                for i, cand in enumerate(cset.candidates):
                    if cand.token_ids == default_ids:
                        rank = i
                        break
            q_default = float(weights[rank]) if rank is not None else 0.0

            for b in bins:
                if q_default > b.lower or b.lower == 0.0:
                    b.count += 1
                    if len(b.examples) < examples_per_bin:
                        b.examples.append(
                            block.data.decode("utf-8", errors="replace")
                        )
                    break
            # Advance along the default path; cropped blocks without a
            # standalone default fall back to the leading candidate.
            advance = default_ids if default_ids is not None else (
                cset.candidates[0].token_ids
            )
            prefix = prefix + list(advance)
    return bins


# -- sampled length by block frequency ---------------------------------------


@dataclass(frozen=True)
class BlockObservation:
    """One sampled block occurrence: its text and what was drawn for it."""

    text: bytes
    is_default: bool
    token_count: int


def block_observations(
    samples: list[TokenizationSample], blocks: list[Block]
) -> list[BlockObservation]:
    """Flatten sampler output into per-(sample, block) observations."""
    out = []
    for sample in samples:
        for choice in sample.blocks:
            out.append(
                BlockObservation(
                    text=blocks[choice.index].data,
                    is_default=choice.is_default,
                    token_count=choice.token_count,
                )
            )
    return out


def block_frequency_table(
    spec: TokenizerSpec, texts, max_block_len: int
) -> dict[bytes, float]:
    """Relative frequency of each block's text across the corpus."""
    counts: dict[bytes, int] = {}
    total = 0
    for text in texts:
        for block in split_in_blocks(spec, text, max_block_len):
            counts[block.data] = counts.get(block.data, 0) + 1
            total += 1
    return {text: c / total for text, c in counts.items()}


FREQ_REPORT_ROWS = (
    "share_of_blocks",
    "sampled_default",
    "sampled_non_default",
    "sampled_len_1",
    "sampled_len_2",
    "sampled_len_3_plus",
)


def length_by_frequency_report(
    observations,
    frequency_table: dict[bytes, float],
    threshold: float = 1e-4,
) -> dict[str, dict[str, float]]:
    """Sampled-tokenization statistics split by block corpus frequency.

    Columns: blocks at or above the frequency threshold, and below it
    (missing groups are omitted). Rows: the share of block occurrences in
    the group, the default/non-default split of sampled tokenizations, and
    the sampled token-count distribution (1, 2, >=3).
    """
    groups: dict[str, list[BlockObservation]] = {}
    for obs in observations:
        freq = frequency_table.get(obs.text, 0.0)
        key = f">={threshold:g}" if freq >= threshold else f"<{threshold:g}"
        groups.setdefault(key, []).append(obs)

    total = sum(len(g) for g in groups.values())
    report: dict[str, dict[str, float]] = {}
    for key in (f">={threshold:g}", f"<{threshold:g}"):
        members = groups.get(key)
        if not members:
            continue
        n = len(members)
        defaults = sum(1 for o in members if o.is_default)
        len1 = sum(1 for o in members if o.token_count == 1)
        len2 = sum(1 for o in members if o.token_count == 2)
        report[key] = {
            "share_of_blocks": n / total,
            "sampled_default": defaults / n,
            "sampled_non_default": (n - defaults) / n,
            "sampled_len_1": len1 / n,
            "sampled_len_2": len2 / n,
            "sampled_len_3_plus": (n - len1 - len2) / n,
        }
    return report


# -- dataset-level summary ----------------------------------------------------


@dataclass(frozen=True)
class DatasetReport:
    """Dataset aggregate: total bits over total characters, plus scatter."""

    n_sequences: int
    bpc_df: float
    bpc_is: float
    bpc_gap: float
    rel_gap: float
    pct_nd: float
    scatter: tuple[tuple[float, float], ...]


def _as_record(estimate) -> dict:
    if isinstance(estimate, MarginalEstimate):
        return estimate_record(estimate)
    return estimate


def dataset_report(estimates) -> DatasetReport:
    """Aggregate per-sequence estimates into the dataset summary.

    BPC columns aggregate as total bits over total characters. The scatter
    rows pair each sequence's left gap-CI limit (positive means the gap is
    confidently positive) with its CI width.
    """
    records = [_as_record(e) for e in estimates]
    if not records:
        raise ValueError("no estimates to aggregate")
    bits_df = 0.0
    bits_is = 0.0
    chars = 0
    nd_weighted = 0.0
    weight = 0.0
    scatter = []
    for rec in records:
        chars += rec["char_count"]
        bits_df += -rec["log_p_default"] / LN2
        bits_is += -rec["log_p_marginal_hat"] / LN2
        w = rec["k"] * rec["n_blocks"]
        nd_weighted += rec["pct_nd"] * w
        weight += w
        ci_low, ci_high = rec["ci"]
        scatter.append((rec["bpc_df"] - ci_high, ci_high - ci_low))
    bpc_df = bits_df / chars
    bpc_is = bits_is / chars
    return DatasetReport(
        n_sequences=len(records),
        bpc_df=bpc_df,
        bpc_is=bpc_is,
        bpc_gap=bpc_df - bpc_is,
        rel_gap=(bpc_df - bpc_is) / bpc_df if bpc_df else 0.0,
        pct_nd=nd_weighted / weight if weight else 0.0,
        scatter=tuple(scatter),
    )


# -- file emission -------------------------------------------------------------


def write_dataset_csv(report: DatasetReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["bpc_df", "bpc_is", "bpc_gap", "rel_gap_pct", "pct_nd"])
        writer.writerow(
            [
                f"{report.bpc_df:.6f}",
                f"{report.bpc_is:.6f}",
                f"{report.bpc_gap:.6f}",
                f"{100 * report.rel_gap:.4f}",
                f"{100 * report.pct_nd:.4f}",
            ]
        )


def write_scatter_csv(report: DatasetReport, path) -> None:
    """Plot-ready rows: x = left limit of the gap CI, y = interval width."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["gap_ci_left", "ci_width"])
        for x, y in report.scatter:
            writer.writerow([f"{x:.8f}", f"{y:.8f}"])


def write_bins_csv(bins: list[QDefaultBin], path) -> None:
    total = sum(b.count for b in bins)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["bin", "count", "frequency", "examples"])
        for b in bins:
            writer.writerow(
                [b.label, b.count, f"{b.frequency(total):.6f}", "; ".join(b.examples)]
            )
