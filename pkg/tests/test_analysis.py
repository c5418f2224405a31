import csv
import math

import numpy as np
import pytest

from tokmarg import (
    UniformBackend,
    bin_blocks_by_q_default,
    block_frequency_table,
    block_observations,
    dataset_report,
    default_tokenize,
    draw_tokenization_samples,
    estimate_marginal,
    length_by_frequency_report,
    split_in_blocks,
    train_ngram,
)
from tokmarg.analysis import (
    BlockObservation,
    write_bins_csv,
    write_dataset_csv,
    write_scatter_csv,
)
from tokmarg.estimator import LN2


def test_single_byte_vocab_all_blocks_in_top_bin(single_byte_spec):
    backend = UniformBackend(256)
    bins = bin_blocks_by_q_default(
        single_byte_spec, backend, [b"some plain words here"], 8, None
    )
    total = sum(b.count for b in bins)
    top = bins[0]
    assert top.label == ">0.999"
    assert top.count == total == 4
    assert all(b.count == 0 for b in bins[1:])


def test_bin_frequencies_sum_to_one(english_spec):
    backend = UniformBackend(english_spec.vocab_size)
    sequences = [b"the thing and then", b"more things in the end"]
    bins = bin_blocks_by_q_default(english_spec, backend, sequences, 8, None)
    total = sum(b.count for b in bins)
    assert total == sum(
        len(split_in_blocks(english_spec, s, 8)) for s in sequences
    )
    assert sum(b.frequency(total) for b in bins) == pytest.approx(1.0, abs=1e-9)
    for b in bins:
        assert len(b.examples) <= 8


def test_bins_respect_custom_bounds(english_spec):
    backend = UniformBackend(english_spec.vocab_size)
    bins = bin_blocks_by_q_default(
        english_spec, backend, [b"the thing"], 8, None, bin_bounds=(0.5, 0.0)
    )
    assert [b.label for b in bins] == [">0.5", "0-0.5"]
    with pytest.raises(ValueError):
        bin_blocks_by_q_default(
            english_spec, backend, [b"the"], 8, None, bin_bounds=(0.2, 0.7, 0.0)
        )


def test_peaked_backend_concentrates_mass_higher(english_spec):
    # An n-gram trained on the evaluated text itself strongly prefers the
    # default tokenization, so high bins gain mass versus the uniform.
    text = b"the thing and the other thing in the end"
    ids = list(default_tokenize(english_spec, text).token_ids)
    backend = train_ngram(
        [ids] * 50, order=2, alpha=0.01, vocab_size=english_spec.vocab_size
    )
    uniform = UniformBackend(english_spec.vocab_size)
    peaked_bins = bin_blocks_by_q_default(english_spec, backend, [text], 10, None)
    uniform_bins = bin_blocks_by_q_default(english_spec, uniform, [text], 10, None)
    top2_peaked = peaked_bins[0].count + peaked_bins[1].count
    top2_uniform = uniform_bins[0].count + uniform_bins[1].count
    assert top2_peaked >= top2_uniform
    assert peaked_bins[0].count > 0


# -- length-by-frequency report -------------------------------------------------


def test_freq_report_matches_constructed_split():
    observations = [
        BlockObservation(b"common", True, 1),
        BlockObservation(b"common", True, 1),
        BlockObservation(b"common", False, 2),
        BlockObservation(b"rare", False, 3),
    ]
    table = {b"common": 0.9, b"rare": 1e-6}
    report = length_by_frequency_report(observations, table, threshold=1e-4)
    high, low = report[">=0.0001"], report["<0.0001"]
    assert high["share_of_blocks"] == pytest.approx(0.75)
    assert low["share_of_blocks"] == pytest.approx(0.25)
    assert high["sampled_default"] == pytest.approx(2 / 3)
    assert high["sampled_len_1"] == pytest.approx(2 / 3)
    assert high["sampled_len_2"] == pytest.approx(1 / 3)
    assert low["sampled_len_3_plus"] == pytest.approx(1.0)


def test_freq_report_columns_sum_to_one(english_spec):
    backend = UniformBackend(english_spec.vocab_size)
    sequences = [b"the thing and then some", b"the end of things"]
    table = block_frequency_table(english_spec, sequences, 8)
    assert sum(table.values()) == pytest.approx(1.0)
    observations = []
    for i, s in enumerate(sequences):
        blocks = split_in_blocks(english_spec, s, 8)
        samples = draw_tokenization_samples(
            english_spec, backend, blocks, k=5, max_candidates=None, seed=4,
            sequence_index=i,
        )
        observations.extend(block_observations(samples, blocks))
    report = length_by_frequency_report(observations, table, threshold=0.05)
    assert sum(col["share_of_blocks"] for col in report.values()) == pytest.approx(
        1.0, abs=1e-9
    )
    for col in report.values():
        assert col["sampled_default"] + col["sampled_non_default"] == pytest.approx(
            1.0, abs=1e-9
        )
        assert col["sampled_len_1"] + col["sampled_len_2"] + col[
            "sampled_len_3_plus"
        ] == pytest.approx(1.0, abs=1e-9)


def test_freq_report_single_column_when_all_above_threshold():
    observations = [BlockObservation(b"word", True, 1)] * 4
    report = length_by_frequency_report(observations, {b"word": 0.5}, 1e-4)
    assert list(report) == [">=0.0001"]
    assert report[">=0.0001"]["share_of_blocks"] == pytest.approx(1.0)


# -- dataset report -------------------------------------------------------------


def _toy_estimates(cab_spec):
    backend = UniformBackend(6)
    return [
        estimate_marginal(
            cab_spec, backend, b"cab", k=6, max_candidates=10, max_block_len=3,
            seed=seed,
        )
        for seed in (0, 1)
    ]


def test_dataset_report_single_sequence_passthrough(cab_spec):
    est = _toy_estimates(cab_spec)[0]
    report = dataset_report([est])
    assert report.n_sequences == 1
    assert report.bpc_df == pytest.approx(est.bpc_df)
    assert report.bpc_is == pytest.approx(est.bpc_is)
    assert report.pct_nd == pytest.approx(est.pct_nd)
    assert report.scatter[0][0] == pytest.approx(est.bpc_df - est.ci[1])
    assert report.scatter[0][1] == pytest.approx(est.ci[1] - est.ci[0])


def test_dataset_report_duplicate_sequence_matches_single(cab_spec):
    est = _toy_estimates(cab_spec)[0]
    single = dataset_report([est])
    double = dataset_report([est, est])
    assert double.bpc_df == pytest.approx(single.bpc_df)
    assert double.bpc_is == pytest.approx(single.bpc_is)
    assert double.rel_gap == pytest.approx(single.rel_gap)
    assert double.pct_nd == pytest.approx(single.pct_nd)
    assert double.n_sequences == 2


def test_dataset_report_is_permutation_invariant(cab_spec):
    a, b = _toy_estimates(cab_spec)
    fwd = dataset_report([a, b])
    rev = dataset_report([b, a])
    assert fwd.bpc_df == pytest.approx(rev.bpc_df)
    assert fwd.bpc_is == pytest.approx(rev.bpc_is)
    assert fwd.pct_nd == pytest.approx(rev.pct_nd)


def test_dataset_report_aggregates_total_bits_over_total_chars(cab_spec):
    a, b = _toy_estimates(cab_spec)
    report = dataset_report([a, b])
    bits_df = (-a.log_p_default - b.log_p_default) / LN2
    chars = a.char_count + b.char_count
    assert report.bpc_df == pytest.approx(bits_df / chars)


def test_dataset_report_rejects_empty_input():
    with pytest.raises(ValueError):
        dataset_report([])


def test_csv_writers_produce_parseable_files(tmp_path, cab_spec, english_spec):
    report = dataset_report(_toy_estimates(cab_spec))
    table_path = tmp_path / "table.csv"
    scatter_path = tmp_path / "scatter.csv"
    write_dataset_csv(report, table_path)
    write_scatter_csv(report, scatter_path)
    with open(table_path) as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["bpc_df", "bpc_is", "bpc_gap", "rel_gap_pct", "pct_nd"]
    assert float(rows[1][0]) == pytest.approx(report.bpc_df, abs=1e-6)
    with open(scatter_path) as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["gap_ci_left", "ci_width"]
    assert len(rows) == 1 + report.n_sequences

    backend = UniformBackend(english_spec.vocab_size)
    bins = bin_blocks_by_q_default(english_spec, backend, [b"the thing"], 8, None)
    bins_path = tmp_path / "bins.csv"
    write_bins_csv(bins, bins_path)
    with open(bins_path) as f:
        rows = list(csv.reader(f))
    assert rows[0][0] == "bin"
    assert len(rows) == 1 + len(bins)
