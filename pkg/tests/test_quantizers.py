import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaitpair.ingest import AccelSeries
from gaitpair.quantizers import (
    BandanaParams,
    BitSequence,
    IpiParams,
    QuantizerError,
    ReconciliationAbort,
    SapheParams,
    WalkieTalkieParams,
    bandana_from_cycles,
    bandana_quantize,
    bandana_select,
    gray,
    gray_bits,
    ipi_bits,
    ipi_quantize,
    map_pairs,
    rejection_table_from_histogram,
    saphe_commit,
    saphe_quantize,
    saphe_thresholds,
    segment_bits,
    wt_preprocess,
    wt_privacy_amplify,
    wt_quantize,
    wt_quantize_values,
    wt_reconcile,
)
from gaitpair.signal import HeelStrikes


def flat(value=0.0, n=500, rate=50.0):
    t = np.arange(n) / rate
    return AccelSeries(t, np.column_stack([np.zeros(n), np.zeros(n), np.full(n, value)]), rate)


# --- SAPHE --------------------------------------------------------------------------

def test_saphe_thresholds_are_deterministic():
    p = SapheParams(n_thresholds=32, seed=5)
    np.testing.assert_array_equal(saphe_thresholds(p, 10.0), saphe_thresholds(p, 10.0))


def test_saphe_threshold_ranges():
    th = saphe_thresholds(SapheParams(n_thresholds=1000, range_g=1.0, seed=1), 10.0)
    assert th.shape == (1000, 2)
    assert np.all(np.abs(th[:, 1]) <= 9.81)
    assert np.all((th[:, 0] >= 0) & (th[:, 0] < 10.0))
    assert np.all(np.diff(th[:, 0]) >= 0)
    dyn = saphe_thresholds(SapheParams(n_thresholds=1000, seed=1, dynamic_range=True), 10.0, (-2.0, 3.0))
    assert dyn[:, 1].min() >= -2.0 and dyn[:, 1].max() <= 3.0


def test_saphe_threshold_mean_oracle():
    n = 10_000
    th = saphe_thresholds(SapheParams(n_thresholds=n, seed=3), 60.0)
    width = 2 * 9.81
    assert abs(th[:, 1].mean()) <= 3 * width / np.sqrt(12 * n)


def test_saphe_threshold_errors():
    with pytest.raises(QuantizerError):
        saphe_thresholds(SapheParams(), 0.0)
    with pytest.raises(QuantizerError):
        saphe_thresholds(SapheParams(dynamic_range=True), 5.0)
    with pytest.raises(QuantizerError):
        SapheParams(n_thresholds=0)
    with pytest.raises(QuantizerError):
        SapheParams(range_g=0)


def test_saphe_constant_signal():
    th = np.column_stack([np.linspace(0, 9, 8), np.full(8, -1.0)])
    assert saphe_quantize(flat(), th).bits.tolist() == [1] * 8
    th[:, 1] = 1.0
    assert saphe_quantize(flat(), th).bits.tolist() == [0] * 8


def test_saphe_nearest_sample_lookup():
    n = 100
    t = np.arange(n) / 50.0
    s = AccelSeries(t, np.column_stack([np.zeros(n), np.zeros(n), np.arange(n, dtype=float)]), 50.0)
    # 0.029 s is nearest to sample 1, 0.031 s to sample 2
    th = np.array([[0.029, 1.5], [0.031, 1.5]])
    assert saphe_quantize(s, th).bits.tolist() == [0, 1]


def test_saphe_threshold_outside_span():
    with pytest.raises(QuantizerError):
        saphe_quantize(flat(n=50), [[1.5, 0.0]])


def test_saphe_same_series_same_bits(walk):
    th = saphe_thresholds(SapheParams(n_thresholds=64, seed=2), walk.duration)
    assert np.array_equal(saphe_quantize(walk, th).bits, saphe_quantize(walk, th).bits)


def test_saphe_commit():
    assert saphe_commit(1) == saphe_commit(1)
    assert saphe_commit(1) != saphe_commit(2)
    assert len(saphe_commit(7)) == 32


# --- Walkie-Talkie / Gait-Key -----------------------------------------------------------

def test_wt_single_outlier_window():
    seq = wt_quantize_values([0] * 9 + [10], WalkieTalkieParams(alpha=0.8, window=10))
    assert seq.bits.tolist() == [1]
    assert seq.meta["retained"][0].tolist() == [9]


def test_wt_constant_window_contributes_nothing():
    assert len(wt_quantize_values([3.0] * 20)) == 0


def test_wt_huge_alpha_empties_output(walk):
    assert len(wt_quantize(wt_preprocess(walk), WalkieTalkieParams(alpha=1e6))) == 0


def test_wt_retained_fraction_decreases_with_alpha(walk):
    pre = wt_preprocess(walk)
    counts = [len(wt_quantize(pre, WalkieTalkieParams(alpha=a))) for a in (0.2, 0.5, 0.8, 1.1, 1.5)]
    assert counts == sorted(counts, reverse=True)


def test_wt_preprocess_normalizes_axes(walk):
    pre = wt_preprocess(walk)
    np.testing.assert_allclose(pre.acc.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(pre.acc, axis=0), 1, atol=1e-12)


def test_wt_interleaves_axes_round_robin():
    n = 20
    t = np.arange(n) / 50.0
    x = np.tile([0] * 9 + [10.0], 2)       # one high per window
    y = np.tile([10.0] * 9 + [0], 2)       # one low per window
    z = np.zeros(n)
    seq = wt_quantize(AccelSeries(t, np.column_stack([x, y, z]), 50.0), WalkieTalkieParams())
    assert seq.bits.tolist() == [1, 0, 1, 0]


def test_gait_key_symbols():
    p = WalkieTalkieParams.gait_key(window=4, alpha=0.5)
    seq = wt_quantize_values([-3.0, -0.1, 0.1, 3.0], p)
    # lowest band to highest: 00, 01, 11, 10
    assert seq.bits.tolist() == [0, 0, 0, 1, 1, 1, 1, 0]
    assert (p.alpha, p.window, p.levels) == (0.5, 4, 4)
    assert WalkieTalkieParams.gait_key().alpha == 0.9


def test_wt_param_validation():
    for kw in ({"alpha": 0}, {"window": 1}, {"levels": 3}, {"pa_window": 0}):
        with pytest.raises(QuantizerError):
            WalkieTalkieParams(**kw)


def _seq(retained, bits):
    return BitSequence(np.array(bits, np.uint8), "walkie-talkie", None,
                       {"retained": [np.array(retained)], "symbols": [np.array(bits, np.uint8)[:, None]]})


def test_reconcile_identical_meta_is_identity(walk):
    q = wt_quantize(wt_preprocess(walk))
    ra, rb = wt_reconcile(q, q)
    assert np.array_equal(ra.bits, q.bits) and np.array_equal(rb.bits, q.bits)


def test_reconcile_keeps_shared_positions():
    a = _seq(list(range(10)), [1, 0] * 5)
    b = _seq(list(range(1, 10)) + [12], [0] * 10)
    ra, rb = wt_reconcile(a, b)
    assert ra.bits.tolist() == [0, 1, 0, 1, 0, 1, 0, 1, 0]
    assert ra.meta["overlap"] == pytest.approx(0.9)


def test_reconcile_disjoint_aborts():
    with pytest.raises(ReconciliationAbort):
        wt_reconcile(_seq([0, 1], [1, 1]), _seq([2, 3], [1, 1]))


def test_reconcile_abort_at_boundary():
    # 11 of 20 shared: 0.55 <= 0.6 aborts
    a = _seq(list(range(20)), [1] * 20)
    b = _seq(list(range(11)) + list(range(100, 109)), [1] * 20)
    with pytest.raises(ReconciliationAbort) as info:
        wt_reconcile(a, b, WalkieTalkieParams(epsilon=0.1))
    assert info.value.overlap == pytest.approx(0.55)
    ra, _ = wt_reconcile(a, b, WalkieTalkieParams(epsilon=0.1), abort=False)
    assert len(ra) == 11


def test_privacy_amplification_examples():
    w = np.random.default_rng(0).integers(0, 2, 30)
    assert wt_privacy_amplify(np.tile(w, 2), 30).bits.tolist() == [0] * 30
    assert wt_privacy_amplify(np.concatenate([w, 1 - w]), 30).bits.tolist() == [1] * 30


def test_privacy_amplification_oracle():
    bits = np.random.default_rng(1).integers(0, 2, 95)
    out = wt_privacy_amplify(bits, 30).bits
    assert len(out) == 60
    assert out.tolist() == [int(bits[i]) ^ int(bits[i + 30]) for i in range(60)]
    with pytest.raises(QuantizerError):
        wt_privacy_amplify(bits[:59], 30)


# --- BANDANA ------------------------------------------------------------------------

def test_bandana_equal_cycles_give_zero_bits():
    cycles = np.tile(np.sin(np.linspace(0, 6, 40)), (12, 1))
    seq = bandana_from_cycles(cycles, cycles[0])
    assert seq.bits.tolist() == [0] * 48
    assert np.all(seq.meta["reliability"] == 0)


def test_bandana_positive_offset_gives_ones():
    mean = np.zeros(40)
    bits, rel = segment_bits(np.vstack([mean + 1.0, mean - 1.0]), mean)
    assert bits.tolist() == [1, 1, 1, 1, 0, 0, 0, 0]
    np.testing.assert_allclose(rel, 10.0)


def test_map_pairs_keeps_second_bit():
    assert map_pairs([0, 1, 0, 1]).tolist() == [1, 1]
    assert map_pairs([1, 0, 0, 0]).tolist() == [0, 0]
    assert map_pairs([1, 1, 1, 0]).tolist() == [1, 0]
    bits, rel = map_pairs([0, 1, 1, 0], [1.0, 2.0, 3.0, 4.0])
    assert bits.tolist() == [1, 0] and rel.tolist() == [3.0, 7.0]
    with pytest.raises(QuantizerError):
        map_pairs([1, 0, 1])


def test_bandana_param_invariants():
    assert BandanaParams().selection == (32, 16)
    assert BandanaParams(variant="mapping").selection == (16, 8)
    with pytest.raises(QuantizerError):
        BandanaParams(n_cycles=11)
    with pytest.raises(QuantizerError):
        BandanaParams(variant="other")


def test_bandana_quantize_lengths(walk):
    assert len(bandana_quantize(walk)) == 48
    assert len(bandana_quantize(walk, BandanaParams(variant="mapping"))) == 24


def test_bandana_needs_enough_cycles():
    from gaitpair.ingest import synth_gait
    with pytest.raises(QuantizerError, match="insufficient cycles"):
        bandana_quantize(synth_gait(1.0, 8, 50.0, seed=1, shape_jitter=0.2))


def _bandana_seq(rel):
    rel = np.asarray(rel, float)
    return BitSequence(np.arange(rel.size) % 2, "bandana", None,
                       {"order": np.argsort(-rel, kind="stable"), "reliability": rel})


def test_select_with_identical_orderings_drops_least_reliable():
    rel = np.random.default_rng(4).random(48)
    a = _bandana_seq(rel)
    fa, fb = bandana_select(a, a)
    dropped = set(range(48)) - set(fa.meta["kept_positions"].tolist())
    assert dropped == set(np.argsort(rel)[:16].tolist())
    assert len(fa) == len(fb) == 32


def test_select_tie_drops_lower_index_first():
    # all reliabilities equal -> each position's two ranks sum to 2*i
    a = _bandana_seq(np.ones(48))
    b = BitSequence(a.bits, "bandana", None, {"order": np.arange(48)[::-1]})
    fa, _ = bandana_select(a, b)
    # combined rank is 47 everywhere; the 16 lowest indices go first
    assert fa.meta["kept_positions"].tolist() == list(range(16, 48))


def test_select_length_errors():
    a = _bandana_seq(np.ones(48))
    b = _bandana_seq(np.ones(46))
    with pytest.raises(QuantizerError):
        bandana_select(a, b)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=48, max_size=48), st.lists(st.floats(0, 10), min_size=48, max_size=48))
def test_select_always_yields_32_in_position_order(ra, rb):
    fa, fb = bandana_select(_bandana_seq(ra), _bandana_seq(rb))
    kept = fa.meta["kept_positions"]
    assert len(fa) == len(fb) == 32
    assert np.all(np.diff(kept) > 0)


def test_rejection_table_flattens():
    table = rejection_table_from_histogram({"0011": 0.5, "0101": 0.25, "1111": 0.25})
    assert table == {"0011": 0.5, "0101": 0.0, "1111": 0.0}


def test_normalized_variant_with_rejection(walk):
    p = BandanaParams(variant="normalized", rejection_table={"0000": 1.0}, seed=3)
    seq = bandana_quantize(walk, p)
    assert len(seq) == 48
    kept = seq.meta["raw_patterns"][seq.meta["cycles"]]
    assert not any("".join(map(str, row)) == "0000" for row in kept)


# --- IPI --------------------------------------------------------------------------------

def test_ipi_worked_example():
    assert ipi_bits([1000.0], IpiParams(m=1, q=4, k=4, f_s=50)).bits.tolist() == [0, 0, 1, 1]


def test_ipi_keeps_first_k_bits():
    assert ipi_bits([1000.0, 1020.0], IpiParams(k=2)).bits.tolist() == [0, 0, 0, 0]


def test_gray_adjacency():
    for q in (1, 2, 4, 6):
        words = gray_bits(np.arange(2**q), q)
        assert np.all((words[1:] != words[:-1]).sum(axis=1) == 1)
    assert gray(2) == 3


def test_ipi_from_strikes():
    strikes = HeelStrikes(np.array([0, 50, 101]), ("unknown", "left", "right"), 50.0)
    seq = ipi_quantize(strikes, IpiParams())
    # 1000 ms -> 2 -> 0011 ; 1020 ms -> 51 mod 16 = 3 -> gray 0010
    assert seq.bits.tolist() == [0, 0, 1, 1, 0, 0, 1, 0]
    with pytest.raises(QuantizerError):
        ipi_quantize(HeelStrikes(np.array([0]), ("unknown",), 50.0))


def test_ipi_param_validation():
    for kw in ({"q": 0}, {"k": 5}, {"k": 0}, {"f_s": 0}):
        with pytest.raises(QuantizerError):
            IpiParams(**kw)


def test_synthetic_ipis_repeat_chunks():
    from gaitpair.attacks import synth_ipis
    from gaitpair.analysis import chunk_repeat_rate

    ipis = synth_ipis(1000.0, 40.8, 200, np.random.default_rng(8))
    assert chunk_repeat_rate([ipi_bits(ipis).bits], 4) >= 0.55
