import math
from fractions import Fraction

import numpy as np
import pytest

from gaitpair.analysis import chunk_histogram, split_keys
from gaitpair.attacks import (
    AttackError,
    AttackOutcome,
    bandana_pattern_attack,
    ipi_bias_attack,
    one_shot,
    popcount,
    run_guess,
    runs,
    spearman,
    video_impersonation,
    wt_attack_once,
    wt_reconciliation_attack,
)
from gaitpair.fuzzy import adversary_success
from gaitpair.ingest import NoiseModel, synth_corpus
from gaitpair.quantizers import BitSequence, IpiParams
from gaitpair.schemes import SCHEME_NAMES, make_scheme


def test_one_shot_examples():
    assert one_shot("saphe", 16).exact == Fraction(1, 65536)
    assert one_shot("saphe", 16).value == pytest.approx(1.52588e-5, abs=1e-10)
    assert one_shot("bandana", 32, 8).value == pytest.approx(0.0035, abs=5e-5)
    for name in SCHEME_NAMES:
        assert one_shot(name, 12, 12).exact == 1


def test_one_shot_matches_closed_form():
    assert one_shot("ipi", 32, 8).exact == adversary_success(32, 8).exact
    with pytest.raises(AttackError):
        one_shot("enigma", 16)
    with pytest.raises(AttackError):
        one_shot("saphe", 16, 17)


def test_outcome_invariants():
    with pytest.raises(AttackError):
        AttackOutcome("saphe", "x", 0, 0.5)
    with pytest.raises(AttackError):
        AttackOutcome("saphe", "x", 10, 1.5)
    assert AttackOutcome("saphe", "x", 100, 0.5).std_error == pytest.approx(0.05)


def test_popcount_wide_values():
    assert popcount([0, 1, 0xFF, 0x1_0000_0001]).tolist() == [0, 1, 8, 2]


# --- Walkie-Talkie leak ------------------------------------------------------------

def test_runs_and_guess():
    assert [r.tolist() for r in runs([1, 2, 3, 7, 8, 10])] == [[1, 2, 3], [7, 8], [10]]
    assert run_guess([1, 2, 3, 7, 8, 10]).tolist() == [1, 1, 1, 0, 0, 1]
    assert run_guess([1, 2, 3, 7, 8, 10], phase=0).tolist() == [0, 0, 0, 1, 1, 0]
    assert runs([]) == []


def test_single_retained_index_is_one_bit():
    for bit in (0, 1):
        victim = BitSequence([bit], "walkie-talkie", meta={"retained": [[5], [], []]})
        r = wt_attack_once(victim)
        assert r["similarity"] in (0.0, 1.0)


def test_leak_needs_retained_indices():
    with pytest.raises(AttackError):
        wt_attack_once(BitSequence([1, 0], "walkie-talkie"))
    with pytest.raises(AttackError):
        wt_reconciliation_attack([])


def test_leak_on_run_structured_victim():
    # bits that follow the run structure exactly are recovered in full
    retained = [list(range(0, 40)) + list(range(50, 90)), [], []]
    victim = BitSequence([1] * 40 + [0] * 40, "walkie-talkie", meta={"retained": retained})
    out = wt_reconciliation_attack(victim)
    assert out.similarity_distribution["mean"] == 1.0 and out.success_rate == 1.0


def test_leak_deterministic_with_callable():
    def victim(rng):
        bits = rng.integers(0, 2, 120)
        idx = np.sort(rng.choice(400, 120, replace=False))
        return BitSequence(bits, "walkie-talkie", meta={"retained": [idx, [], []]})

    a = wt_reconciliation_attack(victim, trials=5, seed=4)
    b = wt_reconciliation_attack(victim, trials=5, seed=4)
    assert a.to_dict() == b.to_dict()


# --- BANDANA pattern bias -------------------------------------------------------------

def test_pattern_attack_uniform_converges():
    trials = 1_000_000
    out = bandana_pattern_attack(np.full(16, 1 / 16), trials=trials, seed=1)
    p = adversary_success(32, 8).value
    assert abs(out.success_rate - p) <= 3 * math.sqrt(p * (1 - p) / trials)


def test_pattern_attack_degenerate():
    assert bandana_pattern_attack({"0101": 1.0}, trials=1000).success_rate == 1.0


def test_pattern_attack_skewed_corpus_histogram():
    scheme = make_scheme("bandana")
    corpus = synth_corpus(8, ("waist",), seed=2, n_cycles=36)
    keys = []
    for subj in corpus.values():
        keys += split_keys(scheme.stream(subj["waist"], seed=0), 32)
    hist = chunk_histogram(keys, 4)
    out = bandana_pattern_attack(hist, trials=200_000, seed=3)
    assert out.extra["ratio"] > 1


def test_pattern_attack_errors():
    with pytest.raises(AttackError):
        bandana_pattern_attack({"0101": 0.5})
    with pytest.raises(AttackError):
        bandana_pattern_attack(np.full(12, 1 / 12))
    with pytest.raises(AttackError):
        bandana_pattern_attack({"01": 0.5, "011": 0.5})


def test_pattern_attack_deterministic():
    h = {"0101": 0.3, "1010": 0.3, "0000": 0.4}
    assert (bandana_pattern_attack(h, trials=5000, seed=9).success_rate
            == bandana_pattern_attack(h, trials=5000, seed=9).success_rate)


# --- IPI tempo bias -------------------------------------------------------------------

def test_ipi_chunk_statistics():
    out = ipi_bias_attack(1000, 40.8, IpiParams(f_s=50, q=4, k=4), trials=2000, seed=0)
    assert abs(out.extra["identical_chunk_fraction"] - 0.63) <= 0.10
    assert abs(out.extra["chunk_change_fractions"]["1"] - 0.24) <= 0.10
    assert sum(out.extra["chunk_change_fractions"].values()) == pytest.approx(1.0)


def test_ipi_wide_spread_is_uniform():
    # sd = 10 x quantization step x 2^q in ms
    sd = 10 * 1000 / 50 * 16
    out = ipi_bias_attack(1000, sd, trials=4000, seed=1)
    frac = out.extra["identical_chunk_fraction"]
    n = 4000 * 7
    assert abs(frac - 1 / 16) <= 4 * math.sqrt(1 / 16 * 15 / 16 / n)


def test_ipi_attack_errors():
    with pytest.raises(AttackError):
        ipi_bias_attack(1000, 0)
    with pytest.raises(AttackError):
        ipi_bias_attack(1000, 40, code=(30, 8))


# --- video impersonation --------------------------------------------------------------

@pytest.mark.parametrize("name", SCHEME_NAMES)
def test_noiseless_attacker_matches(name, walk):
    model = NoiseModel("gaussian", 0.0, 1e-12)
    out = video_impersonation(walk, model, make_scheme(name), trials=3)
    assert out.similarity_distribution["mean"] == 1.0
    assert out.success_rate == 1.0


def test_video_deterministic(walk):
    s = make_scheme("ipi")
    a = video_impersonation(walk, NoiseModel(), s, trials=6, seed=5)
    b = video_impersonation([walk], NoiseModel(), s, trials=6, seed=5)
    assert a.to_dict() == b.to_dict()
    assert a.extra["noise"]["sigma"] == NoiseModel().sigma


def test_video_errors(walk):
    with pytest.raises(AttackError):
        video_impersonation(walk, NoiseModel(), make_scheme("ipi"), trials=0)
    with pytest.raises(AttackError):
        video_impersonation([], NoiseModel(), make_scheme("ipi"))


# --- Spearman -------------------------------------------------------------------------

def test_spearman_examples():
    a = [3.0, 1.0, 4.0, 1.5, 9.0]
    assert spearman(a, a) == pytest.approx(1.0)
    assert spearman(a, [-x for x in a]) == pytest.approx(-1.0)
    assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)


def test_spearman_errors():
    with pytest.raises(ValueError):
        spearman([1, 2, 3], [1, 2])
    with pytest.raises(ValueError):
        spearman([1, 2], [1, 2])
    with pytest.raises(ValueError):
        spearman([1, 1, 1], [1, 2, 3])
