"""
Tests for the entropy estimators and their incremental traces.
"""

import math
from collections import Counter, deque
from datetime import date, timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.random import PCG64, Generator

from crowdsense.domain.Entropy import CountTable, EntropyConfig
from crowdsense.domain.Symbols import SymbolSequence
from crowdsense.exceptions import EmptyInputException, TooShortException, ValidationException
from crowdsense.service import entropy_service

pytestmark = pytest.mark.entropy

THURSDAY = date(2015, 9, 3)


def _brute_shannon(symbols):
    n = len(symbols)
    return -sum((c / n) * math.log2(c / n) for c in Counter(symbols).values())


def _naive_lambdas(symbols):
    """Shortest new substring at each position, by exhaustive search."""
    n = len(symbols)
    out = []
    for p in range(1, n):
        prefix = symbols[:p]
        lam = None
        for length in range(1, n - p + 1):
            sub = symbols[p:p + length]
            seen = any(prefix[j:j + length] == sub for j in range(0, p - length + 1))
            if not seen:
                lam = length
                break
        out.append(lam if lam is not None else n - p + 1)
    return out


def _random_symbols(n, alphabet, seed):
    rng = Generator(PCG64(seed))
    return rng.integers(0, alphabet, n).tolist()


def _thursday_sequence(days, slots, symbols):
    entries = []
    it = iter(symbols)
    for d in range(days):
        day = THURSDAY + timedelta(days=7 * d)
        for slot in range(slots):
            entries.append((day, slot, next(it)))
    return SymbolSequence(3, 0, entries)


class TestBatchEstimators:
    """Test Shannon, Hartley and Grassberger on whole sequences"""

    def test_shannon_small(self):
        """Test [a, a, b] has entropy about 0.918296 bits"""
        assert entropy_service.shannon("aab") == pytest.approx(0.918296, abs=1e-6)

    def test_shannon_constant(self):
        """Test a constant sequence has zero entropy"""
        assert entropy_service.shannon([5] * 40) == 0.0

    def test_shannon_matches_counter(self):
        """Test Shannon agrees with a direct Counter computation"""
        symbols = _random_symbols(500, 9, seed=4)
        assert entropy_service.shannon(symbols) == pytest.approx(_brute_shannon(symbols), abs=1e-12)

    def test_shannon_from_count_table(self):
        """Test a CountTable gives the same value as its sequence"""
        table = CountTable({"a": 2, "b": 1})
        assert entropy_service.shannon(table) == pytest.approx(entropy_service.shannon("aab"), abs=1e-12)

    def test_hartley(self):
        """Test Hartley is log2 of the distinct symbol count"""
        assert entropy_service.hartley("abcabcd") == pytest.approx(2.0)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(min_value=0, max_value=12), min_size=1, max_size=200))
    def test_hartley_bounds_shannon(self, symbols):
        """Test 0 <= Shannon <= Hartley"""
        h = entropy_service.shannon(symbols)
        assert 0.0 <= h <= entropy_service.hartley(symbols) + 1e-12

    def test_empty_raises(self):
        """Test empty sequences raise EmptyInputException"""
        with pytest.raises(EmptyInputException):
            entropy_service.shannon([])
        with pytest.raises(EmptyInputException):
            entropy_service.hartley([])

    def test_match_lengths_against_oracle(self):
        """Test match lengths agree with exhaustive search"""
        for seed in range(5):
            symbols = _random_symbols(120, 3, seed)
            assert entropy_service.match_lengths(symbols) == _naive_lambdas(symbols)

    def test_match_lengths_small(self):
        """Test match lengths on hand-checked strings"""
        assert entropy_service.match_lengths("abab") == _naive_lambdas(list("abab"))
        assert entropy_service.match_lengths("aaaa") == [2, 3, 2]

    def test_grassberger_order_sensitive(self):
        """Test same counts in a different order give a different rate"""
        assert entropy_service.grassberger("abababab") != entropy_service.grassberger("aaaabbbb")
        assert entropy_service.shannon("abababab") == entropy_service.shannon("aaaabbbb")

    def test_grassberger_constant(self):
        """Test a constant sequence has a rate near zero"""
        assert entropy_service.grassberger("a" * 1000) < 0.2

    def test_grassberger_uniform(self):
        """Test 10^4 uniform symbols over 4 letters estimate about 1.73 bits, biased below 2"""
        symbols = _random_symbols(10_000, 4, seed=0)
        assert 1.69 < entropy_service.grassberger(symbols) < 1.77

    def test_grassberger_too_short(self):
        """Test one symbol is too short for a rate estimate"""
        with pytest.raises(TooShortException):
            entropy_service.grassberger([1])

    def test_estimate_dispatch(self):
        """Test estimate picks the estimator by name"""
        assert entropy_service.estimate("aab", "hartley") == pytest.approx(1.0)
        with pytest.raises(ValidationException):
            entropy_service.estimate("aab", "renyi")


class TestSlidingShannon:
    """Test the incremental accumulator"""

    def test_cumulative_values(self):
        """Test pushing a, a, b gives 0, 0, 0.918296"""
        acc = entropy_service.SlidingShannon()
        values = [acc.push(s) for s in "aab"]
        assert values[0] == 0.0
        assert values[1] == 0.0
        assert values[2] == pytest.approx(0.918296, abs=1e-6)

    def test_window_evicts(self):
        """Test old symbols leave the window"""
        acc = entropy_service.SlidingShannon(window=2)
        for s in "aab":
            acc.push(s)
        assert len(acc) == 2
        assert acc.counts == {"a": 1, "b": 1}
        assert acc.shannon == pytest.approx(1.0)
        acc.push("b")
        assert acc.shannon == 0.0

    def test_invalid_window(self):
        """Test windows must hold at least one symbol"""
        with pytest.raises(ValidationException):
            entropy_service.SlidingShannon(window=0)

    def test_checkpoint_keeps_value(self):
        """Test recomputing from counts does not change the estimate"""
        acc = entropy_service.SlidingShannon(window=30, checkpoint_every=7)
        for s in _random_symbols(300, 5, seed=1):
            acc.push(s)
        before = acc.shannon
        acc.recompute()
        assert acc.shannon == pytest.approx(before, abs=1e-12)


class TestTraces:
    """Test cumulative and windowed traces"""

    def test_cumulative_trace(self):
        """Test the cumulative trace of a, a, b"""
        trace = entropy_service.trace_cumulative(list("aab"))
        assert trace.bits[:2] == [0.0, 0.0]
        assert trace.bits[2] == pytest.approx(0.918296, abs=1e-6)

    def test_cumulative_end_equals_batch(self):
        """Test the last cumulative value equals batch Shannon"""
        symbols = _random_symbols(3000, 11, seed=2)
        trace = entropy_service.trace_cumulative(symbols)
        assert trace.bits[-1] == pytest.approx(entropy_service.shannon(symbols), abs=1e-12)

    def test_windowed_matches_batch(self):
        """Test every windowed value equals batch Shannon of the same window"""
        symbols = _random_symbols(5000, 6, seed=3)
        trace = entropy_service.trace_windowed(symbols, 5, slots_per_day=10)
        for i in range(0, len(symbols), 37):
            window = symbols[max(0, i - 49):i + 1]
            assert trace.bits[i] == pytest.approx(_brute_shannon(window), abs=1e-9)

    def test_large_window_is_cumulative(self):
        """Test a window longer than the sequence equals the cumulative trace"""
        symbols = _random_symbols(400, 4, seed=5)
        windowed = entropy_service.trace_windowed(symbols, 100, slots_per_day=10)
        cumulative = entropy_service.trace_cumulative(symbols)
        assert windowed.bits == pytest.approx(cumulative.bits, abs=1e-12)

    def test_window_forgets_old_regime(self):
        """Test a windowed trace reflects only the recent regime"""
        regime_a = _random_symbols(8 * 96, 4, seed=9)
        regime_b = [9] * (6 * 96)
        symbols = regime_a + regime_b
        windowed = entropy_service.trace_windowed(symbols, 4, slots_per_day=96)
        cumulative = entropy_service.trace_cumulative(symbols)
        i = 12 * 96 + 50
        assert windowed.bits[i] == pytest.approx(entropy_service.shannon(symbols[i + 1 - 4 * 96:i + 1]), abs=1e-10)
        assert abs(cumulative.bits[i] - windowed.bits[i]) > 0.05

    def test_clamped_to_alphabet(self):
        """Test values never exceed log2 of the alphabet size"""
        trace = entropy_service.trace_cumulative(list(range(64)), alphabet_size=8)
        assert max(trace.bits) == pytest.approx(3.0)

    def test_plain_list_needs_slots_per_day(self):
        """Test windowed traces of plain lists need slots_per_day"""
        with pytest.raises(ValidationException):
            entropy_service.trace_windowed([1, 2, 3], 1)

    def test_shorter_than_a_day(self):
        """Test a sequence shorter than one day cannot be windowed"""
        with pytest.raises(TooShortException):
            entropy_service.trace_windowed([1, 2, 3], 1, slots_per_day=96)

    def test_empty_trace(self):
        """Test an empty sequence cannot be traced"""
        with pytest.raises(EmptyInputException):
            entropy_service.trace_cumulative([])

    def test_sequence_trace_keeps_dates(self):
        """Test traces of a SymbolSequence carry its dates and stream id"""
        seq = _thursday_sequence(2, 4, [0, 1, 0, 1, 2, 2, 2, 2])
        trace = entropy_service.trace_windowed(seq, 1)
        assert trace.stream_id == "3:0"
        assert [v[:2] for v in trace.values] == [e[:2] for e in seq.entries]
        # the second day is constant once the first has left the window
        assert trace.bits[-1] == 0.0
        assert sorted(trace.by_date()) == [THURSDAY, THURSDAY + timedelta(days=7)]

    def test_grassberger_trace_day_endpoints(self):
        """Test Grassberger traces have one value at each end of a day"""
        seq = _thursday_sequence(3, 4, _random_symbols(12, 3, seed=6))
        trace = entropy_service.trace_cumulative(seq, "grassberger")
        assert len(trace) == 6
        assert [v[1] for v in trace.values] == [0, 3] * 3

    def test_compute_and_round_trip(self, tmp_path):
        """Test traces for a config write and read back"""
        seq = _thursday_sequence(3, 4, _random_symbols(12, 3, seed=8))
        config = EntropyConfig("shannon", 1, 360)
        (trace,) = entropy_service.compute_traces([seq], config)
        path = tmp_path / "entropy.csv"
        entropy_service.write_traces([trace], str(path))
        (loaded,) = entropy_service.read_traces(str(path))
        assert loaded.stream_id == trace.stream_id
        assert [v[:2] for v in loaded.values] == [v[:2] for v in trace.values]
        assert loaded.bits == pytest.approx(trace.bits, abs=1e-11)


class TestEntropyConfig:
    """Test estimator configuration"""

    def test_unknown_estimator(self):
        """Test unknown estimators are rejected"""
        with pytest.raises(ValidationException):
            EntropyConfig("renyi")

    def test_window_symbols(self):
        """Test the window in symbols is weeks times slots per day"""
        assert EntropyConfig("shannon", 4, 15).window_symbols == 4 * 96
        assert EntropyConfig("shannon", None, 15).window_symbols is None


def _substring_lambdas(symbols):
    """Match lengths by plain substring search over each prefix."""
    text = "".join(chr(0x100 + s) for s in symbols)
    n = len(text)
    out = []
    for p in range(1, n):
        prefix = text[:p]
        length = 1
        while p + length <= n and text[p:p + length] in prefix:
            length += 1
        out.append(length if p + length <= n else n - p + 1)
    return out


@pytest.mark.slow
class TestOracleEquivalence:
    """Test estimators against brute-force recomputation at scale"""

    def test_thousand_random_sequences(self):
        """Test 1000 random sequences against the brute-force oracles"""
        rng = Generator(PCG64(2015))
        for case in range(1000):
            n = int(rng.integers(1, 1001))
            alphabet = int(rng.integers(2, 51))
            symbols = rng.integers(0, alphabet, n).tolist()

            assert entropy_service.shannon(symbols) == pytest.approx(_brute_shannon(symbols), abs=1e-9)
            assert entropy_service.hartley(symbols) == pytest.approx(math.log2(len(set(symbols))), abs=1e-9)

            slots = int(rng.integers(1, min(n, 24) + 1))
            weeks = int(rng.integers(1, 9))
            trace = entropy_service.trace_windowed(symbols, weeks, slots_per_day=slots)
            width = weeks * slots
            for i in rng.integers(0, n, 10).tolist():
                window = symbols[max(0, i + 1 - width):i + 1]
                assert trace.bits[i] == pytest.approx(_brute_shannon(window), abs=1e-9), case

            if n >= 2:
                lambdas = _substring_lambdas(symbols)
                assert entropy_service.match_lengths(symbols) == lambdas, case
                rate = n / sum(lam / math.log2(i) for i, lam in enumerate(lambdas, start=2))
                assert entropy_service.grassberger(symbols) == pytest.approx(rate, abs=1e-12)

    def test_substring_oracle_agrees_with_exhaustive_search(self):
        """Test the substring oracle against the exhaustive one on short sequences"""
        for seed in range(20):
            symbols = _random_symbols(60, 2 + seed % 4, seed)
            assert _substring_lambdas(symbols) == _naive_lambdas(symbols)

    def test_no_drift_after_a_million_updates(self):
        """Test the windowed value after 10^6 pushes equals batch Shannon of the window"""
        rng = Generator(PCG64(9))
        symbols = rng.integers(0, 50, 1_000_000).tolist()
        acc = entropy_service.SlidingShannon(window=1000)
        for s in symbols:
            acc.push(s)
        assert acc.shannon == pytest.approx(_brute_shannon(symbols[-1000:]), abs=1e-9)

    def test_windowed_fuzz(self):
        """Test 10^5 pushes with shifting alphabets against batch Shannon at every step"""
        rng = Generator(PCG64(10))
        acc = entropy_service.SlidingShannon(window=64)
        recent = deque(maxlen=64)
        alphabet = 2
        for step in range(100_000):
            if step % 1000 == 0:
                alphabet = int(rng.integers(1, 31))
            s = int(rng.integers(0, alphabet))
            recent.append(s)
            assert acc.push(s) == pytest.approx(_brute_shannon(list(recent)), abs=1e-9), step
