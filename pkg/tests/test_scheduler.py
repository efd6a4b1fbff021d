import math
from fractions import Fraction

import numpy as np
import pytest

import acdc
from acdc.profiling import MODELED, ProfileEntry
from acdc.scheduler import SchedulerDecision, SchedulerInput, feasible, select

GB = 10**9


def oracle_select(entries, rate, mem_available, mpr):
    """Independent scan implementing the selection post-conditions.

    The instance count is computed with exact rational arithmetic over
    the decimal values the floats represent (shortest-repr reading), so
    quotients like 13.156 * 7000 / 1 land exactly on integers.
    """

    def requirement(e):
        n = math.ceil(Fraction(str(e.ttd)) * Fraction(str(rate)) / e.batch_size)
        n = max(1, n)
        return n, n * e.unit_mem

    pool = list(entries)
    if mpr is not None:
        meeting = [e for e in pool if e.f1 >= mpr]
        if meeting:
            pool = meeting
        else:
            top = max(e.f1 for e in pool)
            pool = [e for e in pool if e.f1 == top]
    scored = [(e, *requirement(e)) for e in pool]
    fits = [t for t in scored if t[2] <= mem_available]
    if fits:
        e, n, m = min(fits, key=lambda t: (-(t[0].f1 / t[0].ttd), t[2], t[0].batch_size, t[0].classifier_id))
        over = False
    else:
        e, n, m = min(scored, key=lambda t: (t[2], t[0].batch_size, t[0].classifier_id))
        over = True
    return SchedulerDecision(e.classifier_id, e.batch_size, n, m, e.f1, e.f1 / e.ttd, over)


def test_feasibility_worked_example():
    entry = ProfileEntry("c", "s", 500, 0.9, 1.5, int(1.5 * GB), MODELED)
    assert not feasible(entry, rate=1500, mem_available=5 * GB)  # needs 7.5 GB
    assert feasible(entry, rate=1500, mem_available=7.5 * GB)  # boundary is inclusive
    assert feasible(entry, rate=1500, mem_available=8 * GB)


def test_feasible_tiny_footprint():
    entry = ProfileEntry("c", "s", 10, 0.5, 0.2, 1, MODELED)
    assert feasible(entry, rate=1e6, mem_available=1e12)


def test_reference_profile_no_mpr(reference_profile):
    decision = select(SchedulerInput(rate=1000, mem_available=2 * GB, profiles=reference_profile))
    chosen = next(e for e in reference_profile if e.classifier_id == decision.classifier_id)
    assert chosen.subset == "ipv4.dfbit&tcp.fin&ipv4.ttl&tcp.ackf"
    assert decision.batch_size == 500
    assert decision.ratio == pytest.approx(0.744 / 0.303)
    assert not decision.overcommit


def test_reference_profile_mpr_080(reference_profile):
    decision = select(
        SchedulerInput(rate=1000, mem_available=2 * GB, profiles=reference_profile, mpr=0.80)
    )
    chosen = next(e for e in reference_profile if e.classifier_id == decision.classifier_id)
    assert chosen.subset == "ipv4.dfbit&tcp.fin&ipv4.ttl&tcp.wsize"
    assert decision.expected_f1 == 0.826
    assert decision.ratio == pytest.approx(0.826 / 0.357)


def test_reference_profile_mpr_090_falls_back_to_max_f1(reference_profile):
    decision = select(
        SchedulerInput(rate=1000, mem_available=2 * GB, profiles=reference_profile, mpr=0.90)
    )
    assert decision.expected_f1 == 0.826
    assert not decision.overcommit


def test_reference_profile_overcommit_minimizes_memory(reference_profile):
    decision = select(
        SchedulerInput(rate=1000, mem_available=0.3 * GB, profiles=reference_profile)
    )
    assert decision.overcommit
    assert decision.total_mem == 312_000_000  # smallest unit requirement, N = 1
    chosen = next(e for e in reference_profile if e.classifier_id == decision.classifier_id)
    assert chosen.unit_mem == 312_000_000


def test_decision_consistent_with_capacity_math(reference_profile):
    decision = select(SchedulerInput(rate=4000, mem_available=3 * GB, profiles=reference_profile))
    chosen = next(e for e in reference_profile if e.classifier_id == decision.classifier_id)
    n = acdc.concurrent_instances(chosen.batch_size, 4000, chosen.ttd)
    assert decision.instances == n
    assert decision.total_mem == acdc.total_memory(n, chosen.unit_mem)


def test_best_ratio_when_everything_fits(reference_profile):
    decision = select(SchedulerInput(rate=100, mem_available=100 * GB, profiles=reference_profile))
    assert all(decision.ratio >= e.ratio for e in reference_profile)


def test_scale_invariance_of_choice(reference_profile):
    base = select(SchedulerInput(rate=1000, mem_available=100 * GB, profiles=reference_profile))
    scaled_entries = tuple(
        ProfileEntry(e.classifier_id, e.subset, e.batch_size, e.f1, e.ttd * 3.0, e.unit_mem, e.mode)
        for e in reference_profile
    )
    scaled = select(SchedulerInput(rate=1000, mem_available=100 * GB, profiles=scaled_entries))
    assert (base.classifier_id, base.batch_size) == (scaled.classifier_id, scaled.batch_size)


def test_input_validation(reference_profile):
    with pytest.raises(ValueError):
        SchedulerInput(rate=0, mem_available=GB, profiles=reference_profile)
    with pytest.raises(ValueError):
        SchedulerInput(rate=100, mem_available=GB, profiles=())


def _random_tables(num, seed, max_entries=50):
    rng = np.random.default_rng(seed)
    for _ in range(num):
        n = int(rng.integers(1, max_entries + 1))
        entries = tuple(
            ProfileEntry(
                classifier_id=f"c{i:02d}",
                subset="s",
                batch_size=int(rng.choice([1, 5, 10, 50, 100, 500, 1000])),
                f1=float(np.round(rng.uniform(0.2, 1.0), 3)),
                ttd=float(np.round(rng.uniform(0.01, 30.0), 4)),
                unit_mem=int(rng.integers(1, 5 * GB)),
                mode=MODELED,
            )
            for i in range(n)
        )
        rate = float(rng.choice([10, 100, 1500, 7000, 15000]))
        mem = float(rng.choice([0.1 * GB, GB, 5 * GB, 50 * GB, 10**13]))
        mpr = None if rng.random() < 0.4 else float(np.round(rng.uniform(0.3, 1.0), 2))
        yield entries, rate, mem, mpr


def test_select_matches_oracle_randomized():
    for entries, rate, mem, mpr in _random_tables(150, seed=42):
        got = select(SchedulerInput(rate, mem, entries, mpr))
        want = oracle_select(entries, rate, mem, mpr)
        assert got == want
