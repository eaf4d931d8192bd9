import itertools

import numpy as np
import pytest
from scipy.stats import chisquare

from gaussalign.errors import PerfectCorrelation
from gaussalign.model import CanonicalModel
from gaussalign.synth import (
    GENERATOR_INFO,
    TrialSeed,
    derive_trial_seed,
    sample_instance,
    sample_matching,
    user_ids,
)


class TestSeeds:
    def test_distinct_trials(self):
        a = derive_trial_seed(7, 0).generator().integers(0, 2**63, size=4)
        b = derive_trial_seed(7, 1).generator().integers(0, 2**63, size=4)
        assert not np.array_equal(a, b)

    def test_repeatable(self):
        a = derive_trial_seed(7, 0).generator().bit_generator.state
        b = derive_trial_seed(7, 0).generator().bit_generator.state
        assert a == b

    def test_no_collisions(self):
        seen = set()
        for t in range(10_000):
            seen.add(derive_trial_seed(7, t).generator().bit_generator.random_raw(2).tobytes())
        assert len(seen) == 10_000

    def test_range_checks(self):
        with pytest.raises(ValueError):
            TrialSeed(-1, 0)
        with pytest.raises(ValueError):
            TrialSeed(2**64, 0)
        with pytest.raises(ValueError):
            TrialSeed(1, -1)

    def test_provenance_recorded(self):
        assert GENERATOR_INFO["bit_generator"] == "PCG64"
        assert "ziggurat" in GENERATOR_INFO["normal_method"]


class TestSampleMatching:
    def test_single(self):
        assert sample_matching(1, derive_trial_seed(0, 0)).pairs == {("u1", "v1")}

    def test_stable(self):
        s = derive_trial_seed(11, 3)
        assert sample_matching(3, s) == sample_matching(3, s)
        assert sample_matching(3, s).bijective

    def test_uniform(self):
        perms = {p: k for k, p in enumerate(itertools.permutations(range(4)))}
        counts = np.zeros(24)
        ua, ub = user_ids(4)
        for t in range(24_000):
            m = sample_matching(4, derive_trial_seed(2024, t))
            counts[perms[tuple(m.as_permutation(ua, ub))]] += 1
        p = 1 / 24
        band = 3 * np.sqrt(p * (1 - p) / 24_000)
        assert np.all(np.abs(counts / 24_000 - p) <= band)
        assert chisquare(counts).pvalue > 1e-3

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            sample_matching(0, derive_trial_seed(0, 0))


class TestSampleInstance:
    def test_degenerate_rho(self):
        with pytest.raises(PerfectCorrelation):
            sample_instance(3, CanonicalModel([1 - 1e-16]), derive_trial_seed(0, 0))

    def test_empty_rho(self):
        inst = sample_instance(5, CanonicalModel([]), derive_trial_seed(0, 0))
        assert inst.databases.a.shape == (5, 0)
        assert inst.databases.b.shape == (5, 0)
        assert inst.truth.bijective and len(inst.truth) == 5

    def test_truth_is_first_draw(self):
        s = derive_trial_seed(5, 9)
        assert sample_instance(6, CanonicalModel([0.4]), s).truth == sample_matching(6, s)

    def test_deterministic(self):
        s = derive_trial_seed(123, 4)
        rho = CanonicalModel([0.7, 0.2])
        one, two = sample_instance(50, rho, s), sample_instance(50, rho, s)
        assert one.databases.a.tobytes() == two.databases.a.tobytes()
        assert one.databases.b.tobytes() == two.databases.b.tobytes()
        assert one.truth == two.truth

    def test_correlation(self):
        n = 2000
        inst = sample_instance(n, CanonicalModel([0.5]), derive_trial_seed(31, 0))
        x = inst.databases.a[:, 0]
        y = inst.databases.b[inst.perm, 0]
        assert abs(np.corrcoef(x, y)[0, 1] - 0.5) <= 0.04
        shifted = inst.databases.b[np.roll(inst.perm, 1), 0]
        assert abs(np.corrcoef(x, shifted)[0, 1]) <= 0.04

    def test_marginals(self):
        n = 10_000
        inst = sample_instance(n, CanonicalModel([0.9, 0.5, 0.1]), derive_trial_seed(32, 0))
        for m in (inst.databases.a, inst.databases.b):
            assert np.all(np.abs(m.mean(axis=0)) <= 4 / np.sqrt(n))
            assert np.all(np.abs(m.var(axis=0) - 1) <= 6 / np.sqrt(n))

    def test_pairs_independent(self):
        n = 10_000
        inst = sample_instance(n, CanonicalModel([0.8]), derive_trial_seed(33, 0))
        x = inst.databases.a[:, 0]
        # row i of A against the next row of A
        assert abs(np.corrcoef(x[:-1], x[1:])[0, 1]) <= 4 / np.sqrt(n)

    def test_pair_rows_follow_truth(self):
        inst = sample_instance(8, CanonicalModel([0.5]), derive_trial_seed(1, 1))
        ua, ub = inst.databases.users_a, inst.databases.users_b
        np.testing.assert_array_equal(inst.truth.as_permutation(ua, ub), inst.perm)
