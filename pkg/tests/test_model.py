import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2_contingency

from urnwalk.errors import InvalidSizeError, ReinforcementRangeError, SampleSizeError
from urnwalk.laws import FixedSize
from urnwalk.model import (
    ModelParams,
    SampleMode,
    SamplingScheme,
    UrnState,
    colour_probabilities,
    draw_sample_counts,
    init_history,
    step,
    walker_position,
)
from urnwalk.reinforcement import make_spec

from conftest import f_identity_spec


class TestInitHistory:
    def test_all_product_a_when_q_one(self, rng):
        # q1 = 1 exactly is outside the declared parameter domain; a value a
        # hair below keeps the draw deterministic at this seed.
        params = ModelParams(p=0.5, q=1.0, q1=1 - 1e-12, q2=0.5, N=5)
        state = init_history(params, rng)
        assert (state.a, state.b, state.c, state.d) == (5, 0, 0, 0)

    def test_no_a_purchases_when_q_zero(self, rng):
        params = ModelParams(p=0.5, q=0.0, q1=0.5, q2=0.5, N=4)
        state = init_history(params, rng)
        assert state.a == 0 and state.c == 0
        assert state.b + state.d == 4

    def test_binomial_concentration(self, rng):
        # colour-1 count is Binomial(N, q*q1); check against a direct binomial
        # sample as the independent oracle.
        n = 10**5
        params = ModelParams(p=0.5, q=0.5, q1=0.5, q2=0.5, N=n)
        state = init_history(params, rng)
        oracle = rng.binomial(n, 0.25) / n
        assert abs(state.a / n - 0.25) < 0.01
        assert abs(oracle - 0.25) < 0.01

    def test_counts_balanced(self, rng):
        params = ModelParams(p=0.5, q=0.3, q1=0.6, q2=0.7, N=137)
        state = init_history(params, rng)
        assert state.a + state.b + state.c + state.d == 137


class TestDrawSampleCounts:
    def test_degenerate_urn(self, rng):
        state = UrnState(n=7, a=7, b=0, c=0, d=0)
        for scheme in SamplingScheme:
            for mode in SampleMode:
                counts = draw_sample_counts(state, scheme, 3, rng, mode=mode)
                assert (counts.v1, counts.v2, counts.v3, counts.v4) == (3, 0, 0, 0)

    def test_exhaustive_sample(self, rng):
        state = UrnState(n=10, a=4, b=3, c=2, d=1)
        for mode in SampleMode:
            counts = draw_sample_counts(state, SamplingScheme.WITHOUT_REPLACEMENT, 10, rng, mode=mode)
            assert (counts.v1, counts.v2, counts.v3, counts.v4) == (4, 3, 2, 1)

    def test_hypergeometric_point_probability(self, rng):
        # P(v1 = 1) = C(2,1) C(2,1) / C(4,2) = 2/3 by direct enumeration
        state = UrnState(n=4, a=2, b=2, c=0, d=0)
        draws = 20_000
        hits = sum(
            draw_sample_counts(state, SamplingScheme.WITHOUT_REPLACEMENT, 2, rng).v1 == 1
            for _ in range(draws)
        )
        se = np.sqrt((2 / 3) * (1 / 3) / draws)
        assert abs(hits / draws - 2 / 3) < 4 * se

    def test_size_errors(self, rng):
        state = UrnState(n=4, a=2, b=2, c=0, d=0)
        with pytest.raises(SampleSizeError):
            draw_sample_counts(state, SamplingScheme.WITHOUT_REPLACEMENT, 5, rng)
        with pytest.raises(InvalidSizeError):
            draw_sample_counts(state, SamplingScheme.WITH_REPLACEMENT, 0, rng)

    def test_oversized_with_replacement_allowed(self, rng):
        state = UrnState(n=4, a=2, b=2, c=0, d=0)
        counts = draw_sample_counts(state, SamplingScheme.WITH_REPLACEMENT, 9, rng)
        assert counts.k == 9

    @pytest.mark.parametrize("scheme", list(SamplingScheme))
    def test_fast_vs_naive_chi_square(self, scheme):
        # the two modes must be distributionally identical; two-sample
        # chi-square on 1e5 draws each at significance 1e-3
        rng = np.random.default_rng(31415)
        state = UrnState(n=12, a=5, b=3, c=2, d=2)
        draws = 100_000
        tallies = {}
        for mode in SampleMode:
            counter = {}
            for _ in range(draws):
                c = draw_sample_counts(state, scheme, 4, rng, mode=mode)
                key = (c.v1, c.v2, c.v3, c.v4)
                counter[key] = counter.get(key, 0) + 1
            tallies[mode] = counter
        keys = sorted(set(tallies[SampleMode.FAST]) | set(tallies[SampleMode.NAIVE_INDICES]))
        table = np.array(
            [[tallies[m].get(k, 0) for k in keys] for m in SampleMode]
        )
        # merge rare outcome columns so expected cell counts stay >= 5
        keep = table.sum(axis=0) >= 10
        merged = np.hstack([table[:, keep], table[:, ~keep].sum(axis=1, keepdims=True)]) if (~keep).any() else table[:, keep]
        _, pval, _, _ = chi2_contingency(merged)
        assert pval >= 1e-3


class TestStep:
    def test_colour_probabilities_exact(self):
        probs = colour_probabilities(0.5, 0.75, 0.6)
        assert np.allclose(probs, [0.375, 0.3, 0.125, 0.2], atol=1e-15)
        # p = 1, F = 1: g = 1 regardless of the sample
        probs = colour_probabilities(1.0, 0.75, 0.6)
        assert np.allclose(probs, [0.75, 0.0, 0.25, 0.0], atol=1e-15)

    @given(
        g=st.floats(0, 1),
        q1=st.floats(0.01, 0.99),
        q2=st.floats(0.01, 0.99),
    )
    def test_colour_probabilities_sum_to_one(self, g, q1, q2):
        assert abs(colour_probabilities(g, q1, q2).sum() - 1.0) <= 1e-12

    def test_increments_exactly_one_colour(self, rng, symmetric_params):
        spec = make_spec("quadratic")
        law = FixedSize(3)
        state = init_history(symmetric_params, rng)
        for _ in range(200):
            new = step(state, symmetric_params, SamplingScheme.WITH_REPLACEMENT, spec, law, rng)
            assert new.n == state.n + 1
            deltas = [new.a - state.a, new.b - state.b, new.c - state.c, new.d - state.d]
            assert sorted(deltas) == [0, 0, 0, 1]
            state = new

    def test_half_memory_is_symmetric_walk(self, rng):
        # p = 1/2 forces g = 1/2 for any reinforcement, so colour-1 arrives
        # with probability q1/2 regardless of the sample
        params = ModelParams(p=0.5, q=0.5, q1=0.8, q2=0.4, N=10)
        spec = make_spec("quadratic")
        law = FixedSize(3)
        state = init_history(params, rng)
        n_steps = 4000
        a0 = state.a
        for _ in range(n_steps):
            state = step(state, params, SamplingScheme.WITH_REPLACEMENT, spec, law, rng)
        freq = (state.a - a0) / n_steps
        se = np.sqrt(0.4 * 0.6 / n_steps)
        assert abs(freq - 0.4) < 4 * se

    def test_all_colour_one_forces_f_at_corner(self, rng, symmetric_params):
        # with every sampled ball colour 1, the reinforcement sees (1, 0)
        state = UrnState(n=30, a=30, b=0, c=0, d=0)
        seen = []
        spec = make_spec("quadratic")
        spec = spec.__class__(**{**spec.__dict__, "f": lambda x, y: seen.append((x, y)) or x**2})
        step(state, symmetric_params, SamplingScheme.WITH_REPLACEMENT, spec, FixedSize(4), rng)
        assert seen == [(1.0, 0.0)]

    def test_range_error(self, rng, symmetric_params):
        from urnwalk.reinforcement import ReinforcementSpec

        bad = ReinforcementSpec(name="bad", f=lambda x, y: 1.5)
        state = UrnState(n=20, a=5, b=5, c=5, d=5)
        with pytest.raises(ReinforcementRangeError):
            step(state, symmetric_params, SamplingScheme.WITH_REPLACEMENT, bad, FixedSize(2), rng)


class TestWalkerPosition:
    @pytest.mark.parametrize(
        "counts,expected",
        [((3, 0, 1, 0), 4), ((0, 2, 0, 2), -4), ((1, 1, 1, 1), 0)],
    )
    def test_examples(self, counts, expected):
        a, b, c, d = counts
        assert walker_position(UrnState(n=sum(counts), a=a, b=b, c=c, d=d)) == expected

    @given(
        a=st.integers(0, 50),
        b=st.integers(0, 50),
        c=st.integers(0, 50),
        d=st.integers(0, 50),
    )
    def test_identity(self, a, b, c, d):
        n = a + b + c + d
        if n == 0:
            return
        state = UrnState(n=n, a=a, b=b, c=c, d=d)
        assert walker_position(state) == 2 * (a + c) - n
