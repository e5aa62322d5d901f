import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mhmr_ita.context import (
    AREA_SIDE,
    Difficulty,
    HumanProfile,
    ImageQuality,
    MultiAttributeContext,
    RobotKind,
    RobotProfile,
    ScenarioSpec,
    TaskSpec,
    Tier,
    context_from_text,
    context_to_text,
    encode_context,
    format_scenario_spec,
    parse_scenario_spec,
    sample_context,
    tier_of,
)
from mhmr_ita.errors import ConfigurationError, DomainError


def spec(**overrides) -> ScenarioSpec:
    base = dict(k=2, i=2, j=4, uav_count=1, seed=0)
    base.update(overrides)
    return ScenarioSpec(**base)


class TestTierOf:
    def test_low(self):
        assert tier_of(math.pi / 24) is Tier.LOW

    def test_boundaries_are_medium(self):
        assert tier_of(math.pi / 12) is Tier.MEDIUM
        assert tier_of(math.pi / 6) is Tier.MEDIUM

    def test_high(self):
        assert tier_of(0.99 * math.pi / 4) is Tier.HIGH

    @pytest.mark.parametrize("angle", [0.0, math.pi / 4, -0.1, 1.0])
    def test_out_of_range(self, angle):
        with pytest.raises(DomainError):
            tier_of(angle)

    @given(st.floats(min_value=1e-9, max_value=math.pi / 4 - 1e-9))
    def test_matches_interval_definition(self, angle):
        tier = tier_of(angle)
        if angle < math.pi / 12:
            assert tier is Tier.LOW
        elif angle <= math.pi / 6:
            assert tier is Tier.MEDIUM
        else:
            assert tier is Tier.HIGH


class TestSampleContext:
    def test_paper_setting_counts(self):
        ctx = sample_context(spec(k=5, i=7, j=50, uav_count=3, seed=7))
        assert (ctx.k, ctx.i, ctx.j) == (5, 7, 50)

    def test_empty_task_list(self):
        ctx = sample_context(spec(j=0))
        assert ctx.tasks == ()

    def test_deterministic_replay(self):
        s = spec(seed=1234)
        assert sample_context(s) == sample_context(s)

    def test_robot_order_uavs_first(self):
        ctx = sample_context(spec(i=5, uav_count=2))
        kinds = [r.kind for r in ctx.robots]
        assert kinds == [RobotKind.UAV] * 2 + [RobotKind.UGV] * 3

    def test_invalid_spec_rejected(self):
        with pytest.raises(ConfigurationError):
            sample_context(spec(k=0))
        with pytest.raises(ConfigurationError):
            sample_context(spec(uav_count=5))
        with pytest.raises(ConfigurationError):
            sample_context(spec(difficulty_weights=(0.5, 0.5, 0.5)))

    def test_angles_within_domain_and_tiers_consistent(self):
        ctx = sample_context(spec(k=50, seed=9))
        for h in ctx.humans:
            h.validate()

    def test_tier_frequencies_chi_square(self):
        # 10,000 tier draws; each frequency within 1/3 +- 0.02 and the
        # chi-square statistic below the 0.99 quantile for 2 dof (9.2103).
        ctx = sample_context(spec(k=5000, j=0, seed=42))
        tiers = [h.tier_c for h in ctx.humans] + [h.tier_s for h in ctx.humans]
        counts = np.array([sum(t is tier for t in tiers) for tier in Tier], dtype=float)
        freqs = counts / counts.sum()
        assert np.all(np.abs(freqs - 1 / 3) <= 0.02)
        expected = counts.sum() / 3
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        assert chi2 < 9.210340371976182


class TestEncodeContext:
    def test_uav_row(self):
        ctx = MultiAttributeContext(
            humans=(HumanProfile.from_angles(math.pi / 8, math.pi / 8),),
            robots=(RobotProfile.standard(RobotKind.UAV),),
            tasks=(),
        )
        row = encode_context(ctx).c_rc[0]
        np.testing.assert_allclose(row, [1.0, 0.0, 15.0 / 22.0, 1.0 / 3.0])

    def test_ugv_row(self):
        ctx = MultiAttributeContext(
            humans=(HumanProfile.from_angles(math.pi / 8, math.pi / 8),),
            robots=(RobotProfile.standard(RobotKind.UGV),),
            tasks=(),
        )
        row = encode_context(ctx).c_rc[0]
        np.testing.assert_allclose(row, [0.0, 1.0, 6.0 / 22.0, 2.0 / 3.0])

    def test_midpoint_human(self):
        ctx = MultiAttributeContext(
            humans=(HumanProfile.from_angles(math.pi / 8, math.pi / 8),),
            robots=(RobotProfile.standard(RobotKind.UGV),),
            tasks=(),
        )
        np.testing.assert_allclose(encode_context(ctx).c_hf[0], [0.5, 0.5])

    def test_hard_task_at_far_corner(self):
        ctx = MultiAttributeContext(
            humans=(HumanProfile.from_angles(math.pi / 8, math.pi / 8),),
            robots=(RobotProfile.standard(RobotKind.UGV),),
            tasks=(TaskSpec((2000.0, 2000.0), Difficulty.HARD, True),),
        )
        np.testing.assert_allclose(encode_context(ctx).c_ts[0], [1.0, 1.0, 1.0, 195.0 / 245.0])

    def test_all_entries_in_unit_interval(self):
        ctx = sample_context(spec(k=10, i=6, j=40, uav_count=3, seed=5))
        mats = encode_context(ctx)
        for m in (mats.c_hf, mats.c_rc, mats.c_ts):
            assert np.all(np.isfinite(m))
            assert m.min() >= 0.0 and m.max() <= 1.0

    def test_tier_ranges_disjoint_in_first_coordinate(self):
        # distinct tiers occupy distinct normalized ranges: (0,1/3), [1/3,2/3], (2/3,1)
        ctx = sample_context(spec(k=300, seed=3))
        mats = encode_context(ctx)
        for h, row in zip(ctx.humans, mats.c_hf):
            lo, hi = {Tier.LOW: (0, 1 / 3), Tier.MEDIUM: (1 / 3, 2 / 3), Tier.HIGH: (2 / 3, 1)}[h.tier_c]
            assert lo <= row[0] <= hi


class TestPersistence:
    def test_scenario_spec_round_trip(self):
        s = spec(k=3, i=4, j=20, uav_count=2, seed=99, hazard_ratio=0.25,
                 difficulty_weights=(0.2, 0.3, 0.5), area_side=1500.0)
        assert parse_scenario_spec(format_scenario_spec(s)) == s

    def test_scenario_spec_rejects_unknown_keys(self):
        text = format_scenario_spec(spec()) + "bogus = 1\n"
        with pytest.raises(ConfigurationError):
            parse_scenario_spec(text)

    def test_scenario_spec_rejects_missing_keys(self):
        with pytest.raises(ConfigurationError):
            parse_scenario_spec("k = 2\n")

    def test_context_round_trip_exact(self):
        ctx = sample_context(spec(k=4, i=3, j=7, uav_count=2, seed=11))
        restored = context_from_text(context_to_text(ctx))
        assert restored == ctx  # bit-exact angles via repr round-trip
