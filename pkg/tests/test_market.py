import math

import numpy as np
import pytest

from cdcfund.market import (
    MARKET_PRESETS,
    MarketParams,
    RandomStream,
    expected_log_return,
    growth_factors,
    log_return_increment,
    normal_matrix,
    preset_market,
)


class TestPresets:
    @pytest.mark.parametrize(
        "name, mu, r, sigma, rho",
        [
            ("M1", 0.065, 0.02, 0.15, 0.3),
            ("M2", 0.065, 0.01, 0.25, 0.22),
            ("M3", 0.065, 0.01, 0.50, 0.11),
        ],
    )
    def test_calibrations(self, name, mu, r, sigma, rho):
        mkt = preset_market(name)
        assert (mkt.mu, mkt.r, mkt.sigma) == (mu, r, sigma)
        assert round(mkt.market_price_of_risk(), 3) == rho

    def test_unknown_preset(self):
        with pytest.raises(ValueError, match="unknown market preset"):
            preset_market("M4")

    def test_invalid_params(self):
        with pytest.raises(ValueError, match="sigma"):
            MarketParams(mu=0.06, r=0.02, sigma=0.0)
        with pytest.raises(ValueError, match="mu >= r"):
            MarketParams(mu=0.01, r=0.02, sigma=0.1)


class TestLogReturnIncrement:
    def test_riskless_is_exact(self):
        # pi = 0 removes the drift excess and the diffusion entirely, leaving
        # the exact product r * dt
        mkt = preset_market("M1")
        for z in (-3.0, 0.0, 1.7):
            assert log_return_increment(mkt, 0.0, 1 / 12, z) == mkt.r * (1 / 12)

    def test_full_risky_drift(self):
        # hand evaluation: 0.065 - 0.5 * 0.15**2
        mkt = preset_market("M1")
        assert log_return_increment(mkt, 1.0, 1.0, 0.0) == pytest.approx(0.053750, abs=1e-12)

    def test_mixed_drift(self):
        # hand evaluation: 0.3*0.045 + 0.02 - 0.5*0.09*0.0225
        mkt = preset_market("M1")
        assert log_return_increment(mkt, 0.3, 1.0, 0.0) == pytest.approx(0.0324875, abs=1e-12)
        assert expected_log_return(mkt, 0.3) == pytest.approx(0.0324875, abs=1e-12)

    def test_rejects_short_position(self):
        with pytest.raises(ValueError, match="short"):
            log_return_increment(preset_market("M1"), -0.1, 1 / 12, 0.0)

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError, match="dt"):
            log_return_increment(preset_market("M1"), 0.5, 0.0, 0.0)

    def test_sample_mean_converges(self):
        mkt = preset_market("M2")
        pi = 0.7
        z = RandomStream(123, 0).normals(1_000_000)
        increments = log_return_increment(mkt, pi, 1.0, z)
        target = pi * (mkt.mu - mkt.r) + mkt.r - 0.5 * pi**2 * mkt.sigma**2
        stderr = pi * mkt.sigma / math.sqrt(z.size)
        assert abs(increments.mean() - target) < 4 * stderr

    def test_riskless_path_deterministic(self):
        mkt = preset_market("M1")
        z = RandomStream(5, 0).normals(1200)
        path = np.cumprod(growth_factors(mkt, 0.0, 1 / 12, z))
        years = np.arange(1, 1201) / 12
        assert np.allclose(path, np.exp(mkt.r * years), rtol=1e-12)


class TestRandomStream:
    def test_bit_identical_replay(self):
        a = RandomStream(42, 7).normals(1000)
        b = RandomStream(42, 7).normals(1000)
        assert np.array_equal(a, b)

    def test_distinct_paths_differ(self):
        a = RandomStream(42, 0).normals(100)
        b = RandomStream(42, 1).normals(100)
        assert not np.array_equal(a, b)

    def test_draw_counter(self):
        s = RandomStream(0, 0)
        s.normals(10)
        s.normals(5)
        assert s.draws_taken == 15

    def test_validates_range(self):
        with pytest.raises(ValueError):
            RandomStream(-1, 0)
        with pytest.raises(ValueError):
            RandomStream(0, 2**64)

    def test_matrix_rows_match_streams(self):
        mat = normal_matrix(9, 4, 50)
        for p in range(4):
            assert np.array_equal(mat[p], RandomStream(9, p).normals(50))

    def test_matrix_cached_and_readonly(self):
        a = normal_matrix(11, 3, 20)
        b = normal_matrix(11, 3, 20)
        assert a is b
        with pytest.raises(ValueError):
            a[0, 0] = 1.0
