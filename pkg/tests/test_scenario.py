import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from sixdma.errors import ValidationError
from sixdma.propagation import PathLossModel, path_gains
from sixdma.scenario import (
    CoverageRegion,
    DensityModel,
    HotspotSpec,
    UserDrop,
    default_hotspots,
    drop_rng,
    mean_user_count,
    monte_carlo_set,
    sample_annulus,
    sample_drop,
    sample_user_count,
)

PLM = PathLossModel()


def ks_statistic(samples, cdf):
    x = np.sort(samples)
    n = x.size
    F = cdf(x)
    return max((np.arange(1, n + 1) / n - F).max(), (F - np.arange(n) / n).max())


def test_default_hotspots_geometry():
    hs = default_hotspots()
    assert [round(float(np.linalg.norm(h.center)), 9) for h in hs] == [40, 60, 100]
    assert [h.radius for h in hs] == [5, 10, 15]
    c = hs[0].center
    assert math.degrees(math.atan2(c[1], c[0])) == pytest.approx(30)
    assert math.degrees(math.asin(c[2] / 40)) == pytest.approx(10)


def test_region_validation():
    with pytest.raises(ValidationError):
        CoverageRegion(50, 20)
    with pytest.raises(ValidationError, match="not inside"):
        CoverageRegion(20, 200, [HotspotSpec.at(22, 5, 0, 0)])
    with pytest.raises(ValidationError, match="hotspots 0 and 1 overlap"):
        CoverageRegion(20, 200, [HotspotSpec.at(50, 5, 0, 0), HotspotSpec.at(55, 5, 0, 0)])


@pytest.mark.parametrize("xi", [0.0, 0.2, 0.5, 1.0])
@pytest.mark.parametrize("mu", [0.0, 35.0, 50.0])
def test_mean_user_count_closure(mu, xi):
    assert mean_user_count(DensityModel(mu, xi)) == pytest.approx(mu, abs=1e-9)


def test_excess_counts_ratio():
    dm = DensityModel(35, 0.0)
    assert_allclose(dm.hotspot_excess_counts(), 35 * np.array([1, 2, 3]) / 6, rtol=1e-15)
    assert dm.component_probabilities().sum() == 1.0
    assert DensityModel(35, 1.0).component_probabilities()[0] == pytest.approx(1.0)


def test_density_validation():
    with pytest.raises(ValidationError, match=r"xi must be in \[0,1\]"):
        DensityModel(35, 1.5)
    with pytest.raises(ValidationError):
        DensityModel(-1, 0.5)
    with pytest.raises(ValidationError):
        DensityModel(35, 0.5, CoverageRegion(20, 200, []))


def test_user_count_statistics():
    dm = DensityModel(35, 0.2)
    rng = np.random.default_rng(0)
    k = np.array([sample_user_count(dm, rng) for _ in range(10_000)])
    assert abs(k.mean() - 35) < 3 * math.sqrt(35 / 10_000)
    assert k.var() == pytest.approx(35, rel=0.1)


def test_annulus_radial_cdf():
    rng = np.random.default_rng(1)
    pts = sample_annulus(rng, 100_000, 20, 200)
    r = np.linalg.norm(pts, axis=1)
    assert r.min() >= 20 and r.max() <= 200
    D = ks_statistic(r, lambda x: (x**3 - 20**3) / (200**3 - 20**3))
    assert D < 0.01


def test_annulus_directions_isotropic():
    pts = sample_annulus(np.random.default_rng(2), 50_000, 20, 200)
    z = pts[:, 2] / np.linalg.norm(pts, axis=1)
    assert ks_statistic(z, lambda x: (x + 1) / 2) < 0.01


def test_hotspot_fractions_pure_hotspot():
    dm = DensityModel(35, 0.0)
    counts = np.zeros(3)
    for s in range(2_000):
        drop = sample_drop(dm, PLM, drop_rng(5, s))
        for w, h in enumerate(dm.region.hotspots):
            counts[w] += int((np.linalg.norm(drop.positions - h.center, axis=1) <= h.radius).sum())
    frac = counts / counts.sum()
    assert_allclose(frac, [1 / 6, 2 / 6, 3 / 6], atol=0.02)


def test_drop_positions_in_region():
    dm = DensityModel(50, 0.5)
    for drop in monte_carlo_set(dm, PLM, 20, 3):
        r = np.linalg.norm(drop.positions, axis=1)
        assert np.all((r >= 20) & (r <= 200))
        assert_allclose(drop.path_gains, path_gains(drop.positions, PLM))


def test_monte_carlo_determinism_and_order():
    dm = DensityModel()
    a = monte_carlo_set(dm, PLM, 5, 42)
    b = monte_carlo_set(dm, PLM, 5, 42)
    assert all(np.array_equal(x.positions, y.positions) for x, y in zip(a, b))
    # each drop depends only on (seed, s)
    later = sample_drop(dm, PLM, drop_rng(42, 3))
    assert np.array_equal(later.positions, a[3].positions)
    assert len(monte_carlo_set(dm, PLM, 1, 0)) == 1
    with pytest.raises(ValueError):
        monte_carlo_set(dm, PLM, 0, 0)


def test_monte_carlo_mean_count():
    drops = monte_carlo_set(DensityModel(), PLM, 100, 7)
    assert abs(np.mean([d.K for d in drops]) - 35) < 3 * math.sqrt(35 / 100)


def test_zero_mu_gives_empty_drops():
    drop = sample_drop(DensityModel(0.0, 0.2), PLM, np.random.default_rng(0))
    assert drop.K == 0 and drop.positions.shape == (0, 3)


def test_user_drop_length_check():
    with pytest.raises(ValueError):
        UserDrop(np.zeros((2, 3)), np.zeros(3))
