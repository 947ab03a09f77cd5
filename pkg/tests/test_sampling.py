import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdwb.io import read_sites_csv, write_sites_csv
from sdwb.sampling import (
    PiecewiseConstant,
    SamplingDesign,
    SiteSet,
    generate_sites,
    pairwise_distances,
)


def test_uniform_sites_inside_scaled_region():
    s = generate_sites(SamplingDesign(15.0, d=2), 100, seed=3)
    assert s.n == 100 and s.sites.shape == (100, 2)
    assert np.all(np.abs(s.sites) <= 7.5)


def test_single_site():
    s = generate_sites(SamplingDesign(15.0), 1, seed=0)
    assert s.n == 1 and len(s) == 1


def test_piecewise_left_half():
    design = SamplingDesign(10.0, density=PiecewiseConstant(np.array([[1.0], [0.0]])))
    s = generate_sites(design, 2000, seed=5)
    assert np.all(s.sites[:, 0] <= 0.0)


def test_piecewise_rejects_zero_mass():
    with pytest.raises(ValueError):
        PiecewiseConstant(np.zeros((2, 2)))


def test_sub_rectangle_region():
    design = SamplingDesign(4.0, region=((0.0, -0.25), (0.5, 0.25)))
    s = generate_sites(design, 500, seed=1)
    assert np.all((s.sites[:, 0] >= 0) & (s.sites[:, 0] <= 2.0))
    assert np.all(np.abs(s.sites[:, 1]) <= 1.0)
    assert design.density_l2() == pytest.approx(1.0 / 0.25)


def test_design_validation():
    with pytest.raises(ValueError):
        SamplingDesign(0.0)
    with pytest.raises(ValueError):
        SamplingDesign(1.0, kappa_inv=-1.0)
    assert SamplingDesign.for_sample_size(25.0, 100).kappa_inv == pytest.approx(6.25)


def test_piecewise_density_l2():
    # weights 3/4 and 1/4 on two cells of area 1/2 each: sum w^2 / |cell| = 1.25
    design = SamplingDesign(1.0, density=PiecewiseConstant(np.array([[3.0], [1.0]])))
    assert design.density_l2() == pytest.approx(1.25, rel=1e-12)


def test_cell_counts_uniform():
    n = 100_000
    s = generate_sites(SamplingDesign(1.0), n, seed=11)
    idx = np.floor((s.sites + 0.5) * 4).clip(0, 3).astype(int)
    counts = np.zeros((4, 4))
    np.add.at(counts, (idx[:, 0], idx[:, 1]), 1)
    se = np.sqrt(n * (1 / 16) * (15 / 16))
    assert np.all(np.abs(counts - n / 16) <= 4 * se)


def test_same_seed_identical_sites():
    d = SamplingDesign(15.0)
    a = generate_sites(d, 50, seed=9)
    b = generate_sites(d, 50, seed=9)
    assert a == b and np.array_equal(a.sites, b.sites)
    assert not np.array_equal(a.sites, generate_sites(d, 50, seed=10).sites)


def test_distance_examples():
    assert np.array_equal(pairwise_distances(SiteSet(np.zeros((1, 2)), 1.0, 2)), np.zeros((1, 1)))
    D = pairwise_distances(SiteSet(np.array([[0.0, 0.0], [3.0, 4.0]]), 10.0, 2))
    assert D[0, 1] == D[1, 0] == 5.0


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**31 - 1))
def test_distance_properties(n, seed):
    s = generate_sites(SamplingDesign(5.0), n, seed=seed)
    D = pairwise_distances(s)
    assert np.allclose(D, D.T) and np.all(np.diag(D) == 0)
    # triangle inequality for all triples
    assert np.all(D[:, None, :] <= D[:, :, None] + D[None, :, :].transpose(0, 2, 1) + 1e-12)
    perm = np.random.default_rng(seed).permutation(n)
    Dp = pairwise_distances(s.subset(perm))
    assert np.allclose(Dp, D[np.ix_(perm, perm)])


def test_sites_outside_region_rejected():
    with pytest.raises(ValueError):
        SiteSet(np.array([[8.0, 0.0]]), 15.0, 2)


def test_sites_csv_round_trip(tmp_path):
    s = generate_sites(SamplingDesign(15.0), 40, seed=2)
    path = tmp_path / "s.csv"
    write_sites_csv(s, path)
    assert path.read_text().splitlines()[0] == "site_id,x1,x2"
    back = read_sites_csv(path, 15.0)
    assert np.array_equal(back.sites, s.sites)
