import json

import numpy as np
import pytest
from scipy import stats

from conftest import DESIGN_NAMES
from warptree.design import (
    CatalogError,
    DesignError,
    SampleFormatError,
    cdf_eval,
    cdf_inverse,
    generate_sample,
    get_design,
    get_function,
    read_sample,
    write_sample,
)


def bisect(fn, target, lo=0.0, hi=1.0, tol=1e-13):
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fn(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_cdf_examples():
    assert cdf_eval(get_design("uniform"), 0.3) == pytest.approx(0.3, abs=0)
    assert cdf_eval(get_design("power2"), 0.5) == 0.25
    for name in DESIGN_NAMES:
        d = get_design(name)
        assert cdf_eval(d, 1.0) == pytest.approx(1.0, abs=1e-15)
        assert cdf_eval(d, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_inverse_examples():
    assert cdf_inverse(get_design("uniform"), 0.7) == 0.7
    assert cdf_inverse(get_design("power2"), 0.25) == 0.5
    pl = get_design("piecewise")
    x = float(cdf_inverse(pl, 0.5))
    assert abs(float(pl.cdf(x)) - 0.5) <= 1e-10
    oracle = bisect(lambda t: float(pl.cdf(t)), 0.5)
    assert x == pytest.approx(oracle, abs=1e-10)


@pytest.mark.parametrize("name", DESIGN_NAMES)
def test_inverse_round_trip_and_monotone(name):
    d = get_design(name)
    u = np.linspace(0, 1, 10_000)
    assert np.max(np.abs(d.cdf(d.inverse(u)) - u)) <= 1e-12
    x = np.linspace(0, 1, 10_000)
    assert np.all(np.diff(d.cdf(x)) >= 0)


@pytest.mark.parametrize("name", DESIGN_NAMES)
def test_density_integrates_to_cdf(name):
    from scipy.integrate import quad

    d = get_design(name)
    for b in (0.2, 0.5, 0.77):
        val, _ = quad(lambda t: float(d.density(t)), 0, b, points=[p for p in d.breakpoints if p < b] or None)
        assert val == pytest.approx(float(d.cdf(b)), abs=1e-10)


def test_domain_errors():
    d = get_design("power2")
    with pytest.raises(DesignError):
        d.cdf(1.5)
    with pytest.raises(DesignError):
        d.inverse(-0.1)


def test_catalog_error_lists_names():
    with pytest.raises(CatalogError, match="valid names: constant, sine, step, warped"):
        get_function("nope")
    with pytest.raises(CatalogError, match="piecewise"):
        get_design("nope")


@pytest.mark.parametrize("fname", ["sine", "step", "warped", "constant"])
def test_functions_bounded(fname, design):
    f = get_function(fname, design)
    x = np.random.default_rng(0).random(5000)
    assert np.all(np.abs(f(x)) <= f.sup_bound + 1e-12)


def test_noiseless_sample_exact():
    d = get_design("power3")
    f = get_function("sine", d)
    z = generate_sample(d, f, 0.0, 200, seed=1)
    assert np.array_equal(z.y, f(z.x))


def test_sample_is_deterministic():
    d = get_design("scurve")
    f = get_function("step", d)
    a = generate_sample(d, f, 0.3, 500, seed=11)
    b = generate_sample(d, f, 0.3, 500, seed=11)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)


def test_sample_validation():
    d = get_design("uniform")
    f = get_function("sine")
    with pytest.raises(DesignError):
        generate_sample(d, f, 0.1, 0)
    with pytest.raises(DesignError):
        generate_sample(d, f, -1.0, 10)


def test_responses_bounded():
    d = get_design("uniform")
    f = get_function("sine")
    z = generate_sample(d, f, 0.5, 20_000, seed=3)
    M = z.meta["M"]
    assert M == 2 * 1.0 + 4 * 0.5
    assert np.all(np.abs(z.y) <= M) and np.all((z.x >= 0) & (z.x <= 1))


def test_uniform_design_dkw():
    d = get_design("uniform")
    z = generate_sample(d, get_function("constant"), 0.1, 100_000, seed=5)
    assert stats.kstest(z.x, "uniform").statistic < 0.01


@pytest.mark.parametrize("name", DESIGN_NAMES)
def test_warped_image_uniform(name):
    d = get_design(name)
    n = 100_000
    z = generate_sample(d, get_function("sine", d), 0.1, n, seed=17)
    assert stats.kstest(d.cdf(z.x), "uniform").statistic < 1.36 / np.sqrt(n)


def test_noise_mean_zero():
    d = get_design("uniform")
    f = get_function("constant")
    sigma, n = 0.4, 100_000
    z = generate_sample(d, f, sigma, n, seed=8)
    eps = z.y - f(z.x)
    assert abs(eps.mean()) < 3 * sigma / np.sqrt(n)


def test_sample_csv_round_trip(tmp_path):
    d = get_design("power2")
    z = generate_sample(d, get_function("step", d), 0.2, 300, seed=4)
    write_sample(z, tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().startswith("x,y\n")
    meta = json.loads((tmp_path / "s.json").read_text())
    assert meta == {"design": "power2", "function": "step", "sigma": 0.2, "M": z.meta["M"], "n": 300, "seed": 4}
    back = read_sample(tmp_path / "s.csv")
    assert np.array_equal(back.x, z.x) and np.array_equal(back.y, z.y)


def test_malformed_csv_reports_row(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x,y\n0.1,1\n0.2,abc\n")
    with pytest.raises(SampleFormatError, match="row 3"):
        read_sample(p)
