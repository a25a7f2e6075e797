import math

import numpy as np
import pytest

from kslogistic.model import (ModelParams, classify_d1, equal_locations, load_params, parse_keyvalue,
                              positivity_threshold, qe_positivity_threshold, resonant_d1, turing_threshold)


def test_derived_scalars(base):
    p = base.replace(d1=0.7, chi=1.3)
    assert p.chibar * p.d1 == pytest.approx(p.chi, rel=1e-15)
    assert p.eps**2 == pytest.approx(p.d2, rel=1e-15)
    assert p.theta**2 * p.d1 == pytest.approx(p.mu * p.ubar, rel=1e-15)


@pytest.mark.parametrize("bad", [dict(d1=0.0), dict(d2=-1.0), dict(chi=0.0), dict(mu=-2.0),
                                 dict(ubar=0.0), dict(tau=-0.1), dict(N=0), dict(N=1.5),
                                 dict(d1=float("inf"))])
def test_rejects_invalid(base, bad):
    with pytest.raises(ValueError):
        base.replace(**bad)


def test_with_d1_keeps_chibar_or_chi(base):
    p = base.replace(chi=2.0)
    q = p.with_d1(0.5)
    assert q.chibar == pytest.approx(p.chibar) and q.d1 == 0.5
    r = p.with_d1(0.5, keep="chi")
    assert r.chi == p.chi
    with pytest.raises(ValueError):
        p.with_d1(0.5, keep="mu")


def test_classify_examples(base):
    r2 = classify_d1(base.replace(N=2))
    assert r2.d1pN == pytest.approx(8 / (4 * math.pi**2), rel=1e-14)
    assert r2.d1pN == pytest.approx(0.2026, abs=1e-4)
    r1 = classify_d1(base.replace(N=1))
    assert r1.d1pN == pytest.approx(8 / math.pi**2, rel=1e-14)
    assert r1.d1Tm_list == ()
    r3 = classify_d1(base.replace(N=3, d1=0.5))
    assert r3.in_admissible_set
    assert r3.d1pN == pytest.approx(0.0901, abs=1e-4)
    assert r3.d1Tm_list == pytest.approx((0.8106, 0.2026), abs=1e-4)


def test_admissibility_band(base):
    d1T1 = resonant_d1(1.0, 2.0, 1)
    p = base.replace(N=2)
    assert not classify_d1(p.replace(d1=d1T1 * (1 + 5e-7))).in_admissible_set
    assert classify_d1(p.replace(d1=d1T1 * (1 + 2e-6))).in_admissible_set
    assert not classify_d1(p.replace(d1=0.99 * positivity_threshold(1.0, 2.0, 2))).in_admissible_set


def test_threshold_chain_monotone():
    for N in range(2, 51):
        chain = [positivity_threshold(1.0, 2.0, N)] + [resonant_d1(1.0, 2.0, m) for m in range(N - 1, 0, -1)]
        assert np.all(np.diff(chain) > 0)


def test_scale_consistency(base):
    a = classify_d1(base.replace(N=4, d1=0.3))
    b = classify_d1(base.replace(N=4, d1=0.3, mu=3.0, ubar=2.0 / 3.0))
    assert a.d1pN == pytest.approx(b.d1pN, rel=1e-14)
    assert a.d1Tm_list == pytest.approx(b.d1Tm_list, rel=1e-14)
    assert a.in_admissible_set == b.in_admissible_set


def test_turing_threshold(base):
    assert turing_threshold(base, 2.0, 1) == pytest.approx(8 / math.pi**2, rel=1e-14)
    for N in (2, 3, 5):
        assert turing_threshold(base, 2.0 / N, 1) == pytest.approx(positivity_threshold(1.0, 2.0, N), rel=1e-14)
    assert turing_threshold(base.replace(mu=0.25), 1.0, 2) == pytest.approx(0.5 / (4 * math.pi**2), rel=1e-14)
    with pytest.raises(ValueError):
        turing_threshold(base, 0.0, 1)


def test_qe_positivity_threshold():
    c = 2.0 / math.pi**2
    assert qe_positivity_threshold([-0.5, 0.5], 1.0, 2.0) == pytest.approx(c)
    assert qe_positivity_threshold([-0.6, 0.6], 1.0, 2.0) == pytest.approx(1.44 * c)
    assert qe_positivity_threshold([0.0], 1.0, 2.0) == pytest.approx(c)
    with pytest.raises(ValueError):
        qe_positivity_threshold([], 1.0, 2.0)
    with pytest.raises(ValueError):
        qe_positivity_threshold([0.5, -0.5], 1.0, 2.0)


def test_equal_locations():
    assert equal_locations(1) == pytest.approx([0.0])
    assert equal_locations(2) == pytest.approx([-0.5, 0.5])
    assert equal_locations(4) == pytest.approx([-0.75, -0.25, 0.25, 0.75])


def test_config_parsing(tmp_path):
    cfg = parse_keyvalue("# header\nd1 = 1.0\nd2=0.0004  # inline\n\nchi = 1\nmu = 1\nubar = 2\nN = 3\n")
    assert cfg == {"d1": "1.0", "d2": "0.0004", "chi": "1", "mu": "1", "ubar": "2", "N": "3"}
    with pytest.raises(ValueError):
        parse_keyvalue("d1 1.0")
    path = tmp_path / "p.cfg"
    path.write_text("d1 = 1.0\nd2 = 0.0004\nchi = 1\nmu = 1\nubar = 2\n")
    p = load_params(path, {"N": "2", "d1": "0.5"})
    assert p == ModelParams(d1=0.5, d2=0.0004, chi=1.0, mu=1.0, ubar=2.0, N=2)
    with pytest.raises(KeyError):
        ModelParams.from_mapping({"d1": 1, "d2": 1, "chi": 1, "mu": 1, "ubar": 1, "D1": 2})
