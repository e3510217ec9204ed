import math

import numpy as np
import pytest

from fraclt.regime import ProblemSpec, classify, phi1


def test_brownian_d1_case():
    # (1,1,1/2,1/2,1): tau=1, beta=1.5, eta=0.5, exponent=3, dim_m2=1.5, dim_d2=1
    r = classify(ProblemSpec(1, 1, 0.5, 0.5, 1))
    assert r.exists
    assert r.tau == 1
    assert r.beta_tau == pytest.approx(1.5, abs=0)
    assert r.eta_tau == pytest.approx(0.5, abs=0)
    assert r.scaling_exponent == pytest.approx(3.0, abs=0)
    assert r.dim_m2 == pytest.approx(1.5, abs=0)
    assert r.dim_d2 == pytest.approx(1.0, abs=0)


@pytest.mark.parametrize("h,d", [(0.5, 4), (0.5, 5), (0.8, 3), (2 / 3, 3), (0.9, 4)])
def test_same_index_nonexistence_when_hd_at_least_two(h, d):
    # (1,1,H,H,d) with H*d >= 2 never admits the local time
    assert h * d >= 2
    assert not classify(ProblemSpec(1, 1, h, h, d)).exists


def test_tau1_anisotropic_case():
    # Hand evaluation: N1/a1 = 2.5 > d=2 so tau=1; beta = 2 - 0.4*2 = 1.2;
    # eta = 0.4*2/1 = 0.8; dim_d2 case (N1 > a1 d, N2 <= a2 d) -> N2/a2 = 1.25.
    r = classify(ProblemSpec(1, 1, 0.4, 0.8, 2))
    assert r.exists and r.tau == 1
    assert r.beta_tau == pytest.approx(1.2, rel=1e-15)
    assert r.eta_tau == pytest.approx(0.8, rel=1e-15)
    assert r.dim_d2 == pytest.approx(1.25, rel=1e-15)


def test_tau2_case():
    # N1/a1 = 5/3 <= 2 < 10/3: tau=2; beta = 1 + 1 - 1.2 = 0.8;
    # eta = 1.2 + 1 - 1 = 1.2; dim_d2 case 4 -> 10/3 - 2 = 4/3.
    r = classify(ProblemSpec(1, 1, 0.6, 0.6, 2))
    assert r.exists and r.tau == 2
    assert r.beta_tau == pytest.approx(0.8, rel=1e-12)
    assert r.eta_tau == pytest.approx(1.2, rel=1e-12)
    assert r.dim_m2 == pytest.approx(0.8, rel=1e-12)
    assert r.dim_d2 == pytest.approx(4 / 3, rel=1e-12)


def test_critical_spec_flagged_and_undefined():
    r = classify(ProblemSpec(1, 1, 0.5, 0.5, 4))
    assert r.critical and not r.exists
    assert r.scaling_exponent == pytest.approx(0.0, abs=1e-14)
    assert r.tau is None and r.beta_tau is None and r.eta_tau is None
    assert r.dim_m2 is None and r.dim_d2 is None


def test_log_case_constants_collapse():
    # n1 == alpha1*d forces beta = n2 and eta = 1
    r = classify(ProblemSpec(1, 1, 0.5, 0.5, 2))
    assert r.exists and r.log_case and r.tau == 2
    assert r.beta_tau == pytest.approx(1.0, abs=0)
    assert r.eta_tau == pytest.approx(1.0, abs=1e-15)


def test_spec_validation_and_normalization():
    with pytest.raises(ValueError):
        ProblemSpec(0, 1, 0.5, 0.5, 1)
    with pytest.raises(ValueError):
        ProblemSpec(1, 1, 1.0, 0.5, 1)
    with pytest.raises(ValueError):
        ProblemSpec(1, 1, 0.5, 0.5, 0)
    s = ProblemSpec(2, 1, 0.8, 0.3, 2)
    assert s.swapped
    assert (s.n1, s.n2, s.alpha1, s.alpha2) == (1, 2, 0.3, 0.8)


def test_swap_yields_identical_report():
    rng = np.random.default_rng(7)
    for _ in range(200):
        n1, n2 = rng.integers(1, 5, size=2)
        a = np.sort(rng.uniform(0.05, 0.95, size=2))
        d = int(rng.integers(1, 7))
        r1 = classify(ProblemSpec(int(n1), int(n2), a[0], a[1], d))
        r2 = classify(ProblemSpec(int(n2), int(n1), a[1], a[0], d))
        assert r1 == r2


def test_existence_iff_arithmetic_threshold():
    rng = np.random.default_rng(11)
    for _ in range(10_000):
        n1, n2 = (int(v) for v in rng.integers(1, 5, size=2))
        a = np.sort(rng.uniform(0.05, 0.95, size=2))
        d = int(rng.integers(1, 9))
        r = classify(ProblemSpec(n1, n2, a[0], a[1], d))
        assert r.exists == (n1 / a[0] + n2 / a[1] > d)


def test_beta_algebraic_identities():
    rng = np.random.default_rng(13)
    for _ in range(2000):
        n1, n2 = (int(v) for v in rng.integers(1, 5, size=2))
        a = np.sort(rng.uniform(0.05, 0.95, size=2))
        d = int(rng.integers(1, 9))
        spec = ProblemSpec(n1, n2, a[0], a[1], d)
        r = classify(spec)
        if not r.exists:
            continue
        if r.tau == 1:
            assert r.beta_tau == pytest.approx(spec.n - a[0] * d, rel=1e-12)
        else:
            # beta_2 = alpha2 * scaling_exponent
            assert r.beta_tau == pytest.approx(a[1] * r.scaling_exponent, rel=1e-9)


def test_betaga_sandwich_over_random_specs():
    # (n - beta)/n <= eta <= n - beta for 10^4 random existing specs
    rng = np.random.default_rng(17)
    checked = 0
    while checked < 10_000:
        n1, n2 = (int(v) for v in rng.integers(1, 6, size=2))
        a = np.sort(rng.uniform(0.05, 0.95, size=2))
        d = int(rng.integers(1, 10))
        spec = ProblemSpec(n1, n2, a[0], a[1], d)
        r = classify(spec)
        if not r.exists:
            continue
        n = spec.n
        lo, hi = (n - r.beta_tau) / n, n - r.beta_tau
        assert lo <= r.eta_tau + 1e-12
        assert r.eta_tau <= hi + 1e-12
        checked += 1


def test_dim_m2_equals_beta_whenever_exists():
    rng = np.random.default_rng(19)
    for _ in range(2000):
        n1, n2 = (int(v) for v in rng.integers(1, 5, size=2))
        a = np.sort(rng.uniform(0.05, 0.95, size=2))
        d = int(rng.integers(1, 9))
        r = classify(ProblemSpec(n1, n2, a[0], a[1], d))
        if r.exists:
            assert r.dim_m2 == r.beta_tau


def test_phi1_generic_loglog_collapse():
    # at r = e^-e, loglog(1/r) = 1 so phi1 = r^beta exactly
    spec = ProblemSpec(1, 1, 0.5, 0.5, 1)  # beta=1.5, eta=0.5
    r = math.exp(-math.e)
    assert phi1(spec, r) == pytest.approx(r**1.5, rel=1e-14)


def test_phi1_log_branch_value():
    # (1,1,1/2,1/2,2) log case with alpha1=alpha2: phi1(e^-e) = r * log(e+1)
    spec = ProblemSpec(1, 1, 0.5, 0.5, 2)
    r = math.exp(-math.e)
    assert phi1(spec, r) == pytest.approx(r * math.log(math.e + 1.0), rel=1e-14)


def test_phi1_monotone_near_zero():
    spec = ProblemSpec(1, 1, 0.5, 0.5, 1)
    rs = np.geomspace(1e-12, 1e-3, 40)
    vals = [phi1(spec, float(r)) for r in rs]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_phi1_domain_errors():
    spec = ProblemSpec(1, 1, 0.5, 0.5, 1)
    for bad in (0.0, 1.0 / math.e, 0.5, -0.1):
        with pytest.raises(ValueError):
            phi1(spec, bad)
    with pytest.raises(ValueError):
        phi1(ProblemSpec(1, 1, 0.5, 0.5, 5), 1e-3)  # subcritical: undefined
