import numpy as np
import pytest
from scipy import integrate, special

from riskalloc.copulas import GaussianCopula, StudentTCopula
from riskalloc.marginals import Normal, StudentT
from riskalloc.models import JointLossModel, equicorrelation, preset, student_t_model
from riskalloc.oracle import elliptical_oracle, standard_es, standard_measure


def _quantile_integral(quantile, a, b):
    val, err = integrate.quad(quantile, a, b, limit=200)
    assert err < 1e-6
    return val / (b - a)


@pytest.mark.parametrize("nu,level", [(5.0, 0.99), (6.0, 0.99), (2.5, 0.9)])
def test_t_es_matches_tail_integral(nu, level):
    g = StudentT(nu)
    # the quantile integral has an integrable singularity at 1, so
    # integrate the tail mean z f(z) instead
    tail, err = integrate.quad(lambda z: z * g.pdf(z), g.quantile(level), np.inf)
    assert err < 1e-7
    assert standard_es(g, level) == pytest.approx(tail / (1.0 - level), rel=1e-8)


def test_normal_es_matches_tail_integral():
    g = Normal()
    val, err = integrate.quad(lambda z: z * g.pdf(z), g.quantile(0.975), np.inf)
    assert err < 1e-9
    assert standard_es(g, 0.975) == pytest.approx(val / 0.025, rel=1e-10)


@pytest.mark.parametrize("generator", [Normal(), StudentT(5.0)])
def test_rvar_matches_quantile_integral(generator):
    a, b = 0.9, 0.99
    val = _quantile_integral(generator.quantile, a, b)
    assert standard_measure(generator, "rvar", (a, b)) == pytest.approx(val, rel=1e-8)


def test_rvar_upper_one_equals_es():
    g = StudentT(6.0)
    assert standard_measure(g, "rvar", (0.95, 1.0)) == pytest.approx(
        standard_es(g, 0.95), rel=1e-12
    )


def test_var_kind_is_generator_quantile():
    g = StudentT(5.0)
    assert standard_measure(g, "var", (0.99,)) == special.stdtrit(5, 0.99)


def test_es_needs_nu_above_one():
    with pytest.raises(ValueError, match="nu > 1"):
        standard_es(StudentT(1.0), 0.95)


def test_equal_split_identity_corr():
    m = JointLossModel([Normal(), Normal(), Normal()], GaussianCopula(np.eye(3)))
    a = elliptical_oracle(m, "es", (0.95,))
    rho = np.sqrt(3.0) * Normal().pdf(Normal().quantile(0.95)) / 0.05
    assert np.allclose(a, rho / 3.0, rtol=1e-12)


def test_nonelliptical_rejected():
    with pytest.raises(ValueError, match="elliptical"):
        elliptical_oracle(preset("M1"), "es", (0.99,))
    # t copula over normal margins is not a multivariate t
    mixed = JointLossModel([Normal(), Normal()], StudentTCopula(5.0, np.eye(2)))
    with pytest.raises(ValueError, match="elliptical"):
        elliptical_oracle(mixed, "es", (0.99,))
    # t margins with degrees of freedom different from the copula's
    uneven = JointLossModel([StudentT(5.0), StudentT(7.0)], StudentTCopula(5.0, np.eye(2)))
    with pytest.raises(ValueError, match="elliptical"):
        elliptical_oracle(uneven, "es", (0.99,))


def test_m2_es_99_frozen():
    a = elliptical_oracle(preset("M2"), "es", (0.99,))
    assert np.allclose(a, [3.740789, 3.117324, 3.740789], atol=5e-5)
    assert a[0] == pytest.approx(a[2], rel=1e-12)
    # middle coordinate carries the smaller share: (Sigma 1)_2 = 5/3 vs 2
    assert a[1] == pytest.approx(a[0] * (5.0 / 3.0) / 2.0, rel=1e-12)


def test_t6_equicorrelation_frozen():
    m = student_t_model(6.0, equicorrelation(5, 1.0 / 12.0))
    a = elliptical_oracle(m, "es", (0.99,))
    assert np.allclose(a, a[0])
    assert a[0] == pytest.approx(2.082388, abs=5e-5)


def test_oracle_matches_large_sample_conditional_means():
    # scaled/correlated normal model, one sigma doubled: the oracle must
    # track E[X_j | sum event] computed from a large i.i.d. sample
    rng = np.random.default_rng(7)
    corr = np.array([[1.0, 0.3, 0.1], [0.3, 1.0, 0.2], [0.1, 0.2, 1.0]])
    sig = np.array([2.0, 1.0, 1.0])
    mu = np.array([0.5, -0.2, 0.0])
    model = JointLossModel(
        [Normal(m, s) for m, s in zip(mu, sig)], GaussianCopula(corr)
    )
    cov = corr * np.outer(sig, sig)
    n = 10_000_000
    z = rng.standard_normal((n, 3)) @ np.linalg.cholesky(cov).T + mu
    s = z.sum(axis=1)

    # ES event
    v = np.quantile(s, 0.95)
    rows = z[s >= v]
    est = rows.mean(axis=0)
    se = rows.std(axis=0, ddof=1) / np.sqrt(len(rows))
    a_es = elliptical_oracle(model, "es", (0.95,))
    assert np.all(np.abs(a_es - est) < 3.0 * se)

    # band event, exact RVaR form
    lo, hi = np.quantile(s, [0.94, 0.96])
    rows = z[(s >= lo) & (s <= hi)]
    est = rows.mean(axis=0)
    se = rows.std(axis=0, ddof=1) / np.sqrt(len(rows))
    a_rv = elliptical_oracle(model, "rvar", (0.94, 0.96))
    assert np.all(np.abs(a_rv - est) < 3.0 * se)

    # var kind: the sum's quantile itself
    a_var = elliptical_oracle(model, "var", (0.99,))
    assert a_var.sum() == pytest.approx(np.quantile(s, 0.99), abs=0.01)
