import math

import numpy as np
import pytest

from spreadperc import BracketError, InvalidArgumentError, Stream, Window, ball, sample_poisson
from spreadperc.estimate import (GIANT, WRAP, bisect_monotone, giant_curve, gw_comparison, saturation_lambda,
                                 threshold_bisect, threshold_trend, torus_window)


def step(at):
    return lambda lam, batch=0: 1.0 if lam >= at else 0.0


def test_synthetic_step_recovered():
    tol = 0.01
    est = threshold_bisect(ball(2), 4.0, statistic=step(1.5), tol=tol, batches=3)
    assert abs(est.lambda_c - 1.5) <= tol
    assert est.ci_lo <= est.lambda_c <= est.ci_hi
    assert est.lambda_c > 0


def test_synthetic_giant_criterion():
    est = threshold_bisect(ball(2), 4.0, statistic=lambda lam, b: min(lam / 4, 1.0), criterion=GIANT,
                           theta=0.3, tol=1e-3, batches=2)
    assert est.lambda_c == pytest.approx(1.2, abs=1e-3)
    assert est.criterion.startswith(GIANT)


def test_bracket_error_carries_endpoints():
    with pytest.raises(BracketError) as exc:
        threshold_bisect(ball(2), 4.0, statistic=step(5.0), lam_hi=3.0)
    assert exc.value.stat_lo == 0.0 and exc.value.stat_hi == 0.0
    with pytest.raises(BracketError):
        bisect_monotone(lambda x: 1.0, 0.5, 0.0, 1.0, 0.1)


def test_saturated_threshold_is_infinite():
    # statistic never crosses even at saturation
    est = threshold_bisect(ball(2), 2.0, statistic=lambda lam, b: 0.0, allow_infinite=True, batches=2)
    assert est.lambda_c == math.inf and est.saturated and est.half_width == 0.0
    # a crossing between lam_hi and saturation is found
    est = threshold_bisect(ball(2), 2.0, statistic=step(3.5), allow_infinite=True, lam_hi=3.0, batches=2)
    assert est.lambda_c == pytest.approx(3.5, abs=0.01)
    assert saturation_lambda(ball(2), 2.0) == pytest.approx(4.0)


def test_threshold_argument_checks():
    with pytest.raises(InvalidArgumentError):
        threshold_bisect(ball(2), 4.0, statistic=step(1.5), tol=0)
    with pytest.raises(InvalidArgumentError):
        threshold_bisect(ball(2), 4.0, statistic=step(1.5), criterion=GIANT, theta=1.5)
    with pytest.raises(InvalidArgumentError):
        threshold_bisect(ball(2), 4.0, Window.cube(64.0, 2, "free"))


def test_giant_curve_lambda_zero_and_monotone():
    win = torus_window(3.0, 2, 10)
    z = giant_curve(ball(2), 3.0, [0.0], win, 4, 0)
    assert z.table()[0]["mean_C1_frac"] > 0
    c = giant_curve(ball(2), 3.0, [0.0, 0.5, 1.0, 1.5, 2.0], win, 6, 1)
    for i in range(6):
        assert np.all(np.diff(c.c1[i]) >= 0)
        assert np.all(np.diff(c.wrap[i].astype(int)) >= 0)
    # lambda = 0 gives C1 = 1 exactly
    n = [len(sample_poisson(win, 1.0, Stream.from_seed(1).child(k).child(0))) for k in range(6)]
    assert np.allclose(c.c1[:, 0], 1 / np.array(n))
    with pytest.raises(InvalidArgumentError):
        giant_curve(ball(2), 3.0, [1.0, 0.5], win, 2, 0)


def test_small_threshold_run_is_sane():
    est = threshold_bisect(ball(2), 3.0, torus_window(3.0, 2, 12), replicates=6, tol=0.05, stream=2,
                           batches=2, lam_lo=0.5, lam_hi=3.0)
    assert 1.0 < est.lambda_c < 3.0
    assert est.ci_lo <= est.lambda_c <= est.ci_hi
    assert est.row()[4] == WRAP


def test_trend_single_element():
    rep = threshold_trend(ball(2), [3.0], window_scale=12, replicates=4, tol=0.05, batches=2)
    assert len(rep.estimates) == 1 and rep.nonincreasing is None
    with pytest.raises(InvalidArgumentError):
        threshold_trend(ball(2), [4.0, 2.0])


def test_gw_comparison_rejects_subcritical():
    with pytest.raises(InvalidArgumentError):
        gw_comparison(ball(2), 1.0, 8.0)


def test_gw_comparison_lambda_four():
    res = gw_comparison(ball(2), 4.0, 8.0, torus_window(8.0, 2, 8), replicates=10, stream=3)
    assert res.ci_lo - 0.02 <= res.psi <= res.ci_hi + 0.02
    assert res.psi == pytest.approx(0.98017, abs=1e-5)
