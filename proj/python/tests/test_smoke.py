import math

import numpy as np
import pytest

import adfs


def test_quadratic_prox():
    f = adfs.ComponentFunction.quadratic(1.0, np.zeros(2))
    np.testing.assert_allclose(f.prox(1.0, np.array([2.0, 0.0])), [1.0, 0.0])


def test_logistic_moreau_identity():
    f = adfs.ComponentFunction.logistic(np.array([0.5, -1.0]), 1.0)
    x = np.array([0.3, 0.7])
    eta = 0.8
    lhs = f.prox(eta, x) + eta * f.prox_conjugate(1.0 / eta, x / eta)
    np.testing.assert_allclose(lhs, x, atol=1e-12)


def test_reference_minimizer_gradient():
    p = adfs.generate_synthetic(2, 4, 3, 0.5, 1)
    theta, value = adfs.reference_minimizer(p)
    assert np.linalg.norm(p.gradient(theta)) < 1e-10
    assert math.isclose(p.value(theta), value)


def test_run_experiment():
    out = adfs.run_experiment({"grid": "1x2", "m": "2", "d": "2", "T": "100", "algorithms": "adfs,point_saga"})
    assert len(out["runs"]) == 2
    run = out["runs"][0]
    assert run["algorithm"] == "adfs"
    assert len(run["iteration"]) == 101
    assert all(s >= 0.0 for s in run["primal_subopt"])
    assert "F_star" in out["summary"]


def test_dump_parameters_single_machine():
    text = adfs.dump_parameters({"grid": "1x1", "m": "4"})
    assert "p_comm = 0\n" in text


def test_config_error():
    with pytest.raises(adfs.ConfigError, match="tau"):
        adfs.run_experiment({"tau": "-1"})


def test_theorem4():
    r = adfs.check_theorem4({"grid": "2x2", "m": "2", "tau": "5", "p_comm": "0.5", "theorem4.t": "2000",
                             "theorem4.trials": "3"})
    assert r["trials"] == 3
    assert r["exceed_count"] == 0
