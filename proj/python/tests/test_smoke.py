import json
import math

import numpy as np
import pytest

import resgp


def currin_data(seed=0):
    return resgp.benchmark_dataset("currin", [20, 5], seed)


def test_train_predict_interpolates():
    levels = currin_data()
    info = resgp.benchmark_info("currin")
    model = resgp.train(levels, domain=info["domain"])
    assert model.fidelities == 2
    x_top, y_top = levels[-1]
    mean, var = model.predict(x_top)
    assert mean.shape == y_top.shape
    assert np.all(np.abs(mean - y_top) <= 1e-4 * (1 + np.abs(y_top)))
    assert np.all(var >= 0)


def test_joint_nll_is_level_sum():
    model = resgp.train(currin_data(1))
    total = sum(model.level_nll(f) for f in range(1, model.fidelities + 1))
    assert model.joint_nll() == pytest.approx(total, rel=1e-12)


def test_model_json_round_trip(tmp_path):
    model = resgp.train(currin_data(2))
    path = tmp_path / "model.json"
    model.save(str(path))
    back = resgp.Model.load(str(path))
    q = resgp.design_uniform(model.domain, 30, 5)
    m1, v1 = model.predict(q)
    m2, v2 = back.predict(q)
    assert np.allclose(m1, m2, atol=1e-10)
    assert np.allclose(v1, v2, atol=1e-10)
    assert "levels" in json.loads(model.to_json())


def test_metrics_example():
    truth = np.array([[1.0], [3.0]])
    r = resgp.metrics(truth, np.ones(2), truth)
    assert r["rmse"] == 0.0
    assert r["r2"] == 1.0
    assert r["mnll"] == pytest.approx(0.5 * math.log(2 * math.pi))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    x = rng.uniform(size=(6, 2))
    r = rng.normal(size=(6, 2))
    p = resgp.KernelHyperparams(1.3, np.array([2.0, 0.7]))
    g = resgp.nll_gradient(p, x, r)
    logp = np.log([1.3, 2.0, 0.7])
    h = 1e-5
    for k in range(3):
        up, dn = logp.copy(), logp.copy()
        up[k] += h
        dn[k] -= h
        fu = resgp.neg_log_likelihood(resgp.KernelHyperparams(math.exp(up[0]), np.exp(up[1:])), x, r)
        fd = resgp.neg_log_likelihood(resgp.KernelHyperparams(math.exp(dn[0]), np.exp(dn[1:])), x, r)
        assert g[k] == pytest.approx((fu - fd) / (2 * h), rel=1e-4, abs=1e-6)


def test_active_learning_and_replay():
    dom = resgp.benchmark_info("currin")["domain"]
    pool = resgp.design_uniform(dom, 60, 3)

    def oracle(f, x):
        return resgp.evaluate("currin", f, x.reshape(1, -1))[0]

    out = resgp.sequential_construct(pool, oracle, [10, 3], seed=1, domain=dom)
    low, high = out["selected"]
    assert len(low) == 10 and len(high) == 3
    assert set(high) <= set(low)
    assert resgp.replay_audit(pool, out["audit"], dom) == 11


def test_bounds_and_errors():
    x = np.linspace(0, 1, 8).reshape(-1, 1)
    model = resgp.train([(x, np.sin(3 * x))], domain=resgp.DomainBox.unit(1))
    b = resgp.uniform_bound(model, delta=0.05, tau=1e-3, l_y=3.0, x=np.array([[0.3], [0.55]]))
    assert b["covering"] == resgp.covering_number_bound(resgp.DomainBox.unit(1), 1e-3)
    assert np.all(b["g"] > 0)

    with pytest.raises(resgp.NestingError):
        resgp.train([(x, np.sin(x)), (x + 0.01, np.sin(x))])
    with pytest.raises(ValueError):
        resgp.evaluate("currin", 1, np.array([[2.0, 0.5]]))
    multi = resgp.train([(x, np.hstack([x, x**2]))])
    with pytest.raises(resgp.UnsupportedError):
        resgp.uniform_bound(multi)
