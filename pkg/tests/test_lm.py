import numpy as np
import pytest

from binary_iop.lm import LmResult, LmSettings, jacobian_fd, lm_direction, lm_solve

TRUTH = np.array([1.0, 0.0, 0.0, 1.0])


class Stub:
    """Forward model on a fixed grid of points, for tests without the PDE."""

    def __init__(self, fn, theta_true):
        self.x = np.linspace(-1, 1, 30)
        self.fn = fn
        self.observed = fn(np.asarray(theta_true, dtype=float), self.x)

    def predict(self, theta):
        return self.fn(np.asarray(theta, dtype=float), self.x)


def affine(t, x):
    M = np.column_stack([x, x**2, np.sin(3 * x), 1 + 0 * x])
    return M @ t + 0.3


def smooth(t, x):
    return np.exp(-t[3] ** 2 * x**2) * (1 + t[0] * x) + t[1] * np.tanh(x) + t[2] * x**3


def test_settings_validation():
    for bad in [dict(lambda0=-1), dict(lambda_up=1.0), dict(lambda_down=1.0), dict(tol_step=0), dict(fd_step=0)]:
        with pytest.raises(ValueError):
            LmSettings(**bad)


def test_jacobian_exact_on_affine():
    stub = Stub(affine, TRUTH)
    M = np.column_stack([stub.x, stub.x**2, np.sin(3 * stub.x), 1 + 0 * stub.x])
    J = jacobian_fd(stub, [0.3, -2.0, 5.0, 0.7])
    np.testing.assert_allclose(J, M, rtol=0, atol=1e-10)


def test_jacobian_on_forward_model(example1_spec):
    J = jacobian_fd(example1_spec, TRUTH)
    norms = np.linalg.norm(J, axis=0)
    assert np.all(np.isfinite(norms)) and np.all(norms > 0)
    # one-sided differences at half step agree to O(h)
    h = 0.5e-5
    base = example1_spec.predict(TRUTH)
    for p in range(4):
        e = np.zeros(4)
        e[p] = h
        fwd = (example1_spec.predict(TRUTH + e) - base) / h
        assert np.max(np.abs(fwd - J[:, p])) <= 1e-3 * max(1.0, np.max(np.abs(J[:, p])))


def test_jacobian_richardson():
    stub = Stub(smooth, TRUTH)
    theta = np.array([0.4, 0.2, -0.3, 0.9])
    J1 = jacobian_fd(stub, theta, 1e-3)
    J2 = jacobian_fd(stub, theta, 2e-3)
    J0 = jacobian_fd(stub, theta, 1e-6)
    # central differences: error ~ C h^2, so doubling h changes entries by ~3 C h^2
    assert np.max(np.abs(J2 - J1)) < 1e-5
    assert np.max(np.abs(J2 - J0)) / max(np.max(np.abs(J1 - J0)), 1e-14) == pytest.approx(4.0, rel=0.1)


def test_direction_tends_to_gradient():
    rng = np.random.default_rng(0)
    J = rng.standard_normal((30, 4))
    r = rng.standard_normal(30)
    d = lm_direction(J, r, 1e6)
    g = J.T @ r
    cos = d @ g / (np.linalg.norm(d) * np.linalg.norm(g))
    assert cos > 0.99


def test_init_at_truth(example1_spec):
    res = lm_solve(example1_spec, TRUTH)
    assert res.iterations <= 2 and res.converged
    assert res.residual_history[-1] < 1e-8


def test_example1_from_origin(example1_spec):
    res = lm_solve(example1_spec, [0, 0, 0, 0.05])
    assert res.converged
    np.testing.assert_allclose(res.theta_final, TRUTH, atol=0.02)


def test_accepted_steps_reduce_residual(example1_spec):
    res = lm_solve(example1_spec, [0.5, 0.5, 0.5, 0.5])
    hist = np.array(res.residual_history)
    assert np.all(np.diff(hist) < 0)
    assert len(res.theta_history) == len(hist) == len(res.lambda_history)


def test_quadratic_convergence_on_linear_stub():
    stub = Stub(affine, [0.3, -0.1, 0.2, 0.5])
    res = lm_solve(stub, [0.35, -0.12, 0.22, 0.45], LmSettings(lambda0=1e-9))
    h = res.residual_history
    assert h[1] / h[0] < 0.1
    assert res.converged


def test_smooth_stub_recovery():
    target = np.array([0.4, 0.2, -0.3, 0.9])
    res = lm_solve(Stub(smooth, target), [0, 0, 0, 0.5])
    np.testing.assert_allclose(res.theta_final, target, atol=1e-5)


def test_iteration_budget():
    res = lm_solve(Stub(smooth, [0.4, 0.2, -0.3, 0.9]), [0, 0, 0, 0.5], LmSettings(max_iters=1))
    assert res.iterations == 1 and res.termination_reason == "max_iters" and not res.converged


def test_nonpositive_sigma_start_reported():
    res = lm_solve(Stub(smooth, TRUTH), [0, 0, 0, 0.0])
    assert not res.converged and "initial evaluation failed" in res.termination_reason


def test_projection_keeps_iterates_in_box(example1_spec):
    res = lm_solve(example1_spec, [3.5] * 4, LmSettings(project=True, max_iters=20))
    assert all(example1_spec.prior.contains(t) for t in res.theta_history)


def test_trace_csv(tmp_path, example1_spec):
    res = lm_solve(example1_spec, [0, 0, 0, 0.05], LmSettings(max_iters=3))
    res.to_csv(tmp_path / "lm.csv")
    lines = (tmp_path / "lm.csv").read_text().splitlines()
    assert lines[0] == "iter,theta1,theta2,theta3,sigma0,residual,lambda"
    assert len(lines) == len(res.residual_history) + 1
    assert isinstance(res, LmResult) and res.params(0.05).sigma0 == res.theta_final[3]
