"""Cross-backend agreement and finite-difference checks for the hot kernels."""

import numpy as np
import pytest

from helpers import central_diff_grad, grad_close
from nlrb import backend
from nlrb import kernels_nb, kernels_np
from nlrb.net import ACT_SWISH, ACT_TANH, MlpSpec, init_params


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(123)
    B, n, r, h, m = 6, 17, 4, 5, 9
    p = h * r + 2 * h + 1
    return {
        "B": B,
        "n": n,
        "r": r,
        "h": h,
        "m": m,
        "theta": rng.normal(size=(B, p)) * 0.7,
        "theta1": rng.normal(size=p) * 0.7,
        "f0": rng.normal(size=(n, r)),
        "f1": rng.normal(size=(n, r)),
        "g0": rng.normal(size=(B, n)),
        "g1": rng.normal(size=(B, n)),
        "fm0": rng.normal(size=(m, r)),
        "fm1": rng.normal(size=(m, r)),
        "fm2": rng.normal(size=(m, r)),
        "gm0": rng.normal(size=m),
        "gm1": rng.normal(size=m),
        "gm2": rng.normal(size=m),
    }


class TestBackendAgreement:
    def test_u_val_fwd(self, data):
        a = kernels_np.u_val_fwd(data["theta"], data["r"], data["h"], ACT_TANH, data["f0"])
        b = kernels_nb.u_val_fwd(data["theta"], data["r"], data["h"], ACT_TANH, data["f0"])
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-13)

    def test_u_jet1(self, data):
        r, h = data["r"], data["h"]
        a0, a1, ca = kernels_np.u_jet1_fwd(data["theta"], r, h, ACT_TANH, data["f0"], data["f1"])
        b0, b1, cb = kernels_nb.u_jet1_fwd(data["theta"], r, h, ACT_TANH, data["f0"], data["f1"])
        np.testing.assert_allclose(a0, b0, rtol=1e-12, atol=1e-13)
        np.testing.assert_allclose(a1, b1, rtol=1e-12, atol=1e-13)
        ga = kernels_np.u_jet1_bwd(
            data["theta"], r, h, ACT_TANH, data["f0"], data["f1"], ca, data["g0"], data["g1"]
        )
        gb = kernels_nb.u_jet1_bwd(
            data["theta"], r, h, ACT_TANH, data["f0"], data["f1"], cb, data["g0"], data["g1"]
        )
        for x, y in zip(ga, gb):
            np.testing.assert_allclose(x, y, rtol=1e-11, atol=1e-12)

    def test_u_jet2(self, data):
        r, h = data["r"], data["h"]
        outs_a = kernels_np.u_jet2_fwd(
            data["theta1"], r, h, ACT_TANH, data["fm0"], data["fm1"], data["fm2"]
        )
        outs_b = kernels_nb.u_jet2_fwd(
            data["theta1"], r, h, ACT_TANH, data["fm0"], data["fm1"], data["fm2"]
        )
        for x, y in zip(outs_a[:3], outs_b[:3]):
            np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-13)
        ga = kernels_np.u_jet2_bwd(
            data["theta1"], r, h, ACT_TANH,
            data["fm0"], data["fm1"], data["fm2"], outs_a[3],
            data["gm0"], data["gm1"], data["gm2"],
        )
        gb = kernels_nb.u_jet2_bwd(
            data["theta1"], r, h, ACT_TANH,
            data["fm0"], data["fm1"], data["fm2"], outs_b[3],
            data["gm0"], data["gm1"], data["gm2"],
        )
        np.testing.assert_allclose(ga, gb, rtol=1e-11, atol=1e-12)

    def test_u_val_single_bwd(self, data):
        r, h = data["r"], data["h"]
        a = kernels_np.u_val_single_bwd(data["theta1"], r, h, ACT_TANH, data["fm0"], data["gm0"])
        b = kernels_nb.u_val_single_bwd(data["theta1"], r, h, ACT_TANH, data["fm0"], data["gm0"])
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-13)

    def test_online_loop(self, data):
        r, h = data["r"], data["h"]
        rng = np.random.default_rng(5)
        theta_star = data["theta1"]
        f0b = rng.normal(size=(2, r))
        bc = np.zeros(2)
        s = rng.normal(size=data["m"])
        args = (
            theta_star, theta_star, r, h, ACT_TANH,
            data["fm0"], data["fm1"], data["fm2"], f0b, bc, s,
            1.0, -1.0, 0.0, 10.0, 1e-2, 0.99, 1e-3, 0.9, 0.999, 1e-8, 1e-12, 200,
        )
        ta, la, ea, da = kernels_np.online_adapt_loop(*args)
        tb, lb, eb, db = kernels_nb.online_adapt_loop(*args)
        assert ea == eb and da == db
        np.testing.assert_allclose(la, lb, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(ta, tb, rtol=1e-8, atol=1e-10)


class TestJetDerivatives:
    """Jets must equal directional derivatives of the plain forward pass."""

    def test_mlp_jet1_is_directional_derivative(self):
        spec = MlpSpec((3, 6, 2), "swish")
        rng = np.random.default_rng(0)
        flat = init_params(spec, rng)
        x0 = rng.normal(size=(5, 3))
        x1 = rng.normal(size=(5, 3))
        _, y1, _ = kernels_np.mlp_jet1_forward(spec, flat, x0, x1)
        eps = 1e-6
        yp, _ = kernels_np.mlp_forward(spec, flat, x0 + eps * x1)
        ym, _ = kernels_np.mlp_forward(spec, flat, x0 - eps * x1)
        np.testing.assert_allclose(y1, (yp - ym) / (2 * eps), rtol=1e-6, atol=1e-8)

    def test_mlp_jet2_is_second_directional_derivative(self):
        spec = MlpSpec((4, 5, 3), "tanh")
        rng = np.random.default_rng(1)
        flat = init_params(spec, rng)
        x0 = rng.normal(size=(4, 4))
        x1 = rng.normal(size=(4, 4))
        x2 = rng.normal(size=(4, 4))
        y0, y1, y2 = kernels_np.mlp_jet2_forward(spec, flat, x0, x1, x2)
        # path c(t) = x0 + t x1 + t^2/2 x2 has c'(0)=x1, c''(0)=x2
        eps = 1e-4
        path = lambda t: kernels_np.mlp_forward(spec, flat, x0 + t * x1 + 0.5 * t * t * x2)[0]
        np.testing.assert_allclose(y1, (path(eps) - path(-eps)) / (2 * eps), rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(
            y2, (path(eps) - 2 * path(0.0) + path(-eps)) / eps**2, rtol=1e-5, atol=1e-6
        )

    def test_u_jet1_matches_mlp_jets(self, data):
        r, h = data["r"], data["h"]
        spec = MlpSpec((r, h, 1), "tanh")
        theta = data["theta1"]
        u0, u1, _ = kernels_np.u_jet1_fwd(theta[None, :], r, h, ACT_TANH, data["f0"], data["f1"])
        y0, y1, _ = kernels_np.mlp_jet1_forward(spec, theta, data["f0"], data["f1"])
        np.testing.assert_allclose(u0[0], y0[:, 0], rtol=1e-13)
        np.testing.assert_allclose(u1[0], y1[:, 0], rtol=1e-13)


class TestKernelGradients:
    def test_u_jet1_bwd_matches_fd(self, data):
        r, h = data["r"], data["h"]
        theta, f0, f1 = data["theta"], data["f0"], data["f1"]
        g0, g1 = data["g0"], data["g1"]

        def scalar(th_flat):
            th = th_flat.reshape(theta.shape)
            u0, u1, _ = kernels_np.u_jet1_fwd(th, r, h, ACT_TANH, f0, f1)
            return float(np.sum(g0 * u0) + np.sum(g1 * u1))

        _, _, cache = kernels_np.u_jet1_fwd(theta, r, h, ACT_TANH, f0, f1)
        gtheta, gf0, gf1 = kernels_np.u_jet1_bwd(theta, r, h, ACT_TANH, f0, f1, cache, g0, g1)
        fd = central_diff_grad(scalar, theta.ravel())
        worst, tol = grad_close(gtheta.ravel(), fd, rtol=1e-5)
        assert worst < tol

        def scalar_f(ff):
            f0v = ff[: f0.size].reshape(f0.shape)
            f1v = ff[f0.size :].reshape(f1.shape)
            u0, u1, _ = kernels_np.u_jet1_fwd(theta, r, h, ACT_TANH, f0v, f1v)
            return float(np.sum(g0 * u0) + np.sum(g1 * u1))

        fdf = central_diff_grad(scalar_f, np.concatenate([f0.ravel(), f1.ravel()]))
        worst, tol = grad_close(np.concatenate([gf0.ravel(), gf1.ravel()]), fdf, rtol=1e-5)
        assert worst < tol

    def test_u_jet2_bwd_matches_fd(self, data):
        r, h = data["r"], data["h"]
        theta = data["theta1"]
        f0, f1, f2 = data["fm0"], data["fm1"], data["fm2"]
        g0, g1, g2 = data["gm0"], data["gm1"], data["gm2"]

        def scalar(th):
            u0, u1, u2, _ = kernels_np.u_jet2_fwd(th, r, h, ACT_TANH, f0, f1, f2)
            return float(g0 @ u0 + g1 @ u1 + g2 @ u2)

        *_, cache = kernels_np.u_jet2_fwd(theta, r, h, ACT_TANH, f0, f1, f2)
        g = kernels_np.u_jet2_bwd(theta, r, h, ACT_TANH, f0, f1, f2, cache, g0, g1, g2)
        worst, tol = grad_close(g, central_diff_grad(scalar, theta), rtol=1e-5)
        assert worst < tol

    def test_mlp_jet1_backward_matches_fd(self):
        spec = MlpSpec((4, 6, 3), "swish")
        rng = np.random.default_rng(9)
        flat = init_params(spec, rng)
        x0 = rng.normal(size=(7, 4))
        x1 = rng.normal(size=(7, 4))
        g0 = rng.normal(size=(7, 3))
        g1 = rng.normal(size=(7, 3))

        def scalar(p):
            y0, y1, _ = kernels_np.mlp_jet1_forward(spec, p, x0, x1)
            return float(np.sum(g0 * y0) + np.sum(g1 * y1))

        _, _, cache = kernels_np.mlp_jet1_forward(spec, flat, x0, x1)
        g, _, _ = kernels_np.mlp_jet1_backward(spec, flat, cache, g0, g1)
        worst, tol = grad_close(g, central_diff_grad(scalar, flat), rtol=1e-5)
        assert worst < tol

    def test_mlp_backward_matches_fd(self):
        spec = MlpSpec((2, 8, 8, 3), "swish")
        rng = np.random.default_rng(10)
        flat = init_params(spec, rng)
        x = rng.normal(size=(5, 2))
        gy = rng.normal(size=(5, 3))

        def scalar(p):
            y, _ = kernels_np.mlp_forward(spec, p, x)
            return float(np.sum(gy * y))

        _, cache = kernels_np.mlp_forward(spec, flat, x)
        g, _ = kernels_np.mlp_backward(spec, flat, cache, gy)
        worst, tol = grad_close(g, central_diff_grad(scalar, flat), rtol=1e-5)
        assert worst < tol


def test_backend_env_resolution(monkeypatch):
    monkeypatch.setenv("NLRB_BACKEND", "numpy")
    assert backend.backend_name() == "numpy"
    assert backend.kernels() is kernels_np
    monkeypatch.setenv("NLRB_BACKEND", "numba")
    assert backend.kernels() is kernels_nb
    monkeypatch.setenv("NLRB_BACKEND", "fortran")
    with pytest.raises(Exception):
        backend.backend_name()
