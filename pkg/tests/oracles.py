"""Printed matrices and closed-form fields used as independent test oracles.

Nothing here imports the package: every value is written out by hand from the
displayed formulas so the tests compare two separate routes to the same number.
"""

import numpy as np

# -- two-player games ------------------------------------------------------------


def rps_matrix(eps):
    return np.array([[eps, -1.0, 1.0], [1.0, eps, -1.0], [-1.0, 1.0, eps]])


def rps_projected(eps):
    a, b, c = 2 * eps / 3, -1 - eps / 3, 1 - eps / 3
    return np.array([[a, b, c], [c, a, b], [b, c, a]])


MODIFIED_RPS = np.array([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 3.0]])
MODIFIED_RPS_PROJECTED = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, -2.0], [-1.0, 1.0, 2.0]])
MODIFIED_RPS_NEUTRALIZER = np.array([2 / 3, 0.0, 1 / 3])

# -- Brockett game ------------------------------------------------------------------

BROCKETT_A1 = np.array([[1.0, -1.0, 0.0], [-1.0, 1.0, 0.0]])
BROCKETT_A2 = np.array([[0.0, 1.0, -1.0], [0.0, -1.0, 1.0]])


def brockett_a3(p1, p2):
    """Learner 3's block at first-coordinate probabilities ``p1``, ``p2``."""
    return np.array([[-p2, p1 + p2, -p1], [p2, -(p1 + p2), p1]])


def brockett_columns(p1, p2):
    a1 = np.array([1, -1, 0, 0, -p2, p2], dtype=float)
    a2 = np.array([-1, 1, 1, -1, p1 + p2, -(p1 + p2)], dtype=float)
    a3 = np.array([0, 0, -1, 1, -p1, p1], dtype=float)
    return np.stack([a1, a2, a3], axis=1)


def xi(flat):
    """``xi_i = (x_i1 - x_i2) / 2`` for the three 2-action learners."""
    flat = np.asarray(flat)
    return 0.5 * (flat[..., 0::2] - flat[..., 1::2])


def xi_velocity(v):
    """Image of a tangent vector under the linear map to xi-coordinates."""
    v = np.asarray(v)
    return 0.5 * (v[..., 0::2] - v[..., 1::2])


def replicator_lambda(flat):
    flat = np.asarray(flat)
    return 2.0 * flat[..., 0::2] * flat[..., 1::2]


def brockett_eta_xi(flat):
    """Closed-form replicator fields ``eta_1``, ``eta_2`` in xi-coordinates."""
    lam = replicator_lambda(flat)
    x1, x2, _ = xi(flat)
    e1 = np.array([lam[0], lam[1], (x1 - x2) * lam[2]])
    e2 = np.array([-lam[0], 2 * lam[1], (2 * x1 + x2 + 1.5) * lam[2]])
    return e1, e2


def brockett_bracket_xi(flat):
    lam = replicator_lambda(flat)
    return np.array([0.0, 0.0, 3.0 * (lam[0] + lam[1]) * lam[2]])


def brockett_controls(w1, w2):
    """Controller strategy realizing ``(w1, w2)``; its entries are the W-polygon constraints / 3."""
    return np.array([1 + 2 * w1 + w2, 1 - w1 + w2, 1 - w1 - 2 * w2]) / 3.0


def brockett_integrator(state, w):
    x1, x2, _ = state
    return np.array([w[0], w[1], -x2 * w[0] + x1 * w[1]])


# -- Regulated Matching Pennies --------------------------------------------------


def rmp_columns(alpha, beta):
    a1 = np.array([1.0, 0.0, -alpha, -alpha])
    a2 = np.array([7 * beta - 5, 2 - 5 * beta, 3 - 5 * alpha, 7 * alpha - 2])
    a3 = np.array([1 - beta, 1 - beta, 0.0, -1.0])
    return np.stack([a1, a2, a3], axis=1)


def rmp_eta0(alpha, beta):
    return np.array([2 * alpha * (1 - alpha) * (2 * beta - 1), 2 * beta * (1 - beta) * (1 - 2 * alpha)])


def rmp_eta1(alpha, beta):
    return np.array([alpha * (1 - alpha), -beta * (1 - beta)])


def rmp_eta2(alpha, beta):
    return np.array([(12 * beta - 7) * alpha * (1 - alpha), (4 - 12 * alpha) * beta * (1 - beta)])


def rmp_bracket(alpha, beta):
    return -12 * alpha * beta * (1 - alpha) * (1 - beta) * np.ones(2)


def rmp_det(alpha, beta):
    p, q = alpha * (1 - alpha), beta * (1 - beta)
    return -12 * p * q * (p + q)


def reduced(flat):
    """First coordinate of each 2-action block, ``(alpha, beta)`` for RMP."""
    return np.asarray(flat)[..., 0::2]


def rmp_profile(alpha, beta):
    return np.array([alpha, 1 - alpha, beta, 1 - beta])


# -- generic helpers --------------------------------------------------------------


def center(v):
    v = np.asarray(v, dtype=float)
    return v - v.mean()


def fd_jacobian(fn, y, h=1e-6):
    y = np.asarray(y, dtype=float)
    cols = []
    for j in range(y.size):
        e = np.zeros_like(y)
        e[j] = h
        cols.append((fn(y + e) - fn(y - e)) / (2 * h))
    return np.stack(cols, axis=1)


def rk4(f, y0, t, dt):
    """Plain fixed-step RK4 used as an independent reference integrator."""
    y = np.array(y0, dtype=float)
    n = int(round(t / dt))
    h = t / n
    for _ in range(n):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y
