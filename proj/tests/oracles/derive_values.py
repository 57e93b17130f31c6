"""Reference values frozen into the C++ tests.

Written independently of the C++ code: plain numpy fixed-point iteration,
scikit-learn silhouettes, numpy dense eigendecomposition. Run with
`python3 tests/oracles/derive_values.py` and compare against the constants
in the test files.
"""
import numpy as np
from sklearn.metrics import silhouette_samples


def fj_fixed_point(u0, lam, a_self, edges, c0, gam, e_self, c_aud, assign, steps=20000):
    n = len(u0)
    m = len(c0)
    W = np.zeros((n, n))
    for src, dst, w in edges:
        W[dst, src] = w
    B = 1.0 - a_self - W.sum(axis=1)
    u = u0.copy()
    c = c0.copy()
    for _ in range(steps):
        cons = c[assign]
        u_next = (1 - lam)[:, None] * (a_self[:, None] * u + W @ u + B[:, None] * cons) + lam[:, None] * u0
        c_next = np.empty_like(c)
        for j in range(m):
            aud = [i for i in range(n) if assign[i] == j]
            if aud:
                inner = e_self[j] * c[j] + c_aud[j] * u[aud].mean(axis=0)
            else:
                inner = (e_self[j] + c_aud[j]) * c[j]
            c_next[j] = (1 - gam[j]) * inner + gam[j] * c0[j]
        u, c = u_next, c_next
    return u, c, B


def equilibrium_instance():
    u0 = np.array([[0.5, -0.2], [-0.4, 0.3], [0.1, 0.9]])
    lam = np.array([0.3, 0.1, 0.5])
    a_self = np.array([0.6, 0.5, 0.7])
    edges = [(1, 0, 0.1), (2, 0, 0.05), (0, 1, 0.2), (1, 2, 0.1)]
    c0 = np.array([[0.8, 0.1], [-0.6, -0.5]])
    gam = np.array([0.2, 0.4])
    e_self = np.array([0.7, 0.6])
    c_aud = 1 - e_self
    assign = np.array([0, 1, 0])
    u, c, _ = fj_fixed_point(u0, lam, a_self, edges, c0, gam, e_self, c_aud, assign)
    print("equilibrium users:", repr(u.tolist()))
    print("equilibrium creators:", repr(c.tolist()))


def complementarity_instance():
    # Line graph 0 - 1 - 2, user 1 consumes creator 0.
    u0 = np.array([[-0.5, 0.2], [0.1, 0.4], [0.6, -0.3]])
    lam = np.array([0.2, 0.3, 0.25])
    a_self = np.array([0.6, 0.5, 0.6])
    base_edges = [(1, 0, 0.1), (0, 1, 0.1), (2, 1, 0.05), (1, 2, 0.1)]
    c0 = np.array([[0.9, 0.8], [-0.7, -0.6]])
    gam = np.array([0.3, 0.3])
    e_self = np.array([0.6, 0.7])
    c_aud = 1 - e_self
    assign = np.array([1, 0, 1])
    eps = 0.05
    u_base, c_base, _ = fj_fixed_point(u0, lam, a_self, base_edges, c0, gam, e_self, c_aud, assign)
    mass = 0.1 + 0.05
    moved_edges = [(1, 0, 0.1), (0, 1, 0.1 + eps * 0.1 / mass), (2, 1, 0.05 + eps * 0.05 / mass), (1, 2, 0.1)]
    u_moved, _, _ = fj_fixed_point(u0, lam, a_self, moved_edges, c0, gam, e_self, c_aud, assign)
    delta = u_moved[1] - u_base[1]
    direction = c_base[0] - 0.5 * (u_base[0] + u_base[2])
    print("complementarity shift:", repr(float(np.linalg.norm(delta))))
    print("complementarity projection:", repr(float(delta @ direction)))


def silhouette_instance():
    pts = np.array([[0.0, 0.0], [0.1, 0.2], [0.9, 1.0], [1.0, 0.8], [0.95, 0.9], [-0.5, 1.0], [2.0, -1.0]])
    labels = np.array([0, 0, 1, 1, 1, 0, 2])
    s = silhouette_samples(pts, labels)
    s[labels == 2] = 0.0  # singleton convention; sklearn already gives 0
    print("silhouettes:", repr(s.tolist()))
    print("mean silhouette:", repr(float(s.mean())))


def laplacian_instance():
    # 6-cycle plus chord 0-3.
    n = 6
    W = np.zeros((n, n))
    for i in range(n):
        W[i, (i + 1) % n] = W[(i + 1) % n, i] = 1
    W[0, 3] = W[3, 0] = 1
    d = W.sum(axis=1)
    L = np.eye(n) - W / np.sqrt(np.outer(d, d))
    print("laplacian eigenvalues:", repr(np.linalg.eigvalsh(L).tolist()))


if __name__ == "__main__":
    np.set_printoptions(precision=17)
    equilibrium_instance()
    complementarity_instance()
    silhouette_instance()
    laplacian_instance()
