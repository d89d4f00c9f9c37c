"""Grid-based reference solver used to cross-check the profile solver.

It shares nothing with :mod:`lopa.resolvent` beyond evaluating ``f`` at
points: the stable/unstable split comes from an eigendecomposition of ``G``,
and the solution is assembled from the half-line Green's function

    u(x) = e^{xG} u_h + int_0^x e^{(x-s)G} P_s f(s) ds - int_x^inf e^{(x-s)G} P_u f(s) ds

with adaptive quadrature.
"""

import numpy as np
from scipy.integrate import quad_vec


def green_solution(G, gamma, f, g, xs, epsabs=1e-13, epsrel=1e-11):
    """Values of the ``L^2`` solution of ``u' - G u = f``, ``gamma u(0) = g`` at ``xs``.

    ``f`` is any callable returning an ``n``-vector; ``G`` must be
    diagonalizable.
    """
    G = np.asarray(G, dtype=complex)
    gamma = np.asarray(gamma, dtype=complex)
    n = G.shape[0]
    lam, X = np.linalg.eig(G)
    Xi = np.linalg.inv(X)
    st = lam.real < 0

    def kernel(t, mask):
        # e^{tG} restricted to the spectral subspace selected by mask
        return (X[:, mask] * np.exp(t * lam[mask])) @ Xi[mask, :]

    Vs = X[:, st]
    tail0 = quad_vec(lambda s: kernel(-s, ~st) @ f(s), 0.0, np.inf,
                     epsabs=epsabs, epsrel=epsrel)[0]
    # u(0) = Vs c - tail0, and gamma u(0) = g
    c = np.linalg.solve(gamma @ Vs, np.asarray(g, dtype=complex) + gamma @ tail0)
    out = []
    for x in xs:
        hom = kernel(x, st) @ (Vs @ c)
        if x > 0:
            left = quad_vec(lambda s: kernel(x - s, st) @ f(s), 0.0, x,
                            epsabs=epsabs, epsrel=epsrel)[0]
        else:
            left = np.zeros(n, dtype=complex)
        right = quad_vec(lambda s: kernel(x - s, ~st) @ f(s), x, np.inf,
                         epsabs=epsabs, epsrel=epsrel)[0]
        out.append(hom + left - right)
    return np.array(out)
