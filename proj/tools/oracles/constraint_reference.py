# Reference values for the nonlinear constraint/gauge residuals on a fixed
# trigonometric test datum (n=3, torus [0,2pi)^3, N=16), computed straight from
# the Ricci tensor and Gamma_mu -- no use of the expanded residual formulas.
#
# datum: h0_ab = eps * sum_k coef(k,a,b) mode_k(x), h1_ab = eps * sum_k coef(k+3,a,b) mode_k(x)
#   coef(k,a,b) = sin(1.3k + 0.7a + 0.31b + 0.11ab)
#   mode_0 = sin(x1 + 2x2 - x3), mode_1 = cos(2x1 - x3), mode_2 = cos(x1 + x2 + x3)
# output: per node, 2 G^0_nu (4 values), Gamma_mu (4), g^00 d_t Gamma_mu with the
# reduced equation substituted for d_t^2 h (4).
import math
import numpy as np
import sympy as sp

n, N, eps = 3, 16, 0.03
D = n + 1
t, x1, x2, x3 = X = sp.symbols('t x1 x2 x3')
modes = [sp.sin(x1 + 2 * x2 - x3), sp.cos(2 * x1 - x3), sp.cos(x1 + x2 + x3)]


def coef(k, a, b):
    return math.sin(1.3 * k + 0.7 * a + 0.31 * b + 0.11 * a * b)


h = sp.zeros(D, D)
for a in range(D):
    for b in range(a, D):
        e0 = sum(coef(k, a, b) * modes[k] for k in range(3))
        e1 = sum(coef(k + 3, a, b) * modes[k] for k in range(3))
        h[a, b] = h[b, a] = eps * (e0 + t * e1)

dexpr = [[[sp.diff(h[a, b], X[c]) for b in range(D)] for a in range(D)] for c in range(D)]
ddexpr = [[[[sp.diff(h[a, b], X[c], X[d]) for b in range(D)] for a in range(D)] for d in range(D)] for c in range(D)]
fH = sp.lambdify(X, h, 'numpy')
fdH = sp.lambdify(X, dexpr, 'numpy')
fddH = sp.lambdify(X, ddexpr, 'numpy')


def at(j):
    p = [0.0] + [2 * math.pi * jj / N for jj in j]
    H = np.array(fH(*p), dtype=float)
    dH = np.array(fdH(*p), dtype=float)        # [c,a,b]
    ddH = np.array(fddH(*p), dtype=float)      # [c,d,a,b]
    ddH[0, 0] = 0.0                            # d_t^2 h is not part of the data
    g = np.diag([-1.0] + [1.0] * n) + H
    gi = np.linalg.inv(g)
    dgi = -np.einsum('la,dab,bk->dlk', gi, dH, gi)
    Gam = 0.5 * (np.einsum('lk,ckm->lcm', gi, dH) + np.einsum('lk,mkc->lcm', gi, dH) - np.einsum('lk,kcm->lcm', gi, dH))

    def ricci(dd):
        dGam = 0.5 * (np.einsum('dlk,ckm->dlcm', dgi, dH) + np.einsum('dlk,mkc->dlcm', dgi, dH) - np.einsum('dlk,kcm->dlcm', dgi, dH)) \
            + 0.5 * (np.einsum('lk,dckm->dlcm', gi, dd) + np.einsum('lk,dmkc->dlcm', gi, dd) - np.einsum('lk,dkcm->dlcm', gi, dd))
        return np.einsum('llmn->mn', dGam) - np.einsum('mlln->mn', dGam) \
            + np.einsum('lmn,dld->mn', Gam, Gam) - np.einsum('dml,lnd->mn', Gam, Gam)

    def gamma_lower(d1):
        return np.array([np.einsum('ab,ab', gi, d1[:, mu, :]) - 0.5 * np.einsum('ab,ab', gi, d1[mu]) for mu in range(D)])

    def dGamma(dd):  # d_c Gamma_mu, [c,mu]
        out = np.zeros((D, D))
        for c in range(D):
            for mu in range(D):
                out[c, mu] = sum(dgi[c, a, b] * (dH[a, mu, b] - 0.5 * dH[mu, a, b]) + gi[a, b] * (dd[c, a, mu, b] - 0.5 * dd[c, mu, a, b])
                                 for a in range(D) for b in range(D))
        return out

    Ric = ricci(ddH)
    Rs = np.einsum('ab,ab', gi, Ric)
    G0 = np.array([gi[0] @ Ric[:, nu] - 0.5 * (nu == 0) * Rs for nu in range(D)])
    Gm = gamma_lower(dH)
    # F from R = -1/2 g dd h + 1/2 (dG + dG^T) + 1/2 F, any value of d_t^2 h (here 0)
    dG = dGamma(ddH)
    F = 2 * Ric + np.einsum('ld,ldmn->mn', gi, ddH) - dG - dG.T
    ddt = (F - 2 * np.einsum('i,iab->ab', gi[0, 1:], ddH[0, 1:]) - np.einsum('ij,ijab->ab', gi[1:, 1:], ddH[1:, 1:])) / gi[0, 0]
    dd2 = ddH.copy()
    dd2[0, 0] = ddt
    c7 = gi[0, 0] * dGamma(dd2)[0]
    return 2 * G0, Gm, c7


for j in [(0, 0, 0), (3, 7, 11), (15, 2, 9), (8, 8, 1)]:
    c2, c6, c7 = at(j)
    print('{%d, %d, %d}' % j, ' '.join('%.17g' % v for v in list(c2) + list(c6) + list(c7)))
