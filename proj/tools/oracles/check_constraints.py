# Nonlinear constraint / gauge identities at t=0 against a direct Ricci computation.
import numpy as np, sympy as sp, itertools
rng = np.random.default_rng(7)
n = 3; N = n + 1
X = sp.symbols('t x1 x2 x3')
eps = 0.05
h = sp.zeros(N, N)
for a in range(N):
    for b in range(a, N):
        e = 0
        for mono in itertools.product(range(3), repeat=N):
            if sum(mono) <= 2:
                e += eps * rng.normal() * sp.prod([X[k]**mono[k] for k in range(N)])
        h[a, b] = e; h[b, a] = e
m = sp.diag(-1, 1, 1, 1)
pt = {X[0]: 0, X[1]: 0.3, X[2]: -0.2, X[3]: 0.1}
def ev(e): return float(sp.N(e.subs(pt)))
H = np.array([[ev(h[a, b]) for b in range(N)] for a in range(N)])
dH = np.array([[[ev(sp.diff(h[a, b], X[c])) for b in range(N)] for a in range(N)] for c in range(N)])  # dH[c,a,b]
ddH = np.array([[[[ev(sp.diff(h[a, b], X[c], X[d])) for b in range(N)] for a in range(N)] for d in range(N)] for c in range(N)])
g = np.diag([-1., 1, 1, 1]) + H
gi = np.linalg.inv(g)
# Christoffel and Ricci directly
dg = dH
Gam = 0.5 * (np.einsum('lk,ckm->lcm', gi, dg) + np.einsum('lk,mkc->lcm', gi, dg) - np.einsum('lk,kcm->lcm', gi, dg))  # Gam[l,c,m]=Γ^l_{cm}
# dGam[d,l,c,m]
dgi = -np.einsum('la,dab,bk->dlk', gi, dg, gi)
dGam = 0.5 * (np.einsum('dlk,ckm->dlcm', dgi, dg) + np.einsum('dlk,mkc->dlcm', dgi, dg) - np.einsum('dlk,kcm->dlcm', dgi, dg)) \
     + 0.5 * (np.einsum('lk,dckm->dlcm', gi, ddH) + np.einsum('lk,dmkc->dlcm', gi, ddH) - np.einsum('lk,dkcm->dlcm', gi, ddH))
Ric = np.einsum('llmn->mn', dGam) - np.einsum('mllν->mν'.replace('ν', 'n'), dGam) \
    + np.einsum('lmn,dld->mn', Gam, Gam) - np.einsum('dml,lnd->mn', Gam, Gam)
Rs = np.einsum('ab,ab', gi, Ric)
G0 = np.array([gi[0] @ Ric[:, nu] - 0.5 * (nu == 0) * Rs for nu in range(N)])
# printed formulas
h0 = H; h1 = dH[0]
d0 = dH  # d0[c] = ∂_c h at t=0 with c=0 -> h1
Gl = d0 + np.transpose(d0, (2, 1, 0)) - np.transpose(d0, (1, 0, 2)) * 0  # placeholder
# Γ_{αβμ} = ∂α h_{μβ} + ∂β h_{αμ} − ∂μ h_{αβ}
GL = np.zeros((N, N, N))
for a in range(N):
    for b in range(N):
        for mu in range(N):
            GL[a, b, mu] = d0[a, mu, b] + d0[b, a, mu] - d0[mu, a, b]
GU = 0.5 * np.einsum('nm,abm->nab', gi, GL)  # Γ^ν_{αβ}
E = np.einsum('lmn,dld->mn', GU, GU) - np.einsum('dml,lnd->mn', GU, GU) \
    + 0.5 * np.einsum('lld,mnd->mn', dgi, GL) - 0.5 * np.einsum('mld,lnd->mn', dgi, GL)
D = -np.einsum('mld,lnd->mn', dgi, d0) + 0.5 * np.einsum('mld,nld->mn', dgi, d0)
def ij(i, j): return ddH[i, j]
sp_ = range(1, N)
c1 = 0.0
for p in sp_:
    for l in sp_:
        for i in sp_:
            for j in sp_:
                c1 += gi[p, l] * gi[i, j] * (ddH[i, j, p, l] - ddH[i, p, j, l])
        for i in sp_:
            c1 += gi[p, l] * gi[0, i] * (dH[i, p, l] * 0 + 0)
# h1 spatial derivatives: ∂_i h1 = ddH[0,i]
dh1 = lambda i, a, b: ddH[0, i, a, b]
dd0 = lambda i, j, a, b: ddH[i, j, a, b]
c1 = 0.0
for p in sp_:
    for l in sp_:
        for i in sp_:
            for j in sp_:
                c1 += gi[p, l] * gi[i, j] * (dd0(i, j, p, l) - dd0(i, p, j, l))
            c1 += gi[p, l] * gi[0, i] * (dh1(i, p, l) - dh1(p, i, l) - dd0(i, p, 0, l) + dd0(p, l, i, 0))
c1 += gi[0, 0] * E[0, 0] - sum(gi[p, l] * E[p, l] for p in sp_ for l in sp_)
c2 = []
for k in sp_:
    v = 0.0
    for i in sp_:
        for j in sp_:
            v += gi[0, 0] * gi[i, j] * (dh1(i, k, j) - dh1(k, i, j) - dd0(i, j, k, 0) + dd0(k, i, 0, j))
    for l in sp_:
        for i in sp_:
            v += gi[0, l] * gi[0, i] * (dh1(k, i, l) - dh1(i, k, l) + dd0(i, l, k, 0) - dd0(k, l, 0, i))
            for j in sp_:
                v += gi[0, l] * gi[i, j] * (-dd0(i, j, k, l) + dd0(i, k, j, l) + dd0(i, l, k, j) - dd0(k, l, i, j))
    v += 2 * (gi[0, 0] * E[0, k] + sum(gi[0, l] * E[k, l] for l in sp_))
    c2.append(v)
print('G^0_nu      :', G0)
print('constraint.2:', c1, c2)
print('ratios      :', c1 / G0[0], [c2[k] / G0[k + 1] for k in range(n)])

# ---- gauge conditions: printed (constraint.7) vs g^00 * dt Gamma_mu with reduced equation substituted
F = 2 * E + D + D.T
# second time derivatives from the reduced equation at the point
ddt = np.zeros((N, N))
for a in range(N):
    for b in range(N):
        rhs = F[a, b]
        for i in sp_:
            rhs -= 2 * gi[0, i] * dh1(i, a, b)
            for j in sp_:
                rhs -= gi[i, j] * dd0(i, j, a, b)
        ddt[a, b] = rhs / gi[0, 0]
# full second-derivative tensor with substituted dtt
dd = ddH.copy(); dd[0, 0] = ddt
ddgi = None
# dt Gamma_mu = dt g^{ab} (d_a h_{mu b} - 1/2 d_mu h_ab) + g^{ab}(dt d_a h_{mu b} - 1/2 dt d_mu h_ab)
dtG = np.zeros(N)
for mu in range(N):
    v = 0.0
    for a in range(N):
        for b in range(N):
            v += dgi[0, a, b] * (d0[a, mu, b] - 0.5 * d0[mu, a, b])
            v += gi[a, b] * (dd[0, a, mu, b] - 0.5 * dd[0, mu, a, b])
    dtG[mu] = v
c7a = 0.0
for i in sp_:
    for j in sp_:
        c7a += gi[0, 0] * gi[i, j] * dh1(i, 0, j) - 0.5 * gi[0, 0] * gi[i, j] * dd0(i, j, 0, 0)
for p in sp_:
    for l in sp_:
        for i in sp_:
            c7a += gi[p, l] * gi[0, i] * dh1(i, p, l)
            for j in sp_:
                c7a += 0.5 * gi[p, l] * gi[i, j] * dd0(i, j, p, l)
c7a += gi[0, 0] * E[0, 0] - 0.5 * sum(gi[p, l] * F[p, l] for p in sp_ for l in sp_)
c7b = []
for k in sp_:
    v = 0.0
    for b in range(N):
        t = 0.0
        for i in sp_:
            t += -2 * gi[0, i] * dh1(i, k, b)
            for j in sp_:
                t += -gi[i, j] * dd0(i, j, k, b)
        v += gi[0, b] * t
        v += gi[0, 0] * sum(gi[i, b] * dh1(i, k, b) for i in sp_)
        v += gi[0, b] * F[k, b]
    v += -0.5 * gi[0, 0] * sum(gi[a, b] * dh1(k, a, b) for a in range(N) for b in range(N))
    v += -gi[0, 0] * D[0, k]
    c7b.append(v)
print('g00*dtGamma :', gi[0, 0] * dtG)
print('constraint.7:', c7a, c7b)
