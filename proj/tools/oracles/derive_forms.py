"""Derive flux pairings and bulk forms from the definitions and compare them with
closed forms transcribed into radlab (printed variants).

The warped-product metric g2(q) + W(q)^2 * round sphere is used; angular jets enter
through A = |angular gradient| measured in the round metric.
Random-point numerical comparison (mpmath, 30 digits) avoids simplification traps.
"""
import random
import sympy as sp

q1, q2 = sp.symbols('q1 q2', positive=True)
v, v1, v2, A, g0 = sp.symbols('v v1 v2 A gamma0')
dp, al, n, tau0 = sp.symbols('dp alpha n tau0', positive=True)


def setup(g2, W):
    gi = g2.inv()
    sq = sp.sqrt(-g2.det())
    qs = (q1, q2)
    grad = lambda f: sp.Matrix([sum(gi[i, j] * sp.diff(f, qs[j]) for j in range(2)) for i in range(2)])
    dv = sp.Matrix([v1, v2])
    def ip(f, h):  # <grad f, grad h> for functions
        return sum(gi[i, j] * sp.diff(f, qs[i]) * sp.diff(h, qs[j]) for i in range(2) for j in range(2))
    def ipv(f):  # <grad f, grad v> via jet
        return sum(gi[i, j] * sp.diff(f, qs[i]) * dv[j] for i in range(2) for j in range(2))
    vv = sum(gi[i, j] * dv[i] * dv[j] for i in range(2) for j in range(2)) + A**2 / W**2
    # Christoffels of g2
    Gam = [[[sum(gi[k, l] * (sp.diff(g2[l, i], qs[j]) + sp.diff(g2[l, j], qs[i]) - sp.diff(g2[i, j], qs[l])) / 2
                 for l in range(2)) for j in range(2)] for i in range(2)] for k in range(2)]
    def box(f):
        return sum(sp.diff(sq * W**(n - 1) * gi[i, j] * sp.diff(f, qs[j]), qs[i]) for i in range(2) for j in range(2)) / (sq * W**(n - 1))
    def hess(f):
        H2 = sum((sp.diff(f, qs[i], qs[j]) - sum(Gam[k][i][j] * sp.diff(f, qs[k]) for k in range(2)))
                 * sum(gi[i, a] * dv[a] for a in range(2)) * sum(gi[j, b] * dv[b] for b in range(2))
                 for i in range(2) for j in range(2))
        return H2 + ip(W, f) / W * A**2 / W**2
    def flux(T, Tp):
        return ipv(T) * ipv(Tp) - sp.Rational(1, 2) * vv * ip(T, Tp) + sp.Rational(1, 2) * g0 * v**2 * ip(T, Tp)
    def Q(T):
        return sp.Rational(1, 2) * box(T) * (g0 * v**2 - vv) + hess(T)
    return dict(ip=ip, flux=flux, Q=Q, box=box)


def check(label, derived, printed, subsdom, trials=40):
    worst = 0
    for _ in range(trials):
        sub = {k: f() for k, f in subsdom.items()}
        sub.update({v: random.uniform(-1, 1), v1: random.uniform(-1, 1), v2: random.uniform(-1, 1),
                    A: random.uniform(0, 1), g0: random.uniform(-4, 0)})
        d = sp.N(derived.subs(sub), 30)
        p = sp.N(printed.subs(sub), 30)
        scale = max(1, abs(d))
        worst = max(worst, abs(d - p) / scale)
    print(f'{label:45s} max rel diff = {float(worst):.3e}')


# ---- domain 1: (s, rho), T1 = s ----
s, rho = q1, q2
D = setup(sp.Matrix([[-1, s / rho], [s / rho, (1 - s**2) / rho**2]]), sp.Integer(1))
T1 = s
rdr = rho * v2
pr_flux1 = sp.Rational(1, 2) * ((1 - s**2) * v1 - rdr)**2 + sp.Rational(1, 2) * rdr**2 + sp.Rational(1, 2) * (1 - s**2) * (A**2 - g0 * v**2)
fx_flux1 = sp.Rational(1, 2) * ((1 - s**2) * v1 - s * rdr)**2 + sp.Rational(1, 2) * rdr**2 + sp.Rational(1, 2) * (1 - s**2) * (A**2 - g0 * v**2)
pr_Q1 = -s * (A**2 - g0 * v**2)
dom1 = {q1: lambda: random.uniform(-0.8, 0.8), q2: lambda: random.uniform(0.01, 0.99), n: lambda: random.choice([3, 4, 5])}
check('dom1 <F(T1),dT1> printed', D['flux'](T1, T1), pr_flux1, dom1)
check('dom1 <F(T1),dT1> with factor s', D['flux'](T1, T1), fx_flux1, dom1)
check('dom1 Q printed', D['Q'](T1), pr_Q1, dom1)
print('dom1 box T1 =', sp.simplify(D['box'](T1)), ' |dT1|^2 =', sp.simplify(D['ip'](T1, T1)))

# ---- domain 2: (a, b) ----
a, b = q1, q2
D = setup(sp.Matrix([[0, 1 / b], [1 / b, a * (2 - a) / b**2]]), sp.Integer(1))
T2 = -2 / (1 + 2 * dp) * a**(dp + sp.Rational(1, 2)) + sp.log(b)
T2p = -a
T2pp = sp.log(b)
bdb = b * v2
X = bdb - a * (2 - a) * v1
h = sp.Rational(1, 2)
pr_f2p = h * a**(dp - h) * (bdb**2 + X**2) + h * a * (2 - a) * v1**2 + h * (1 + a**(dp + h) * (2 - a)) * (A**2 - g0 * v**2)
pr_f2pp = v1**2 + h * a**(dp - h) * (a * (2 - a) * v1**2 + A**2 - g0 * v**2)
pr_Q2 = h * (h - dp) * a**(dp - 3 * h) * (bdb**2 + X**2) + (1 - a) * v1**2 - h * a**(dp - h) * (1 + 2 * dp - (3 * h + dp) * a) * (A**2 - g0 * v**2)
dom2 = {q1: lambda: random.uniform(0.001, 0.87), q2: lambda: random.uniform(0.01, 0.99), dp: lambda: random.uniform(0.05, 0.45), n: lambda: random.choice([3, 4, 5])}
check('dom2 <F(T2),dT2p> printed', D['flux'](T2, T2p), pr_f2p, dom2)
check('dom2 <F(T2),dT2pp> printed', D['flux'](T2, T2pp), pr_f2pp, dom2)
check('dom2 Q printed', D['Q'](T2), pr_Q2, dom2)
print('dom2 |dT2|^2 check', sp.simplify(D['ip'](T2, T2) + a**(dp - h) * (2 + a**(dp + h) * (2 - a))))

# ---- domain 3: (tau, rho) ----
tau, rho = q1, q2
D = setup(sp.Matrix([[-rho**2, 1], [1, 0]]), sp.Integer(1))
T3 = tau - 2 / (2 * dp + 1) * rho**(dp + h)
T3p = -rho * (2 * tau0 - tau)
S = v1**2 + (v1 + rho**2 * v2)**2
c = 2 * tau0 - tau
pr_f33 = h * rho**(2 * dp - 1) * S + (1 - rho**(dp + 3 * h)) * v2**2 + rho**(dp - h) * (1 - h * rho**(dp + 3 * h)) * (A**2 - g0 * v**2)
pr_f3p = h * rho**(dp - h) * c * S + (1 - h * rho * c - h * rho**(dp + 3 * h)) * rho * v2**2 + h * (c + rho**(dp + h) * (1 - rho * c)) * (A**2 - g0 * v**2)
pr_Q3 = h * (h - dp) * rho**(dp - 3 * h) * S - rho * v2**2 + h * (dp + 3 * h) * rho**(dp + h) * (A**2 - g0 * v**2)
dom3 = {q1: lambda: random.uniform(-10, 10), q2: lambda: random.uniform(0.001, 0.04), dp: lambda: random.uniform(0.05, 0.45), tau0: lambda: 10, n: lambda: random.choice([3, 4, 5])}
check('dom3 <F(T3),dT3> printed', D['flux'](T3, T3), pr_f33, dom3)
check('dom3 <F(T3),dT3p> printed', D['flux'](T3, T3p), pr_f3p, dom3)
check('dom3 Q printed', D['Q'](T3), pr_Q3, dom3)

# ---- domain 4: (abar, bbar) ----
ab, bb = q1, q2
D = setup(sp.Matrix([[0, -1 / bb], [-1 / bb, ab * (ab - 2) / bb**2]]), 1 - ab)
P = ab * (2 - ab) / 2
T4 = -2 / (2 * dp + 1) * P**(dp + h) + sp.log(2 - ab) - sp.log(bb)
T4p = -((2 - ab) / 2)**(1 - al) * ab * bb**al
C1 = (1 - ab)**2 / (2 - ab) * P**(dp - h) + (1 - ab) / (2 - ab)**2 + al / (2 - ab)**2 * P**(dp + h) + al * ab / (2 - ab)**2 * (h - P**(dp + h))
C2 = al * ab * (1 - ab) * (1 - P**(dp + h)) - ab * (1 - ab)
C3 = al * ab / 2 + (1 - ab)**2 / (2 - ab) + (al - 2) * (1 - ab)**2 / (2 - ab) * P**(dp + h)
D1 = (h - dp) * (1 - ab)**2 / (2 - ab) * P**(dp - h) - ab / (2 * (2 - ab)**2) + 1 / (2 - ab) * P**(dp + h)
D2 = -ab * (1 - ab)
D3 = (n - 1) / (2 - ab) * (h - P**(dp + h))
D4 = (1 + 2 * dp) * (1 - ab)**2 / (2 - ab) * P**(dp + h) + (n - 2) * ab * (h - P**(dp + h))
D5 = (1 + 2 * dp) * (1 - ab)**2 / (2 - ab) * P**(dp + h) + n * ab * (h - P**(dp + h))
Y1 = ab * (2 - ab) * v1 - bb * v2
Y2 = bb * v2
ang = A**2 / (1 - ab)**2
pr_f4 = ((2 - ab) / 2)**(1 - al) * bb**al * (C1 * (Y1**2 + Y2**2) + C2 * v1**2 + C3 * (ang - g0 * v**2))
pr_aQ4 = D1 * (Y1**2 + Y2**2) + D2 * v1**2 + D3 * (Y1**2 - Y2**2) + D4 * ang + D5 * (-g0 * v**2)
dom4 = {q1: lambda: random.uniform(0.001, 0.87), q2: lambda: random.uniform(0.01, 0.99), dp: lambda: random.uniform(0.05, 0.45),
        al: lambda: random.uniform(1.5, 8), n: lambda: random.choice([4, 5])}
check('dom4 <F(T4),dT4p> printed', D['flux'](T4, T4p), pr_f4, dom4)
check('dom4 abar*Q printed', ab * D['Q'](T4), pr_aQ4, dom4)
