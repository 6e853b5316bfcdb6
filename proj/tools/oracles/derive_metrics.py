"""Symbolic derivation of the conformal chart metrics and their d'Alembertians.

Prints inverse metric, sqrt|g|, sphere warp and the expanded operator per chart,
used as an independent oracle for the C++ operator tables.
"""
import sympy as sp

n = sp.Symbol('n', positive=True)
lam = sp.Symbol('lam')  # angular eigenvalue l(l+n-2)


def analyse(name, q1, q2, t, r, rt):
    """t, r as functions of (q1,q2); rt = conformal factor rho-tilde."""
    J = sp.Matrix([[sp.diff(t, q1), sp.diff(t, q2)], [sp.diff(r, q1), sp.diff(r, q2)]])
    m2 = sp.diag(-1, 1)
    g = sp.simplify(rt**2 * J.T * m2 * J)
    W = sp.simplify(rt * r)  # warp of the round sphere
    gi = sp.simplify(g.inv())
    detg = sp.simplify(g.det())
    sq = sp.sqrt(-detg)
    vol = sp.simplify(sq * W**(n - 1))
    v = sp.Function('v')(q1, q2)
    qs = [q1, q2]
    box = 0
    for i in range(2):
        for j in range(2):
            box += sp.diff(vol * gi[i, j] * sp.diff(v, qs[j]), qs[i])
    box = sp.expand(sp.simplify(box / vol)) - lam / W**2 * v
    print('==', name)
    print(' g =', g)
    print(' ginv =', gi)
    print(' sqrt|g2| =', sp.simplify(sq), ' W =', W)
    print(' box =', sp.collect(sp.expand(box), [sp.Derivative(v, q1, 2), sp.Derivative(v, q2, 2),
                                            sp.Derivative(v, q1, q2), sp.Derivative(v, q1), sp.Derivative(v, q2)],
                             sp.factor))
    return g, gi, W, box


s, rho, a, b, tau, ab, bb, phi, Y = sp.symbols('s rho a b tau abar bbar phi Y', positive=True)
res = {}
res[1] = analyse('Omega1 (s,rho)', s, rho, s / rho, 1 / rho, rho)
res[2] = analyse('Omega2 (a,b)', a, b, (1 - a) / (a * b), 1 / (a * b), a * b)
res[3] = analyse('Omega3 (tau,rho)', tau, rho, tau + 1 / rho, 1 / rho, rho)
# Omega4: abar = 1 - r/t, bbar = 1/(t-r) => t - r = t*abar => t = 1/(abar*bbar), r = (1-abar)/(abar*bbar)
res[4] = analyse('Omega4 (abar,bbar)', ab, bb, 1 / (ab * bb), (1 - ab) / (ab * bb), ab * bb)
# Omega5 radial: phi = 1/t, Y = r/t
res[5] = analyse('Omega5 (phi,Y)', phi, Y, 1 / phi, Y / phi, phi)

# compare with displayed chart operators
v = sp.Function('v')
def D(f, *xs):
    return sp.diff(f, *xs)
V1 = v(s, rho)
disp1 = -(1 - s**2) * D(V1, s, 2) + 2 * s * rho * D(V1, s, rho) + 2 * s * D(V1, s) + rho * D(rho * D(V1, rho), rho) + rho * D(V1, rho) - lam * V1
print('Omega1 display check:', sp.simplify(disp1 - res[1][3]))
V2 = v(a, b)
disp2 = 2 * D(b * D(V2, b), a) - a * (2 - a) * D(V2, a, 2) - 2 * (1 - a) * D(V2, a) - lam * V2
print('Omega2 display check:', sp.simplify(disp2 - res[2][3]))
V3 = v(tau, rho)
disp3 = 2 * D(V3, rho, tau) + rho * D(rho * D(V3, rho), rho) + rho * D(V3, rho) - lam * V3
print('Omega3 display check:', sp.simplify(disp3 - res[3][3]))
V4 = v(ab, bb)
A = lambda f: ab * D(f, ab)
B = lambda f: bb * D(f, bb)
disp4 = 2 * D(A(V4) - B(V4), ab) - A(A(V4)) - n * A(V4) - lam / (1 - ab)**2 * V4 - (n - 1) / (1 - ab) * (A(V4) - B(V4))
print('Omega4 display check:', sp.simplify(disp4 - res[4][3]))
V5 = v(phi, Y)
E = lambda f: phi * D(f, phi) + Y * D(f, Y)
disp5 = -E(E(V5)) - n * E(V5) + D(V5, Y, 2) + (n - 1) / Y * D(V5, Y) - lam / Y**2 * V5
print('Omega5 display check:', sp.simplify(disp5 - res[5][3]))
