"""High-precision reference values frozen into the unit tests.

Every number printed here is computed symbolically (sympy) or at 50-digit
precision (mpmath), independent of the package code, then copied into the
tests as a literal.
"""

import mpmath as mp
import sympy as sp

mp.mp.dps = 50
t_sym = sp.Symbol("t", positive=True)


def freeze(label, expr, t0, orders):
    f = sp.lambdify(t_sym, expr, "mpmath")
    print(f"# {label} at t = {t0}")
    vals = []
    cur = expr
    for k in range(orders + 1):
        g = sp.lambdify(t_sym, cur, "mpmath")
        vals.append(mp.mpf(g(mp.mpf(t0))))
        cur = sp.diff(cur, t_sym)
    print("[" + ",\n ".join(mp.nstr(v, 20) for v in vals) + "]")
    print()
    return vals


# -- series kernels ---------------------------------------------------------
freeze("exp(-0.7 t)", sp.exp(sp.Rational(-7, 10) * t_sym), 1.0, 4)

mix = sp.Rational(3, 10) * sp.exp(-sp.Rational(1, 2) * t_sym) \
    + sp.Rational(7, 10) * sp.exp(-2 * t_sym)
freeze("log(0.3 e^-0.5t + 0.7 e^-2t)", sp.log(mix), 0.9, 4)

freeze("exp(-t^2)", sp.exp(-t_sym**2), 0.6, 4)

freeze("(1 + t)^2.5", (1 + t_sym) ** sp.Rational(5, 2), 0.8, 4)

# -- parametric generators ----------------------------------------------------
freeze("clayton theta=2: (1+t)^(-1/2)", (1 + t_sym) ** sp.Rational(-1, 2), 1.3, 5)

theta = sp.Rational(4, 1)
frank = -sp.log(1 - (1 - sp.exp(-theta)) * sp.exp(-t_sym)) / theta
freeze("frank theta=4", frank, 0.9, 5)

theta = sp.Rational(3, 1)
joe = 1 - (1 - sp.exp(-t_sym)) ** (1 / theta)
freeze("joe theta=3", joe, 1.1, 5)

theta = sp.Rational(5, 2)
gumbel = sp.exp(-t_sym ** (1 / theta))
freeze("gumbel theta=2.5", gumbel, 0.7, 5)

# -- copula values -------------------------------------------------------------
print("# clayton theta=5 C(0.5, 0.5) = 63^(-1/5)")
print(mp.nstr(mp.power(63, mp.mpf(-1) / 5), 20))
print()

print("# clayton theta=5 inverse at u = 0.5: 2^5 - 1")
print(mp.nstr(mp.power(mp.mpf(2), 5) - 1, 20))
print()

print("# clayton theta=5 log density at (0.3, 0.6)")
th = mp.mpf(5)
u1, u2 = mp.mpf("0.3"), mp.mpf("0.6")
s = u1 ** -th + u2 ** -th - 1
logc = mp.log(1 + th) + (-th - 1) * (mp.log(u1) + mp.log(u2)) \
    + (-2 - 1 / th) * mp.log(s)
print(mp.nstr(logc, 20))
print()

print("# clayton theta=5 conditional cdf P(U2 <= 0.6 | U1 = 0.3)")
# dC/du1 = u1^(-th-1) * s^(-1/th - 1)
cond = u1 ** (-th - 1) * s ** (-1 / th - 1)
print(mp.nstr(cond, 20))
print()

print("# frank theta=4 C(0.25, 0.75)")
th = mp.mpf(4)
u1, u2 = mp.mpf("0.25"), mp.mpf("0.75")
val = -mp.log(1 + mp.expm1(-th * u1) * mp.expm1(-th * u2) / mp.expm1(-th)) / th
print(mp.nstr(val, 20))
print()

print("# joe theta=3 C(0.4, 0.7)")
th = mp.mpf(3)
u1, u2 = mp.mpf("0.4"), mp.mpf("0.7")
a = (1 - u1) ** th
b = (1 - u2) ** th
val = 1 - (a + b - a * b) ** (1 / th)
print(mp.nstr(val, 20))
print()

print("# gumbel theta=2.5 C(0.4, 0.7)")
th = mp.mpf("2.5")
val = mp.exp(-((-mp.log(u1)) ** th + (-mp.log(u2)) ** th) ** (1 / th))
print(mp.nstr(val, 20))
print()

print("# clayton theta=5 lower tail ratio limit 2^(-1/theta)")
print(mp.nstr(mp.power(2, -mp.mpf(1) / 5), 20))
