"""Reference values for the Bessel tests, evaluated at 30 digits.

I_nu is summed from its power series and K_nu from the integral
K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt, so neither depends on the
library routines under test. Run once; the output is frozen into
tests/test_bessel.cpp.
"""
import mpmath as mp

mp.mp.dps = 30


def log_i_series(nu, x):
    nu = mp.mpf(nu)
    x = mp.mpf(x)
    h = x / 2
    term = h**nu / mp.gamma(nu + 1)
    total = term
    k = 0
    while True:
        k += 1
        term *= h * h / (k * (k + nu))
        total += term
        if term < total * mp.mpf(10) ** (-28) and k > x:
            break
    return mp.log(total)


def log_k_integral(nu, x):
    nu = mp.mpf(nu)
    x = mp.mpf(x)
    # integrand peaks near t* = asinh(nu / x)
    peak = mp.asinh(nu / x)
    f = lambda t: mp.exp(-x * (mp.cosh(t) - 1) + nu * t - peak * nu) * (1 + mp.exp(-2 * nu * t)) / 2
    width = 1 / mp.sqrt(x * mp.cosh(peak) + 1)
    # Beyond t_max the integrand is below exp(-150) relative to its peak.
    t_max = peak + 1
    g = lambda t: x * (mp.cosh(t) - 1) - nu * t + peak * nu
    while g(t_max) < 150:
        t_max = 2 * t_max
    pts = {mp.mpf(0), t_max}
    p = max(mp.mpf(0), peak - 4)
    while p < t_max:
        pts.add(p)
        p += width / 2
    pts = sorted(pts)
    val = mp.quad(f, pts)
    return mp.log(val) - x + peak * nu


NUS = [0, 0.25, 0.5, 1, 1.7, 3.2, 5, 12.5, 24.99, 25, 50, 100, 200]
XS = [1e-3, 0.1, 1, 1.9, 2.1, 5, 10, 39.5, 40.5, 150, 700]

print("// nu, x, log I_nu(x), log K_nu(x)")
for nu in NUS:
    for x in XS:
        li = log_i_series(nu, x)
        lk = log_k_integral(nu, x)
        print("    {%r, %r, %s, %s}," % (nu, x, mp.nstr(li, 20), mp.nstr(lk, 20)))

print("K_2(1):", mp.nstr(mp.exp(log_k_integral(2, 1)), 20))
print("I_5(10):", mp.nstr(mp.exp(log_i_series(5, 10)), 20))
eta1 = mp.sqrt(2) + mp.log(1 / (1 + mp.sqrt(2)))
lead = mp.exp(50 * eta1) / (mp.sqrt(2 * mp.pi * 50) * mp.mpf(2) ** 0.25)
print("Olver leading I, nu=50, t=1:", mp.nstr(lead, 20))
