#!/usr/bin/env python3
"""High-precision reference values for the negative log-gamma distribution.

U = -log G with G ~ Gamma(nu, 1):
  density   f(u) = exp(-nu*u - exp(-u)) / Gamma(nu)
  cdf       F(u) = Q(nu, exp(-u))                (regularized upper gamma)
  quantile  F^{-1}(p) = -log Q^{-1}(nu, p)
  mean -psi(nu), variance psi'(nu)

Values are printed to 17 significant digits for freezing into test_nlg.cpp.
"""
import mpmath as mp

mp.mp.dps = 50


def logf(u, nu):
    return -nu * u - mp.e ** (-u) - mp.loggamma(nu)


def cdf(u, nu):
    return mp.gammainc(nu, mp.e ** (-u), mp.inf, regularized=True)


def quantile(p, nu):
    # solve F(u) = p by bisection on u
    lo, hi = mp.mpf(-60), mp.mpf(200)
    for _ in range(300):
        mid = (lo + hi) / 2
        if cdf(mid, nu) < p:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def p17(tag, v):
    print(f"{tag} = {mp.nstr(mp.mpf(v), 17)}")


for nu in (1, 2, 5, 30):
    p17(f"mean[{nu}]", -mp.digamma(nu))
    p17(f"var[{nu}]", mp.polygamma(1, nu))

p17("logf(0,1)", logf(0, 1))
p17("logf(2,1)", logf(2, 1))
p17("logf(-1.5,2)", logf(mp.mpf("-1.5"), 2))
p17("logf(3.25,5)", logf(mp.mpf("3.25"), 5))
p17("logf(-3.2,30)", logf(mp.mpf("-3.2"), 30))

p17("cdf(0,1)", cdf(0, 1))
p17("cdf(1,1)", cdf(1, 1))
p17("cdf(-2,5)", cdf(-2, 5))
p17("cdf(-3.4,30)", cdf(mp.mpf("-3.4"), 30))

p17("quantile(0.5,1)", quantile(mp.mpf("0.5"), 1))
p17("quantile(0.9,1)", quantile(mp.mpf("0.9"), 1))
p17("quantile(0.005,5)", quantile(mp.mpf("0.005"), 5))
p17("quantile(0.995,5)", quantile(mp.mpf("0.995"), 5))
p17("quantile(0.025,30)", quantile(mp.mpf("0.025"), 30))

# upper-tail quantiles: P(U > u) = eps  <=>  P(nu, e^{-u}) = eps (lower gamma)
def upper_quantile(eps, nu):
    lo, hi = mp.mpf(-60), mp.mpf(200)
    for _ in range(300):
        mid = (lo + hi) / 2
        p_exceed = mp.gammainc(nu, 0, mp.e ** (-mid), regularized=True)
        if p_exceed > eps:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


p17("upper_quantile(1e-16,1)", upper_quantile(mp.mpf("1e-16"), 1))
p17("upper_quantile(1e-16,5)", upper_quantile(mp.mpf("1e-16"), 5))
p17("upper_quantile(1e-6,1)", upper_quantile(mp.mpf("1e-6"), 1))

# normalization by quadrature (sanity for the oracle itself)
for nu in (1, 2, 5, 30):
    total = mp.quad(lambda u: mp.e ** logf(u, nu), [-40, 0, 40])
    p17(f"normalization[{nu}]", total)
