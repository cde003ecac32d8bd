# The covariance of f(X) and g(X) is always attained as a quarter of a
# two-point product gap:
#
#     Cov(f(X), g(X)) = (1/4) (f(t1) - f(t2)) (g(t1) - g(t2))
#
# for some t1, t2 in the support interval.  For f = g = t uniform on
# [0, 1], the identity forces |t1 - t2| = 1/sqrt(3).

import math

from exactquad import (
    IntervalSpec,
    MeasureSpec,
    covariance,
    covariance_witness,
    parse,
)

uniform = MeasureSpec(IntervalSpec(0, 1), density=parse("1"))
t = parse("t")

print("Var(X) for X uniform on [0,1]:", covariance(t, t, uniform), "(= 1/12)")
w = covariance_witness(t, t, uniform)
print(f"witness pair: t1 = {w.t1:.12f}, t2 = {w.t2:.12f}")
print(f"|t1 - t2| = {abs(w.t1 - w.t2):.12f}  vs  1/sqrt(3) = {3**-0.5:.12f}")
print(f"quarter product gap = {w.product_gap:.12f}  vs  Cov = {w.covariance:.12f}")

# the same identity for a skewed measure and unrelated functions
skewed = MeasureSpec(IntervalSpec(-1, 2), density=parse("(1+t)^2+0.1"),
                     atoms=((0.0, 0.5),))
f, g = parse("exp(0.5*t)"), parse("sin(2*t)-t^2")
w2 = covariance_witness(f, g, skewed)
print("\nskewed measure, f = exp(t/2), g = sin(2t)-t^2:")
print(f"  Cov = {w2.covariance:+.12f}")
print(f"  (1/4)(f(t1)-f(t2))(g(t1)-g(t2)) = {w2.product_gap:+.12f}")
print(f"  witness identity gap = {abs(w2.covariance - w2.product_gap):.2e}")
assert abs(w2.covariance - w2.product_gap) <= 1e-8 * (1 + abs(w2.covariance))
