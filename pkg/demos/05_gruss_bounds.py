# Covariance bounds for bounded functions: |Cov(f(X), g(X))| never exceeds
# (1/4)(M_f - m_f)(M_g - m_g), with no assumption on the law of X beyond
# concentration on the interval.  The discrete two-point case shows the
# constant 1/4 cannot be improved.

from exactquad import (
    IntervalSpec,
    MeasureSpec,
    gruss_check,
    gruss_discrete,
    parse,
)

measure = MeasureSpec(IntervalSpec(0, 3), density=parse("exp(-t)+0.05"),
                      atoms=((2.0, 0.4),))
f, g = parse("sin(2*t)"), parse("1/(1+t^2)")

report = gruss_check(f, g, measure)
print("continuous case, f = sin(2t), g = 1/(1+t^2):")
print(f"  f range: [{report.m_f:+.6f}, {report.M_f:+.6f}]")
print(f"  g range: [{report.m_g:+.6f}, {report.M_g:+.6f}]")
print(f"  |Cov| = {abs(report.covariance):.6f}  <=  bound = {report.bound:.6f}")
print(f"  slack = {report.slack:.6f}")

print("\ndiscrete equality case, p = (1/2, 1/2), u = v = (0, 1):")
tight = gruss_discrete([0.5, 0.5], [0, 1], [0, 1])
print(f"  |sum p u v - sum p u sum p v| = {abs(tight.covariance)}")
print(f"  bound (1/4)(U-u)(V-v)         = {tight.bound}")
print(f"  slack = {tight.slack}  (the bound is attained)")

print("\na looser discrete case, p uniform over 3 points, v reverses u:")
loose = gruss_discrete([1 / 3, 1 / 3, 1 / 3], [0, 1, 2], [2, 1, 0])
print(f"  lhs = {abs(loose.covariance):.6f}, bound = {loose.bound:.6f}, "
      f"slack = {loose.slack:.6f}")
