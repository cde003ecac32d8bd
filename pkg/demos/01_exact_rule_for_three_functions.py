# Build an exact 3-node quadrature rule for three unrelated functions
# against a measure with both a density and point masses.
#
# Whatever three integrable continuous functions you pick, there is a rule
# with at most three nodes and non-negative weights that reproduces all
# three integrals exactly (not approximately).

import numpy as np

from exactquad import (
    CurveSystem,
    IntervalSpec,
    MeasureSpec,
    integrate_system,
    parse,
    synthesize_rule,
    verify_rule,
)

interval = IntervalSpec(0.0, 2.0)
functions = CurveSystem.from_texts(["exp(-t)", "sin(3*t)", "t^2"], interval)
measure = MeasureSpec(
    interval,
    density=parse("1+t"),
    atoms=((0.5, 0.25), (1.5, 0.75)),
)

rule = synthesize_rule(functions, measure)

print("nodes:  ", np.round(rule.nodes, 12))
print("weights:", np.round(rule.weights, 12))
print("total mass carried by the rule:", sum(rule.weights))

reference = integrate_system(measure, functions, tol=1e-12).values
reproduced = rule.weights @ functions.evaluate(rule.nodes)
for text, ref, got in zip(["exp(-t)", "sin(3*t)", "t^2"], reference, reproduced):
    print(f"  integral of {text:10s} = {ref:+.12f}   rule gives {got:+.12f}")

report = verify_rule(rule, functions, measure)
print("independent verification passed:", report.passed)
print("worst relative residual:", float(max(report.relative_residuals)))
