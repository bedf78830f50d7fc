"""Linear vector fields preserve a fiber subbundle when they preserve its sections.

X = d/dx + a2 d/da1 on the trivial rank-2 bundle over a line shears the
fibers.  It maps sections of span{e1} into themselves, so its flow keeps
span{e1}; for span{e2} the derivative D_X e2 = -e1 leaves the subbundle and
the flow visibly tilts e2 towards e1.

Run:  python3 demos/04_flow_invariance.py
"""

from morphic.expr import Chart
from morphic.geometry import VectorField, flow, flow_invariance_check, total_space_chart

chart = total_space_chart(Chart.make(["x"]), ["a1", "a2"])
X = VectorField(chart, ["1", "a2", "0"])

for label, B in (("span{e1}", [["1", "0"]]), ("span{e2}", [["0", "1"]])):
    report = flow_invariance_check(X, B)
    print(f"{label}: hypothesis {report.hypothesis_holds}, passed {report.passed}")
    for e in report.entries:
        print(f"    {e.name}: {e.tier} residual {e.residual:.2e}")

print("\nflowing the vector (x, a) = (-0.5, 0, 0.1) for time 1:", flow(X, [-0.5, 0.0, 0.1], 1.0).round(6).tolist())
