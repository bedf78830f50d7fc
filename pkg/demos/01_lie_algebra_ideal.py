"""Ideals of a Lie algebra as the simplest IM-foliations.

A Lie algebra is an algebroid over a point: the anchor vanishes and there
are no leaf directions, so the only datum is the core.  The conditions then
collapse to "the core is an ideal".  We run the Heisenberg algebra with two
choices of core, build the morphic foliation for the good one and pass to the
quotient, which is the abelian two-dimensional algebra.

Run:  python3 demos/01_lie_algebra_ideal.py
"""

from morphic.algebroid import LieAlgebroid, bracket
from morphic.imfoliation import IMFoliation, check_im, construct_fa, quotient

C = [[[0] * 3 for _ in range(3)] for _ in range(3)]
C[0][1][2], C[1][0][2] = 1, -1
g = LieAlgebroid.lie_algebra(C)
e1, e2, e3 = g.frame()
print("[e1, e2] =", bracket(g, e1, e2).components)

# The center span{e3} is an ideal.
center = IMFoliation(g, (), [e3], [e1, e2])
report, _ = check_im(center)
print(report.format())

fa = construct_fa(center)
print("\nmorphic foliation generators on the total space", fa.chart.names)
for X in fa.fields:
    print("   ", [str(c) for c in X.components])

qa, qreport = quotient(center)
print("\nquotient rank", qa.rank, "structure functions all zero:",
      all(str(c) == "0" for r in qa.C for s in r for c in s))

# span{e1} is not: [e1, e2] = e3 escapes it, and the report names the pair.
report, _ = check_im(IMFoliation(g, (), [e1], [e2, e3]))
bad = report.first_failure()
print("\nwith core span{e1}:", bad.group, "->", bad.witness)
