"""The characteristic foliation of a presymplectic form.

The graph of w = dx1^dx2 on R^4 is a Dirac structure, hence a Lie algebroid
with anchor the projection to TM.  Its kernel directions x3, x4 give an
IM-foliation with zero connection, and the quotient lives on the (x1, x2)
plane, where it is again the graph of the symplectic form dx1^dx2.  The same
pipeline on a frame twisted by u1 produces a nonzero but flat connection.

Run:  python3 demos/03_presymplectic.py
"""

from morphic.algebroid import check_axioms
from morphic.dirac import check_dirac, dirac_im, graph_frame
from morphic.expr import Chart
from morphic.geometry import TwoForm
from morphic.imfoliation import check_im, quotient, roundtrip
from morphic.model import load_gallery

chart = Chart.make(["x1", "x2", "x3", "x4"])
D = graph_frame(chart, TwoForm.wedge(chart, 0, 1))
print(check_dirac(D).format())

im = dirac_im(D, [2, 3])
print("\nleaf directions", [chart.names[i] for i in im.leaf], "connection zero:", im.connection.is_zero_gamma())
report, _ = check_im(im)
print("IM conditions hold:", report.passed)

qa, _ = quotient(im)
print("quotient over", qa.chart.names, "rank", qa.rank)
print("anchor", [[str(x) for x in r] for r in qa.anchor])
print("axioms:", check_axioms(qa).passed)

twisted = load_gallery("twisted-presymplectic")
im = dirac_im(twisted.dirac, twisted.characteristic, twisted.spec)
print("\ntwisted frame: connection", [[[str(x) for x in r] for r in g] for g in im.gamma])
print("round trip passes:", roundtrip(im, twisted.spec).passed)
