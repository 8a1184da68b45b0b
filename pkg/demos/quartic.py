"""Subdivide the Figure-1 quartic (rescaled to [-1, 1]^2) with both predicates and draw it."""

import sys

from pvsubdiv import pv_effective, pv_interval
from pvsubdiv.interval import algorithm_rules, theorem_rules, verify_subdivision
from pvsubdiv.output import render_svg
from pvsubdiv.poly import figure1_quartic

f = figure1_quartic().rescale_domain(10)
out = sys.argv[1] if len(sys.argv) > 1 else "quartic.svg"

for name, run, rules in (("interval", pv_interval, algorithm_rules), ("effective", pv_effective, theorem_rules)):
    sub = run(f, 1)
    ok = verify_subdivision(f, sub, rules).all()
    print(f"{name:9s} {sub.box_count:7d} boxes, deepest level {sub.max_depth}, exact re-check {'ok' if ok else 'FAILED'}")
    if name == "interval":
        with open(out, "w") as fh:
            fh.write(render_svg(sub, f))
        print(f"picture written to {out}")
