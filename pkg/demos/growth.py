"""A small version of the average box-count sweep for random Gaussian plane curves."""

from pvsubdiv.amortize import avg_boxes, loglog_slope

rows = avg_boxes("kss", 2, [3, 4, 5, 6], trials=20, seed=3, moment_samples=500)
for r in rows:
    print(f"d={r['d']}  mean boxes {r['mean_boxes']:9.1f} +- {r['stderr']:7.1f}   "
          f"average-case formula {r['average_bound']:.3g}")
print(f"log-log slope {loglog_slope([r['d'] for r in rows], [r['mean_boxes'] for r in rows]):.2f}")
