"""kappa_aff of a random cubic on a coarse grid, with the local size bounds it implies."""

import numpy as np

from pvsubdiv.condition import kappa_many, size_bound_from_kappa
from pvsubdiv.sampling import DobroSpec, sample_dobro

f = sample_dobro(DobroSpec("kss", 2, 3, seed=11))
t = np.linspace(-1, 1, 9)
X = np.array([(x, y) for y in t[::-1] for x in t])
k = kappa_many(f, X).reshape(len(t), len(t))

print("log10 kappa_aff on a 9 x 9 grid over [-1, 1]^2 (top row y = 1)")
for row in np.log10(k):
    print(" ".join(f"{v:5.2f}" for v in row))

worst = k.max()
print(f"\nlargest kappa {worst:.3g}")
print(f"interval size bound there {float(size_bound_from_kappa(worst, 3, 2, 2.5)):.3g}")
print(f"floating size bound there {float(size_bound_from_kappa(worst, 3, 2, 6.0)):.3g}")
