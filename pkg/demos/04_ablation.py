"""Compare decoder fuse sets and losses over three seeds.

Arms: all four encoder levels with focal+Lovasz, the deepest level only,
and all levels with plain cross-entropy. Expect about ten minutes in total.
"""
import sys

import numpy as np

from tamperloc.experiments import desk_corpus, fit

iters = int(sys.argv[1]) if len(sys.argv) > 1 else 600
images, masks = desk_corpus(n=16, size=64, seed=0)
arms = {"X4..X1 combined": ("X4,X3,X2,X1", "combined"),
        "X4 only combined": ("X4", "combined"),
        "X4..X1 cross-entropy": ("X4,X3,X2,X1", "ce")}

for label, (fuse, loss) in arms.items():
    f1 = [fit(images, masks, seed=s, iters=iters, fuse=fuse, loss=loss).f1 for s in (0, 1, 2)]
    print(f"{label:22s} F1 per seed {np.round(f1, 3)}  mean {np.mean(f1):.3f}")
