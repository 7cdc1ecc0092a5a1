# # Elastic deformation of label rasters
#
# A smooth random displacement field warps a colour label raster with
# nearest-neighbour lookup, so no new colours appear.

import numpy as np

from uaseg import DeformSpec, make_field, preset, synthesize_annotations, warp_labels
from uaseg.synthetic import scene

_, labels = scene((64, 96), seed=5)

# ## The field
#
# Uniform noise is Gaussian-smoothed and rescaled so the largest displacement
# on each axis is exactly alpha pixels.

spec = DeformSpec(alpha=12.0, sigma=6.0, seed=1)
field = make_field(64, 96, spec)
print("field", field.shape, "max |dx| %.6f  max |dy| %.6f" % (np.abs(field[..., 0]).max(), np.abs(field[..., 1]).max()))

# alpha = 0 is the identity warp.
still = warp_labels(labels, make_field(64, 96, DeformSpec(0.0, 6.0, 1)))
print("alpha=0 identical:", still.tobytes() == labels.tobytes())

# ## Presets per weather condition
#
# Each weather kind has its own (alpha, sigma); synthesize_annotations returns
# the original plus one variant per preset.

def colours(a):
    return set(map(tuple, a.reshape(-1, 3)))

for kind in ("fog", "rain", "snow"):
    print(kind, "preset (alpha, sigma) =", preset(kind))

variants = synthesize_annotations(labels, seed=42)
for name, v in zip(("original", "fog", "rain", "snow"), variants):
    moved = np.count_nonzero(np.any(v != labels, axis=-1))
    print("%-8s changed %5d px, colours subset of original: %s" % (name, moved, colours(v) <= colours(labels)))
