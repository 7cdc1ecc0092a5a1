# # Weather filters
#
# Three synthetic weather filters degrade an image at a strength in [0, 1].
# Strength 0 leaves the image untouched, strength 1 is the heaviest setting.

import numpy as np

from uaseg import WeatherSpec, apply_weather, sample_weather
from uaseg.synthetic import scene

img, _ = scene((64, 96), seed=3)
print("image", img.shape, img.dtype, "mean %.3f" % img.mean())

# ## Strength sweep
#
# Fog is a blend toward light grey, so the per-pixel change grows with strength.
# Rain and snow draw their streaks and flakes as prefixes of one seeded set,
# so the number of touched pixels can only grow.

for kind in ("fog", "rain", "snow"):
    row = []
    for s in (0.0, 0.25, 0.5, 0.75, 1.0):
        out = apply_weather(img, WeatherSpec(kind, s, seed=11))
        if kind == "snow":
            # the brightness lift touches every pixel, so count flake pixels only
            lifted = np.clip(img + 0.1 * s, 0, 1)
            changed = np.count_nonzero(np.any(out > lifted + 1e-9, axis=-1))
        else:
            changed = np.count_nonzero(np.any(out != img, axis=-1))
        row.append("%5d" % changed)
    print("%-5s changed pixels:" % kind, " ".join(row))

# Strength 0 is a bit-exact identity.

print("identity:", all(apply_weather(img, WeatherSpec(k, 0.0)).tobytes() == img.tobytes()
                       for k in ("fog", "rain", "snow")))

# ## Random weather
#
# sample_weather picks a kind and a strength from a seed, the way a training
# loop would draw one filter per image.

for seed in range(5):
    print(sample_weather(seed))
