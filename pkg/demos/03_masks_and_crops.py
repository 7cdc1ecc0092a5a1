# # Palette masks and instance crops
#
# Colour label rasters are split into one binary mask per palette class, and
# connected blobs of one class are cut out as padded crops.

import numpy as np

from uaseg import camvid_palette, extract_instances, split_by_color
from uaseg.synthetic import scene

palette = camvid_palette()
print(len(palette.names), "classes; Car colour", palette.color_of("Car"))

img, labels = scene((64, 96), seed=8)
masks = split_by_color(labels, palette)
present = [(n, int(m.sum())) for n, m in zip(palette.names, masks) if m.any()]
print("classes present:", present)

# Every pixel lands in exactly one mask when the raster only uses palette colours.
print("partition:", bool(np.all(masks.sum(axis=0) == 1)))

# ## Instance crops
#
# Cars are found as 4-connected components; tiny ones are dropped and the
# bounding box is grown by a few pixels and clipped to the image.

patches = extract_instances(labels, palette.color_of("Car"), min_area=16, pad=4, image=img, source_id="scene8")
for p in patches:
    print(p.source_id, "bbox", p.bbox, "area", p.area, "crop", p.image_crop.shape)
