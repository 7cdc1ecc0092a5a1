# # Training a tiny head with the uncertainty-weighted loss
#
# A two-layer numpy convolutional head learns to segment bright discs.
# Each step runs ten dropout passes to get U, then takes a gradient step on
# the weighted objective.

import time

import numpy as np

from uaseg.synthetic import disc_task
from uaseg.toy import ToyHead, TrainConfig, evaluate_soft_iou, mc_forward, train

data = disc_task(n_images=4, size=32, seed=0)
head = ToyHead.init(n_masks=1, seed=0, noise_rate=0.2)
print("soft IoU before: %.4f" % evaluate_soft_iou(head, data))

t0 = time.perf_counter()
trained, trace = train(head, data, TrainConfig(steps=200, seed=0))
print("200 steps in %.1fs" % (time.perf_counter() - t0))

for step, br in trace[::40] + trace[-1:]:
    print("step %3d  total %.4f  bce %.4f  iou_loss %.4f  R %.4f" % (step, br.total, br.bce, br.iou_loss, br.r))

print("soft IoU after:  %.4f" % evaluate_soft_iou(trained, data))

held_out = disc_task(n_images=4, size=32, seed=1)
print("held-out IoU:    %.4f" % evaluate_soft_iou(trained, held_out))

# ## Where is the head unsure?
#
# After training the spread of the dropout passes concentrates on the disc rim.

img, target = held_out[0]
u = mc_forward(trained, img, k=10, seed=3)
rim = np.abs(np.diff(target[0], axis=0, prepend=0)) + np.abs(np.diff(target[0], axis=1, prepend=0)) > 0
print("mean U on rim %.4f vs elsewhere %.4f" % (u[rim].mean(), u[~rim].mean()))
