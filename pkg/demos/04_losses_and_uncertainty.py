# # Losses and Monte-Carlo uncertainty
#
# The training objective mixes BCE and a soft IoU term per pixel, scales it by
# exp(-U) where U is the spread of several stochastic predictions, and adds
# beta * mean(U) so the model cannot just claim high uncertainty everywhere.

import numpy as np

from uaseg import LossConfig, bce, combined_loss, dice_loss, mc_uncertainty, sigmoid_reduce, soft_iou

g = np.random.default_rng(0)
target = np.zeros((1, 16, 16))
target[0, 4:12, 5:13] = 1
logits = 3 * (2 * target - 1) + g.normal(0, 1.5, target.shape)
p = sigmoid_reduce(logits)

print("bce        %.4f" % bce(logits, target)[0])
print("soft iou   %.4f" % soft_iou(p, target, 1e-6)[0])
print("dice loss  %.4f" % dice_loss(p, target, 1e-6)[0])

# ## Uncertainty from samples
#
# U is the per-pixel standard deviation over samples, averaged over mask
# channels. Identical samples give exactly zero; a 50/50 split of 0 and 1 gives 0.5.

samples = [sigmoid_reduce(logits + g.normal(0, 1.0, logits.shape)) for _ in range(10)]
u = mc_uncertainty(samples)
print("U range %.3f .. %.3f" % (u.min(), u.max()))
print("identical ->", mc_uncertainty([p] * 5).max())
print("half/half ->", mc_uncertainty([np.zeros((1, 2, 2))] * 3 + [np.ones((1, 2, 2))] * 3).max())

# ## Weighted loss
#
# Uncertain pixels contribute less to the data term. The gradient treats U as fixed.

cfg = LossConfig(alpha=0.5, beta=0.1)
for scale in (0.0, 1.0, 3.0):
    br, grad = combined_loss(logits, target, scale * u, cfg)
    print("U x %.0f: C %.4f  mean W %.4f  R %.4f  total %.4f  |grad| %.2e"
          % (scale, br.c, br.w_mean, br.r, br.total, np.abs(grad).max()))

# A finite-difference check of the gradient at one entry.
h = 1e-6
e = np.zeros_like(logits)
e[0, 7, 7] = h
fd = (combined_loss(logits + e, target, u, cfg)[0].total - combined_loss(logits - e, target, u, cfg)[0].total) / (2 * h)
print("analytic %.8e  numeric %.8e" % (combined_loss(logits, target, u, cfg)[1][0, 7, 7], fd))
