# # IoU / Dice scoring and model comparison
#
# Scores come from integer pixel counts. Two models are compared by the
# percent change of each class mean over the baseline.

import numpy as np

from uaseg import Summary, aggregate, binary_iou_dice, compare
from uaseg.metrics import score_pair

pred = np.zeros((8, 8), bool)
gt = np.zeros((8, 8), bool)
pred[1:6, 1:6] = True
gt[2:7, 2:7] = True
iou, dice = binary_iou_dice(pred, gt)
print("iou %.4f dice %.4f  2iou/(1+iou) %.4f" % (iou, dice, 2 * iou / (1 + iou)))

# Two empty masks agree perfectly but say nothing, so they are flagged and
# left out of the averages unless asked for.

scores = [score_pair("a", "car", pred, gt), score_pair("b", "car", gt, gt),
          score_pair("c", "car", np.zeros((4, 4)), np.zeros((4, 4)))]
s = aggregate(scores)
print("car mean iou %.4f over %d pairs, %d flagged" % (s.per_class["car"].iou, s.count, s.flagged))

# ## Comparing two models
#
# Per-class means for an uncertainty-trained model (A) and a baseline (B).

a = Summary.from_table({"car": (0.156, 0.333), "road": (0.62, 0.76), "sky": (0.81, 0.89)})
b = Summary.from_table({"car": (0.087, 0.142), "road": (0.55, 0.71), "sky": (0.80, 0.88)})
report = compare(a, b)
for name, row in report.per_class.items():
    print("%-5s iou %+7.2f%%  dice %+7.2f%%" % (name, row["iou_change"], row["dice_change"]))
print("mean change iou %+.2f%%  dice %+.2f%%" % (report.mean_change_iou, report.mean_change_dice))
