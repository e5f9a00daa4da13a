"""Default hyperparameters."""

import math

EPSILON = 5.0  # Douglas-Peucker tolerance, px
INTERVAL = 25.0  # resampling step for buildings, px
INTERVAL_LARGE = 50.0  # water bodies and roads, px
ANGLE_THRESHOLD_DEG = 135.0
ANGLE_THRESHOLD = math.radians(ANGLE_THRESHOLD_DEG)
LOSS_WEIGHTS = (1.0, 1.0, 1.0)
PROB_THRESHOLD = 0.5
OFFSET_ITERS = 2
RATES_BUILDING = (1, 3, 6)
RATES_LARGE = (1, 5, 10)
PAIR_IOU = 0.5  # instance pairing for labels and PoLiS
APLS_RADIUS = 50.0
