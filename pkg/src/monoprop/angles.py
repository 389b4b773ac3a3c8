import math

TWO_PI = 2.0 * math.pi


def normalize_angle(angle):
    """Wrap ``angle`` into the half-open interval (-pi, pi]."""
    wrapped = math.remainder(float(angle), TWO_PI)
    if wrapped <= -math.pi:
        wrapped += TWO_PI
    return wrapped
