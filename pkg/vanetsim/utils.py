import math


def verify_positive(name, value):
    if not is_positive(value):
        raise ValueError(f"{name} must be positive, got {value!r}")


def verify_non_negative(name, value):
    if not (math.isfinite(value) and value >= 0):
        raise ValueError(f"{name} must be non-negative, got {value!r}")


def is_positive(x):
    return math.isfinite(x) and x > 0


def distance(a, b):
    return math.hypot(b.x - a.x, b.y - a.y)


def heading(a, b):
    """Heading of the vector a->b in degrees, counterclockwise from east."""
    return math.degrees(math.atan2(b.y - a.y, b.x - a.x))


def turn_angle(heading_in, heading_out):
    """Signed change of heading in degrees, normalised to (-180, 180]."""
    angle = (heading_out - heading_in) % 360.0

    return angle - 360.0 if angle > 180.0 else angle


def axis_of(heading_deg):
    return heading_deg % 180.0


def axis_separation(axis_a, axis_b):
    diff = abs(axis_a - axis_b) % 180.0

    return min(diff, 180.0 - diff)


def parse_bool(text):
    lowered = text.strip().lower()

    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False

    raise ValueError(f"{text!r} is not a boolean")


def format_float(value, digits=3):
    return f"{value:.{digits}f}"


def step_digits(step, most=6):
    """Fewest decimals (at least one) that write every multiple of ``step`` exactly."""
    for digits in range(1, most):
        if abs(round(step, digits) - step) < 1e-9:
            return digits
    return most
