import math

COST_FLOOR = 1e-20


def compute_reward(c_prev_star: float, c_t_star: float, c0_star: float) -> float:
    """Square-root-stretched share of the log-cost range gained by one step."""
    c_prev = max(float(c_prev_star), COST_FLOOR)
    c_t = max(float(c_t_star), COST_FLOOR)
    log_c0 = math.log10(max(float(c0_star), COST_FLOOR))
    gain = math.log10(c_prev) - math.log10(c_t)
    offset = max(1.5 - gain, 1.5 - log_c0, 0.0)
    return math.sqrt(max(gain + offset, 0.0) / (log_c0 + offset))
