import numpy as np

omega = 1.0 / (3.0 * 0.01 + 0.5)
omega_max = 1.95


def collide(f, feq, omega):
    """Relax towards equilibrium at rate omega."""
    return f - omega * (f - feq)


def check(omega_value):
    if omega_value > omega_max:
        raise ValueError("omega too large")
    return omega_value


class Solver:
    def __init__(self):
        self.omega = omega
        self.omegas = [omega, 1.0]
