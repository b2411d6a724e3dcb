"""Base-material parameters for the membrane model."""

from dataclasses import dataclass


@dataclass(frozen=True)
class LameSet:
    """Lame coefficients plus the reduced modulus of the membrane law.

    lambda0 = 2*lam*mu/(lam + 2*mu) always holds; construct through
    :func:`lame_from_engineering` or :meth:`from_lame`.
    """

    lam: float
    mu: float
    lambda0: float

    def __post_init__(self):
        if self.mu <= 0 or self.lam + 2.0 * self.mu <= 0:
            raise ValueError("need mu > 0 and lam + 2 mu > 0")
        expect = 2.0 * self.lam * self.mu / (self.lam + 2.0 * self.mu)
        if abs(self.lambda0 - expect) > 1e-12 * max(1.0, abs(expect)):
            raise ValueError("lambda0 inconsistent with lam, mu")

    @classmethod
    def from_lame(cls, lam, mu):
        return cls(lam, mu, 2.0 * lam * mu / (lam + 2.0 * mu))

    @property
    def bulk_bound(self):
        """Upper bound (4/9)(lambda0 + mu) on the hydrostatic stiffness."""
        return 4.0 / 9.0 * (self.lambda0 + self.mu)


def lame_from_engineering(young, poisson):
    """LameSet from Young's modulus and Poisson's ratio.

    young > 0 and -1 < poisson < 0.5 required.
    """
    if young <= 0:
        raise ValueError("Young's modulus must be positive")
    if not -1.0 < poisson < 0.5:
        raise ValueError("Poisson's ratio must lie in (-1, 0.5)")
    lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
    mu = young / (2.0 * (1.0 + poisson))
    return LameSet.from_lame(lam, mu)
