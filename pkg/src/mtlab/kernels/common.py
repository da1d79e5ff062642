"""Shared kernel constants and errors."""

# Exponent cap before the guard trips; e^700 is near the float64 ceiling.
EXP_CAP = 700.0


class OverflowGuardError(ArithmeticError):
    """Raised when an exponential quadrature would overflow.

    Carries the offending triangle index and the largest |u| seen there so
    blow-up diagnostics can report the concentration location.
    """

    def __init__(self, what, triangle, max_abs_u, exponent):
        self.what = what
        self.triangle = triangle
        self.max_abs_u = max_abs_u
        self.exponent = exponent
        super().__init__(
            f"{what}: exponent {exponent:.3g} exceeds {EXP_CAP:g} "
            f"on triangle {triangle} (max |u| = {max_abs_u:.6g})"
        )
