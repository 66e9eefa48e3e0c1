"""Bandwidth aggressiveness functions: map bytes_ratio in [0,1] to a factor.

The linear form F(r) = S*r + I is the default.  The named fixed forms cover
the alternative shapes used in the function-shape study; all share the
output range 0.25..2 except custom tables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

LINEAR = "linear"
QUADRATIC_INCREASING = "quadratic-increasing"
RECIPROCAL = "reciprocal"
CONCAVE_INCREASING = "concave-increasing"
LINEAR_DECREASING = "linear-decreasing"
QUADRATIC_DECREASING = "quadratic-decreasing"
CUSTOM_TABLE = "custom-table"

FORMS = (LINEAR, QUADRATIC_INCREASING, RECIPROCAL, CONCAVE_INCREASING,
         LINEAR_DECREASING, QUADRATIC_DECREASING, CUSTOM_TABLE)

# Forms whose factor must be non-decreasing in bytes_ratio.
INCREASING_FORMS = (LINEAR, QUADRATIC_INCREASING, RECIPROCAL, CONCAVE_INCREASING)


class AggressivenessError(ValueError):
    pass


@dataclass(frozen=True)
class AggressivenessFunction:
    form: str = LINEAR
    slope: float = 1.75
    intercept: float = 0.25
    # custom-table: ((r, factor), ...) breakpoints, linearly interpolated
    table: tuple = ()

    def __post_init__(self):
        if self.form not in FORMS:
            raise AggressivenessError(f"unknown aggressiveness form {self.form!r}")
        if self.form == LINEAR and self.slope < 0:
            raise AggressivenessError(
                "linear form requires slope >= 0; use linear-decreasing for a negative slope")
        if self.form == CUSTOM_TABLE:
            if len(self.table) < 2:
                raise AggressivenessError("custom-table needs at least two breakpoints")
            rs = [r for r, _ in self.table]
            if rs[0] != 0.0 or rs[-1] != 1.0 or any(b <= a for a, b in zip(rs, rs[1:])):
                raise AggressivenessError(
                    "custom-table breakpoints must strictly increase from r=0 to r=1")
        # Output must be strictly positive over [0,1]; increasing forms must
        # be non-decreasing.  Checked by sampling.
        prev = None
        for i in range(101):
            v = self(i / 100.0)
            if v <= 0.0:
                raise AggressivenessError(f"factor must stay positive; got {v} at r={i/100.0}")
            if self.form in INCREASING_FORMS and prev is not None and v < prev - 1e-12:
                raise AggressivenessError(f"form {self.form} must be non-decreasing")
            prev = v

    def __call__(self, bytes_ratio: float) -> float:
        return f_eval(self, bytes_ratio)


def f_eval(f: AggressivenessFunction, bytes_ratio: float) -> float:
    """Evaluate the aggressiveness factor.  Input outside [0,1] is clamped."""
    r = bytes_ratio
    if r < 0.0:
        r = 0.0
    elif r > 1.0:
        r = 1.0
    form = f.form
    if form == LINEAR:
        return f.slope * r + f.intercept
    if form == QUADRATIC_INCREASING:
        return 1.75 * r * r + 0.25
    if form == RECIPROCAL:
        return 1.0 / (-3.5 * r + 4.0)
    if form == CONCAVE_INCREASING:
        return -1.75 * r * r + 3.5 * r + 0.25
    if form == LINEAR_DECREASING:
        return -1.75 * r + 2.0
    if form == QUADRATIC_DECREASING:
        return -1.75 * r * r + 2.0
    # custom table: piecewise-linear interpolation
    table = f.table
    for (r0, v0), (r1, v1) in zip(table, table[1:]):
        if r <= r1:
            return v0 + (v1 - v0) * (r - r0) / (r1 - r0)
    return table[-1][1]


IDENTITY = AggressivenessFunction(form=LINEAR, slope=0.0, intercept=1.0)

# The six named shapes of the function study, by study index.
STUDY_FUNCTIONS = {
    1: AggressivenessFunction(form=LINEAR, slope=1.75, intercept=0.25),
    2: AggressivenessFunction(form=QUADRATIC_INCREASING),
    3: AggressivenessFunction(form=RECIPROCAL),
    4: AggressivenessFunction(form=CONCAVE_INCREASING),
    5: AggressivenessFunction(form=LINEAR_DECREASING),
    6: AggressivenessFunction(form=QUADRATIC_DECREASING),
}
