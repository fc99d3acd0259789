"""Closed-form trade-off between observer guessability and typing time.

Guess probability for a length-n password over k shuffled keys:

    p = k**(-n)

assuming a truly random password, an observer who always infers the pressed
physical key, and an observer who knows the shuffling system.  Expected
entry time with keystroke time KT, per-key decision time DT and memory
parameter alpha in [0, 1]:

    T = n*KT + (1 - alpha)*(n - 1)*(k*DT) + k*DT

Timing arithmetic runs in exact rationals and is rounded to float once, so
the documented identities (linearity in alpha, agreement with the
deterministic simulator) hold bitwise, not just approximately.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

MODEL_ASSUMPTIONS = (
    "password drawn uniformly at random",
    "observer always infers the pressed physical key",
    "observer knows the shuffling system; only the permutation is secret",
)

# Keystroke-level nominal constants: time to move to and press a key, and
# per-key visual decision time.
DEFAULT_KT_S = 0.5
DEFAULT_DT_S = 0.24

# Targets within one part in 1e9 of an exact power count as met, so float
# inputs like 1/9 resolve to the intended integer boundary.
_BOUNDARY_SLACK = Fraction(1, 10**9)


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class TimingParams:
    kt_s: float = DEFAULT_KT_S
    dt_s: float = DEFAULT_DT_S
    alpha: float = 1.0

    def __post_init__(self):
        if self.kt_s <= 0 or self.dt_s <= 0:
            raise ParameterError("KT and DT must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError("alpha must lie in [0, 1]")


@dataclass(frozen=True)
class SecurityParams:
    n: int
    k: int
    p: float

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise ParameterError("n and k must be >= 1")

    @classmethod
    def derive(cls, k: int, n: int) -> "SecurityParams":
        return cls(n=n, k=k, p=guess_probability(k, n))


@dataclass(frozen=True)
class TradeoffPoint:
    n: int
    k: int
    alpha: float
    kt_s: float
    dt_s: float
    p: float
    t_s: float

    @property
    def cps(self) -> float:
        return self.n / self.t_s

    @property
    def wpm(self) -> float:
        return self.cps * 60.0 / 5.0


def guess_probability(k: int, n: int) -> float:
    """Probability an observer guesses the whole password: k**(-n)."""
    if k < 1 or n < 1:
        raise ParameterError("k and n must be >= 1")
    if k == 1:
        return 1.0
    return math.exp(-n * math.log(k))


def required_shuffle_size(p_target: float, n: int) -> int:
    """Smallest integer k with k**(-n) <= p_target, i.e. ceil(p**(-1/n)).

    The float guess is verified against exact integer powers; a relative
    slack of 1e-9 treats targets sitting a hair below an exact power (float
    artifacts like 1/9) as met.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    if not 0.0 < p_target <= 1.0:
        raise ParameterError("p_target must lie in (0, 1]")
    target = Fraction(p_target)

    def meets(k: int) -> bool:
        # k**(-n) <= p  <=>  p * k**n >= 1, with boundary slack.
        return target * k**n >= 1 - _BOUNDARY_SLACK

    if meets(1):
        return 1
    # meets is monotone in k; bracket then bisect (unit stepping would crawl
    # for extreme targets where the slack band spans many integers)
    try:
        guess = p_target ** (-1.0 / n)
    except OverflowError:
        guess = math.inf
    hi = max(2, math.ceil(guess) + 1) if math.isfinite(guess) else 2
    while not meets(hi):
        hi *= 2
    lo = 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if meets(mid):
            hi = mid
        else:
            lo = mid
    return hi


def entry_time_exact(n: int, k: int, timing: TimingParams) -> Fraction:
    """Entry time as an exact rational; the float API rounds this once.

    Keeping the arithmetic rational makes the model identities hold exactly:
    linearity in alpha, and agreement with the deterministic simulator.
    """
    kt = Fraction(timing.kt_s)
    dt = Fraction(timing.dt_s)
    alpha = Fraction(timing.alpha)
    return n * kt + (1 - alpha) * (n - 1) * (k * dt) + k * dt


def expected_entry_time(n: int, k: int, timing: TimingParams) -> float:
    """Expected seconds to type an n-character password with k keys shuffled."""
    if n < 1 or k < 1:
        raise ParameterError("n and k must be >= 1")
    return float(entry_time_exact(n, k, timing))


def predicted_entry_rate(n: int, k: int, timing: TimingParams) -> tuple[float, float]:
    """(characters per second, words per minute) implied by the time model."""
    t = entry_time_exact(n, k, timing)
    cps = float(Fraction(n) / t)
    return cps, cps * 12.0


def tradeoff_point(n: int, k: int, timing: TimingParams) -> TradeoffPoint:
    return TradeoffPoint(
        n=n, k=k, alpha=timing.alpha, kt_s=timing.kt_s, dt_s=timing.dt_s,
        p=guess_probability(k, n), t_s=expected_entry_time(n, k, timing),
    )


def tradeoff_table(n_range: Iterable[int], k_range: Iterable[int],
                   alpha_values: Sequence[float], timing: TimingParams) -> list[TradeoffPoint]:
    """Cartesian product of the model over (n, k, alpha), sorted by (n, k, alpha)."""
    ns = sorted(set(int(n) for n in n_range))
    ks = sorted(set(int(k) for k in k_range))
    alphas = sorted(set(float(a) for a in alpha_values))
    if not ns or not ks or not alphas:
        raise ParameterError("n, k and alpha ranges must be non-empty")
    rows = []
    for n in ns:
        for k in ks:
            for alpha in alphas:
                t = TimingParams(kt_s=timing.kt_s, dt_s=timing.dt_s, alpha=alpha)
                rows.append(tradeoff_point(n, k, t))
    return rows


CSV_HEADER = ["n", "k", "alpha", "KT", "DT", "p", "T", "cps", "wpm"]


def table_to_csv(rows: Sequence[TradeoffPoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow([r.n, r.k, repr(r.alpha), repr(r.kt_s), repr(r.dt_s),
                         repr(r.p), repr(r.t_s), repr(r.cps), repr(r.wpm)])
    return buf.getvalue()


def table_to_json(rows: Sequence[TradeoffPoint]) -> str:
    doc = {
        "assumptions": list(MODEL_ASSUMPTIONS),
        "rows": [
            {
                "n": r.n, "k": r.k, "alpha": r.alpha, "KT": r.kt_s, "DT": r.dt_s,
                "p": r.p, "T": r.t_s, "cps": r.cps, "wpm": r.wpm,
            }
            for r in rows
        ],
    }
    return json.dumps(doc, sort_keys=True)
