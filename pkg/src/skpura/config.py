"""System and code parameterization for SKP-coded MIMO unsourced random access.

An active user maps a B-bit packet onto v = a (x) x, where a is an
index-modulated sparse vector (one nonzero per segment) and x is an
FEC-coded QPSK vector whose first e_ref symbols are a known reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SQRT2_2 = math.sqrt(2.0) / 2.0

# pi/4-QPSK points, indexed so that Gray bits (b1, b0) map to index 2*b1 + b0:
# b1 selects the sign of the real part, b0 the sign of the imaginary part.
CONSTELLATION = np.array(
    [
        SQRT2_2 * (1 + 1j),
        SQRT2_2 * (1 - 1j),
        SQRT2_2 * (-1 + 1j),
        SQRT2_2 * (-1 - 1j),
    ],
    dtype=np.complex128,
)
N_POINTS = 4

# Reference value shared by the first segment of a and the first e_ref symbols of x.
S_REF = CONSTELLATION[0]

RATE_HALF = "1/2"
RATE_3_4 = "3/4"
UNCODED = "uncoded"

# Information bits carried per (2-bit) QPSK symbol at each FEC rate.
_BITS_PER_SYMBOL = {RATE_HALF: 1.0, RATE_3_4: 1.5, UNCODED: 2.0}


class ConfigError(ValueError):
    """Raised when a parameter set violates the code-construction constraints."""


@dataclass(frozen=True)
class SkpConfig:
    """Full parameterization of one SKP code / system operating point.

    M        -- receive antennas at the access point
    K_a      -- active users in the frame
    T_tot    -- complex channel uses per frame
    B        -- packet bits per user
    I_IM     -- number of index-modulation segments in a
    L_IM     -- positions per segment (a has length L_a = I_IM * L_IM)
    L_x      -- symbols in x (first e_ref are the reference)
    e_ref    -- reference symbols at the head of x
    fec_rate -- "1/2", "3/4" (punctured), or "uncoded"
    ebn0_db  -- average bit SNR, Eb/N0 = P / (B * N0)
    K        -- total user population (bookkeeping only; inactive users are silent)
    """

    M: int
    K_a: int
    T_tot: int
    B: int
    I_IM: int
    L_IM: int
    L_x: int
    e_ref: int
    fec_rate: str
    ebn0_db: float
    K: int = 0

    def __post_init__(self):
        if self.fec_rate not in _BITS_PER_SYMBOL:
            raise ConfigError(f"unknown fec_rate {self.fec_rate!r}")
        if min(self.M, self.K_a, self.T_tot, self.B, self.I_IM, self.L_IM, self.L_x) < 1:
            raise ConfigError("all size parameters must be positive")
        if not 1 <= self.e_ref <= self.L_x:
            raise ConfigError("e_ref must lie in [1, L_x]")
        if self.L_a * self.L_x > self.T_tot:
            raise ConfigError(
                f"codeword length L_a*L_x = {self.L_a * self.L_x} exceeds T_tot = {self.T_tot}"
            )
        n_data = self.L_x - self.e_ref
        bx = _BITS_PER_SYMBOL[self.fec_rate] * n_data
        if bx != int(bx):
            raise ConfigError("FEC rate does not yield an integer B_x for these lengths")
        if self.fec_rate == RATE_3_4 and int(bx) % 3 != 0:
            raise ConfigError("rate-3/4 puncturing needs B_x divisible by 3")
        if self.B_a < 1:
            raise ConfigError("no bits left for index modulation (B_a < 1)")
        # The first segment's value is pinned to the reference, so the index
        # modulator can address L_IM^I_IM supports times 4^(I_IM-1) value words.
        budget = self.L_IM**self.I_IM * N_POINTS ** (self.I_IM - 1)
        if 2**self.B_a > budget:
            raise ConfigError(
                f"B_a = {self.B_a} exceeds the index-modulation budget log2({budget})"
            )

    @property
    def L_a(self) -> int:
        return self.I_IM * self.L_IM

    @property
    def B_x(self) -> int:
        """FEC info bits: every non-reference symbol carries 2*rate bits."""
        return int(_BITS_PER_SYMBOL[self.fec_rate] * (self.L_x - self.e_ref))

    @property
    def B_a(self) -> int:
        return self.B - self.B_x

    @property
    def n_coded_symbols(self) -> int:
        return self.L_x - self.e_ref

    @property
    def P(self) -> float:
        """Per-codeword energy: I_IM * L_x unit-modulus symbols."""
        return float(self.I_IM * self.L_x)

    @property
    def N0(self) -> float:
        return self.P / (self.B * 10.0 ** (self.ebn0_db / 10.0))


# Published operating points (T_tot = 3200 channel uses, B = 96 bits).
_TABLE_ROWS = {
    1: dict(L_IM=8, I_IM=5, L_x=80, e_ref=7, fec_rate=RATE_HALF),
    2: dict(L_IM=14, I_IM=4, L_x=57, e_ref=5, fec_rate=RATE_3_4),
    3: dict(L_IM=26, I_IM=3, L_x=41, e_ref=1, fec_rate=UNCODED),
}


def preset(row: int, M: int, K_a: int, ebn0_db: float) -> SkpConfig:
    """Build an SkpConfig from one of the published coding-parameter rows (1-3)."""
    if row not in _TABLE_ROWS:
        raise ConfigError(f"unknown preset row {row}; choose from {sorted(_TABLE_ROWS)}")
    return SkpConfig(M=M, K_a=K_a, T_tot=3200, B=96, ebn0_db=ebn0_db, **_TABLE_ROWS[row])
