"""Independent reference computations used as test oracles."""

from fractions import Fraction
import math


def toa_oracle_s(sf, bw_hz, cr_den, preamble, payload_len, explicit_header=True, crc=True, ldro=False):
    """Symbol accounting done block by block in exact rationals.

    The header block is 8 symbols at CR 4/8 and carries 4*SF bits of the
    stream (header, payload, CRC, 8 framing bits); every further block of
    ``cr_den`` symbols carries 4*(SF - 2*DE) bits.
    """
    bits = 8 * payload_len + (16 if crc else 0) + (20 if explicit_header else 0) + 8
    remaining = bits - 4 * sf
    symbols = 8
    per_block = 4 * (sf - (2 if ldro else 0))
    while remaining > 0:
        remaining -= per_block
        symbols += cr_den
    t_sym = Fraction(2**sf, bw_hz)
    return (Fraction(preamble) + Fraction(17, 4) + symbols) * t_sym, symbols


def free_space_db(freq_hz, d_m):
    c = 299_792_458.0
    return 20 * math.log10(4 * math.pi * d_m * freq_hz / c)
