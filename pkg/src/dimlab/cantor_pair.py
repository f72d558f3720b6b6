"""The digit-split function pair on the {0,1}-digit Cantor set.

For x = sum(a_i * 3**-i) with digits a_i in {0,1}, define

    f(x) = sum(a_1, a_3, a_5, ... weighted 3**-1, 3**-2, ...)
    g(x) = sum(a_2, a_4, a_6, ... weighted 3**-1, 3**-2, ...)

so f reads the odd-position digits and g the even-position ones.  Both
graphs occupy exactly 2**(3n) of the 9**-n mesh squares, while the graph
of f + g occupies 2**(2n) * (3**n + 1): the sum is strictly rougher than
either summand.  This module reproduces those counts by explicit
enumeration and carries the closed forms.

Digit bookkeeping convention: all counting is done in exact integers at
denominators 3**depth (abscissa) and 3**(depth//2) (ordinate), so a
point can never be misclassified across a half-open mesh boundary.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

from .spaces import DigitVector

ENUMERATION_DEPTH_LIMIT = 24


class EnumerationLimitExceeded(RuntimeError):
    pass


class DigitFunction(enum.Enum):
    ODD_DIGITS = "odd_digits"
    EVEN_DIGITS = "even_digits"
    SUM = "sum"


def evaluate(fn: DigitFunction, digits: DigitVector) -> Fraction:
    """Exact value of the digit function, truncated at the available digits."""
    a = digits.digits
    odd = sum(
        Fraction(a[i], 3 ** ((i + 2) // 2)) for i in range(0, len(a), 2)
    )
    even = sum(
        Fraction(a[i], 3 ** ((i + 1) // 2)) for i in range(1, len(a), 2)
    )
    if fn is DigitFunction.ODD_DIGITS:
        return odd
    if fn is DigitFunction.EVEN_DIGITS:
        return even
    return odd + even


def to_middle_thirds(x: Fraction) -> Fraction:
    """Digit-doubling map onto the standard middle-thirds Cantor set.

    Doubling every {0,1} digit gives a {0,2} digit expansion, so the
    image of the scaled set is exactly the classical Cantor set.
    """
    return 2 * Fraction(x)


@dataclass(frozen=True)
class GraphEnumeration:
    """All 2**depth graph points (x, h(x)) over depth-limited digits."""

    fn: DigitFunction
    depth: int
    points: tuple[tuple[Fraction, Fraction], ...]


def _value_numerator(fn: DigitFunction, bits: int, depth: int) -> int:
    """Integer numerator of the function value at denominator 3**half.

    ``half`` is (depth+1)//2 for the odd reader and depth//2 for the even
    reader; the sum is returned at the odd half so both parts align.
    """
    odd_half = (depth + 1) // 2
    even_half = depth // 2
    odd_num = 0
    even_num = 0
    for i in range(1, depth + 1):
        if not (bits >> (depth - i)) & 1:
            continue
        if i % 2 == 1:
            odd_num += 3 ** (odd_half - (i + 1) // 2)
        else:
            even_num += 3 ** (even_half - i // 2)
    if fn is DigitFunction.ODD_DIGITS:
        return odd_num
    if fn is DigitFunction.EVEN_DIGITS:
        return even_num * 3 ** (odd_half - even_half)
    return odd_num + even_num * 3 ** (odd_half - even_half)


def enumerate_graph(fn: DigitFunction, depth: int,
                    limit: int = ENUMERATION_DEPTH_LIMIT) -> GraphEnumeration:
    """Evaluate the function on every depth-limited digit vector.

    Points come out in ascending x order (digit-lexicographic equals
    numeric order).
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if depth > limit:
        raise EnumerationLimitExceeded(
            f"depth {depth} exceeds the enumeration limit {limit}"
        )
    odd_half = (depth + 1) // 2
    xden = 3 ** depth
    vden = 3 ** odd_half
    points = []
    for bits in range(1 << depth):
        xnum = 0
        for i in range(depth):
            xnum = xnum * 3 + ((bits >> (depth - 1 - i)) & 1)
        points.append((Fraction(xnum, xden),
                       Fraction(_value_numerator(fn, bits, depth), vden)))
    return GraphEnumeration(fn, depth, tuple(points))


def closed_form_counts(n: int) -> tuple[int, int, int]:
    """Exact 9**-n mesh counts (graph f, graph g, graph f+g)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return (8 ** n, 8 ** n, 4 ** n * (3 ** n + 1))


def brute_force_mesh_count(fn: DigitFunction, n: int,
                           limit: int = ENUMERATION_DEPTH_LIMIT) -> int:
    """Mesh count of the graph at scale 9**-n by depth-4n enumeration.

    Depth 4n resolves x to 3**-4n < 9**-n and the value to exactly
    9**-n.  Truncation alone misses the cells reached only by the
    all-ones digit tails (the supremum of each cylinder), so for every
    enumerated point the exact tail-completed companion is counted too:
    its x stays in the same half-open cell, while its value gains the
    full tail sum (half a cell for f and for g, exactly one cell for
    f+g, where it realizes the top cell of each column).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    depth = 4 * n
    if depth > limit:
        raise EnumerationLimitExceeded(
            f"depth {depth} exceeds the enumeration limit {limit}"
        )
    half = 2 * n
    x_div = 3 ** half  # x numerator at 3**-4n -> cell via // 3**(4n-2n)
    cells = set()
    sum_fn = fn is DigitFunction.SUM
    for bits in range(1 << depth):
        xnum = 0
        for i in range(depth):
            xnum = xnum * 3 + ((bits >> (depth - 1 - i)) & 1)
        # value numerator at denominator 3**2n is an exact integer
        vnum = _value_numerator(fn, bits, depth)
        cx = xnum // x_div
        cells.add((cx, vnum))
        if sum_fn:
            # completion point: value + 3**-2n lands on the next cell edge
            cells.add((cx, vnum + 1))
    return len(cells)


def surjectivity_check(n: int,
                       limit: int = ENUMERATION_DEPTH_LIMIT) -> bool:
    """Finite-resolution witness that f+g maps each cylinder onto a full band.

    For every depth-2n prefix h, the depth-4n extensions of h must hit
    every 3**-2n cell of the half-open band starting at (f+g)(x_h).
    Vacuously true at n = 0.
    """
    if n == 0:
        return True
    depth = 4 * n
    if depth > limit:
        raise EnumerationLimitExceeded(
            f"depth {depth} exceeds the enumeration limit {limit}"
        )
    want = set(range(3 ** n))
    for prefix in range(1 << (2 * n)):
        base_bits = prefix << (2 * n)
        base_val = _value_numerator(DigitFunction.SUM, base_bits, depth)
        seen = set()
        for ext in range(1 << (2 * n)):
            vnum = _value_numerator(DigitFunction.SUM, base_bits | ext, depth)
            seen.add(vnum - base_val)
        if not want <= seen:
            return False
    return True
