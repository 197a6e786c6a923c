"""Dense arithmetic in the geometric algebra G(4,0).

Basis vectors e1..e4 all square to +1; e4 plays the role of the origin
vector ``e`` of the 1D-Up model.  A multivector is stored as 16 float64
coefficients in the following fixed order (part of the public contract,
motor files depend on it)::

    index  0   1   2   3   4   5    6    7    8    9    10   11    12    13    14    15
    blade  1   e1  e2  e3  e4  e12  e13  e14  e23  e24  e34  e123  e124  e134  e234  e1234

``BLADE_MASKS[i]`` is the bitset of basis vectors in blade ``i`` (bit ``k-1``
set for ``e_k``), so the order above is grade-major, lexicographic within a
grade.

Every operation here accepts either a :class:`Multivector` or a raw array
whose last axis has length 16.  Raw arrays are processed batch-wise and
returned as arrays, which is what the property checks use for speed.
"""

import numpy as np

from .errors import ValidationError

__all__ = [
    "BLADES",
    "BLADE_MASKS",
    "GRADES",
    "LAW_RTOL",
    "Multivector",
    "ONE",
    "E1",
    "E2",
    "E3",
    "E4",
    "E1234",
    "blade_index",
    "geometric_product",
    "reverse",
    "grade_project",
    "norm",
    "scalar_part",
    "as_multivector",
]

# Relative tolerance for structural identities (associativity, reversion, ...).
LAW_RTOL = 1e-12

BLADES = (
    "1", "e1", "e2", "e3", "e4",
    "e12", "e13", "e14", "e23", "e24", "e34",
    "e123", "e124", "e134", "e234", "e1234",
)


def _mask(name):
    if name == "1":
        return 0
    return sum(1 << (int(ch) - 1) for ch in name[1:])


BLADE_MASKS = tuple(_mask(b) for b in BLADES)
GRADES = np.array([bin(m).count("1") for m in BLADE_MASKS])
_INDEX_OF_MASK = {m: i for i, m in enumerate(BLADE_MASKS)}

# (-1)^(k(k-1)/2) per grade k
_REVERSE_SIGN = np.array([1.0 if (k * (k - 1) // 2) % 2 == 0 else -1.0 for k in GRADES])


def _reorder_sign(a, b):
    # transpositions needed to move every vector of b left past the vectors of a
    a >>= 1
    swaps = 0
    while a:
        swaps += bin(a & b).count("1")
        a >>= 1
    return -1.0 if swaps & 1 else 1.0


def _build_product_tables():
    index = np.zeros((16, 16), dtype=int)
    sign = np.zeros((16, 16))
    for i, ma in enumerate(BLADE_MASKS):
        for j, mb in enumerate(BLADE_MASKS):
            index[i, j] = _INDEX_OF_MASK[ma ^ mb]
            sign[i, j] = _reorder_sign(ma, mb)
    # flattened (i, j) -> k map with signs, so a product is one matmul
    flat = np.zeros((256, 16))
    flat[np.arange(256), index.ravel()] = sign.ravel()
    return index, sign, flat


PRODUCT_INDEX, PRODUCT_SIGN, _PRODUCT_FLAT = _build_product_tables()
PRODUCT_INDEX.setflags(write=False)
PRODUCT_SIGN.setflags(write=False)


def blade_index(name):
    """Position of a blade given by name, e.g. ``blade_index("e24") == 9``."""
    try:
        return BLADES.index(name)
    except ValueError:
        raise KeyError(f"unknown blade {name!r}") from None


class Multivector:
    """Immutable element of G(4,0) backed by 16 dense coefficients."""

    __slots__ = ("_c",)

    def __init__(self, coeffs):
        c = np.array(coeffs, dtype=float).reshape(-1)
        if c.shape != (16,):
            raise ValidationError(f"a multivector needs 16 coefficients, got {c.size}")
        if not np.all(np.isfinite(c)):
            raise ValidationError("multivector coefficients must be finite")
        c.setflags(write=False)
        self._c = c

    @classmethod
    def from_blades(cls, **terms):
        """``Multivector.from_blades(s=3, e12=2)``; ``s`` names the scalar."""
        c = np.zeros(16)
        for name, value in terms.items():
            c[0 if name == "s" else blade_index(name)] = value
        return cls(c)

    @property
    def coeffs(self):
        return self._c

    @property
    def scalar(self):
        return float(self._c[0])

    def grade(self, k):
        return grade_project(self, k)

    def __array__(self, dtype=None, copy=None):
        return self._c if dtype is None else self._c.astype(dtype)

    def __mul__(self, other):
        if isinstance(other, Multivector):
            return geometric_product(self, other)
        if np.isscalar(other):
            return Multivector(self._c * other)
        return NotImplemented

    def __rmul__(self, other):
        if np.isscalar(other):
            return Multivector(self._c * other)
        return NotImplemented

    def __truediv__(self, other):
        if np.isscalar(other):
            return Multivector(self._c / other)
        return NotImplemented

    def __add__(self, other):
        if isinstance(other, Multivector):
            return Multivector(self._c + other._c)
        if np.isscalar(other):
            c = self._c.copy()
            c[0] += other
            return Multivector(c)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Multivector):
            return Multivector(self._c - other._c)
        if np.isscalar(other):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return Multivector(-self._c)

    def __invert__(self):
        return reverse(self)

    def __eq__(self, other):
        if isinstance(other, Multivector):
            return bool(np.array_equal(self._c, other._c))
        return NotImplemented

    __hash__ = None

    def allclose(self, other, rtol=1e-12, atol=1e-12):
        return bool(np.allclose(self._c, np.asarray(other), rtol=rtol, atol=atol))

    def __repr__(self):
        terms = [
            f"{v:+.6g}" + ("" if b == "1" else f"*{b}")
            for v, b in zip(self._c, BLADES)
            if v != 0.0
        ]
        return "Multivector(" + (" ".join(terms) if terms else "0") + ")"


def _unit(k):
    c = np.zeros(16)
    c[k] = 1.0
    return Multivector(c)


ONE = _unit(0)
E1 = _unit(1)
E2 = _unit(2)
E3 = _unit(3)
E4 = _unit(4)
E1234 = _unit(15)


def as_multivector(obj):
    """Coerce a Multivector, a length-16 array, or anything with ``to_multivector()``."""
    if isinstance(obj, Multivector):
        return obj
    to_mv = getattr(obj, "to_multivector", None)
    if to_mv is not None:
        return to_mv()
    return Multivector(obj)


def _split(x):
    if isinstance(x, Multivector):
        return x._c, True
    if hasattr(x, "to_multivector"):
        return x.to_multivector()._c, True
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1:] != (16,):
        raise ValidationError(f"expected trailing axis of length 16, got shape {arr.shape}")
    return arr, False


def geometric_product(a, b):
    """Full geometric product ``ab``.

    Since every basis vector squares to +1, the only sign that appears is the
    permutation sign from reordering basis vectors into canonical order.
    """
    ca, wrap_a = _split(a)
    cb, wrap_b = _split(b)
    outer = ca[..., :, None] * cb[..., None, :]
    out = outer.reshape(*outer.shape[:-2], 256) @ _PRODUCT_FLAT
    return Multivector(out) if (wrap_a and wrap_b) else out


def reverse(a):
    """Reversion: the grade-k part picks up the sign (-1)^(k(k-1)/2)."""
    c, wrap = _split(a)
    out = c * _REVERSE_SIGN
    return Multivector(out) if wrap else out


def grade_project(a, k):
    """Keep only the grade-``k`` coefficients."""
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 0 <= k <= 4:
        raise ValidationError(f"grade must be an integer in 0..4, got {k!r}")
    c, wrap = _split(a)
    out = np.where(GRADES == k, c, 0.0)
    return Multivector(out) if wrap else out


def scalar_part(a):
    c, wrap = _split(a)
    return float(c[0]) if wrap else c[..., 0]


def norm(a):
    """Euclidean norm of the coefficient vector."""
    c, wrap = _split(a)
    # scale by the largest entry so tiny or huge coefficients do not under/overflow
    big = np.abs(c).max(axis=-1, keepdims=True)
    safe = np.where(big > 0.0, big, 1.0)
    n = big[..., 0] * np.sqrt(np.sum((c / safe) ** 2, axis=-1))
    return float(n) if wrap else n
