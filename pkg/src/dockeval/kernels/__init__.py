"""Hot numerical kernels with a compiled backend and a numpy fallback.

The compiled extension (``_ckernels``) is used when it was built at install
time; otherwise the pure-numpy ``_pykernels`` module is used. Both expose the
same functions:

``min_distance_brute(a, b)``
    exact minimum squared distance and its lowest ``(i, j)`` index pair.
``pairs_within(a, b, cutoff)``
    every cross pair within ``cutoff``, sorted by ``(i, j)``.
``pair_terms(coords, i, j, r0, k, repulsive_only)``
    harmonic pair energy and gradient (bond and soft-repulsion terms).
``rasterize(ax, ay, az, centers, radii)``
    grid occupancy of a union of spheres.
``nw_matrix(a, b, match, mismatch, gap)``
    global alignment dynamic-programming matrix.

Use :func:`use_backend` to switch explicitly, e.g. in benchmarks.
"""
from types import ModuleType

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels

_NAMES = ("min_distance_brute", "pairs_within", "pair_terms", "rasterize", "nw_matrix")

backend_name = "cython" if _ckernels is not None else "python"


def get_backend(name: str) -> ModuleType:
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}") from None


def use_backend(name: str) -> None:
    """Rebind the module-level kernels to ``name`` ('cython' or 'python')."""
    global backend_name
    mod = get_backend(name)
    for fn in _NAMES:
        globals()[fn] = getattr(mod, fn)
    backend_name = name


use_backend(backend_name)
