"""Backend dispatch for the numeric kernels.

``POLYFK_NUMBA=0`` forces the pure-numpy path; otherwise the numba path is
used when numba imports. ``POLYFK_NUM_THREADS`` caps the numba thread pool.
"""
import importlib
import logging
import os

from . import numpy_impl

log = logging.getLogger(__name__)

_NAMES = (
    "legendre_table",
    "weighted_mass_blocks",
    "stiffness_blocks",
    "face_blocks",
    "eval_at_points",
    "block_matvec",
    "clip_voronoi_cells",
)


def _want_numba():
    flag = os.environ.get("POLYFK_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


numba_impl = None
if _want_numba():
    try:
        numba_impl = importlib.import_module(__name__ + ".numba_impl")
    except ImportError:  # pragma: no cover - numba missing
        log.warning("numba unavailable, falling back to numpy kernels")

if numba_impl is not None:
    _threads = os.environ.get("POLYFK_NUM_THREADS")
    if _threads:
        import numba

        numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))


def backend():
    """Name of the active kernel backend (``"numba"`` or ``"numpy"``)."""
    return "numba" if numba_impl is not None else "numpy"


_active = numba_impl if numba_impl is not None else numpy_impl

legendre_table = _active.legendre_table
weighted_mass_blocks = _active.weighted_mass_blocks
stiffness_blocks = _active.stiffness_blocks
face_blocks = _active.face_blocks
eval_at_points = _active.eval_at_points
block_matvec = _active.block_matvec
clip_voronoi_cells = _active.clip_voronoi_cells

__all__ = list(_NAMES) + ["backend", "numpy_impl", "numba_impl"]
