"""glibc allocator tuning for the large temporaries of the solver loops."""

import ctypes
import ctypes.util

_M_TRIM_THRESHOLD = -1
_M_TOP_PAD = -2
_M_MMAP_THRESHOLD = -3


def tune_allocator():
    """Keep freed blocks of up to 32 MB on the heap instead of unmapping them.

    Every time step allocates tens of megabytes of short-lived arrays; with
    the default thresholds each one is a fresh ``mmap`` and pays a page fault
    per 4 kB on first touch.  Returns ``False`` when libc is not glibc.
    """
    name = ctypes.util.find_library("c")
    if not name:
        return False
    try:
        libc = ctypes.CDLL(name)
        mallopt = libc.mallopt
    except (OSError, AttributeError):
        return False
    ok = mallopt(_M_MMAP_THRESHOLD, 32 * 1024 * 1024)
    ok &= mallopt(_M_TRIM_THRESHOLD, 1024 * 1024 * 1024)
    ok &= mallopt(_M_TOP_PAD, 64 * 1024 * 1024)
    return bool(ok)
