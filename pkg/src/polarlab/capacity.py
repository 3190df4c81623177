"""Host information recorded next to simulation results."""

import os
import platform
from pathlib import Path

import numpy as np
import scipy

from polarlab import __version__


def get_cpu_count() -> int:
    """Get the number of CPUs this process may use."""
    try:
        return len(os.sched_getaffinity(0)) or 1
    except (AttributeError, OSError):
        return os.cpu_count() or 1


def get_mem_in_bytes() -> int | None:
    """Get total memory in bytes, or None where it cannot be read."""
    meminfo = Path("/proc/meminfo")
    try:
        with open(meminfo) as f:
            for line in f:
                if line.startswith("MemTotal:"):
                    # MemTotal is in kB
                    return int(line.split()[1]) * 1024
    except (OSError, ValueError, IndexError):
        pass
    return None


def get_host_info() -> dict:
    """Get the host description stored in result sidecars."""
    return {
        "cpu_count": get_cpu_count(),
        "mem_in_bytes": get_mem_in_bytes(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "polarlab": __version__,
    }
