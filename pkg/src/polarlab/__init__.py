"""polarlab: polar-code list decoders, an LDPC baseline and a seeded AWGN harness.

The package builds polar codes, decodes them with SC, SCL, SSCL, Fast-SSCL
and partitioned SCL, and measures frame error rates against a layered
min-sum LDPC decoder under one reproducible Monte-Carlo engine.
"""

__version__ = "0.1.0"

from polarlab.channel_sim import run_point, run_sweep  # noqa: E402
from polarlab.fast_and_partitioned import (  # noqa: E402
    PartitionPlan,
    classify_tree,
    count_steps,
    fast_sscl_decode,
    pscl_decode,
    sscl_decode,
)
from polarlab.list_decoding import sc_decode, scl_decode  # noqa: E402
from polarlab.polar_code import build_code, construct_reliability, encode, place_payload  # noqa: E402

__all__ = [
    "PartitionPlan",
    "build_code",
    "classify_tree",
    "construct_reliability",
    "count_steps",
    "encode",
    "fast_sscl_decode",
    "place_payload",
    "pscl_decode",
    "run_point",
    "run_sweep",
    "sc_decode",
    "scl_decode",
    "sscl_decode",
    "__version__",
]
