"""Three-party replicated-secret-sharing engine over Z_{2^64} with
fixed-point transformer inference protocols."""

from .backend import BACKEND
from .ring import (
    ArithShare,
    BoolShare,
    FixedCodec,
    RingElem,
    SharedTensor,
    make_shares,
    reconstruct,
    reconstruct_tensor,
    share_tensor,
)
from .runtime import PartyId, PartyRuntime, PrfSetup, run_simulated, run_tcp, run_tcp_local

__version__ = "0.1.0"

__all__ = [
    "ArithShare",
    "BACKEND",
    "BoolShare",
    "FixedCodec",
    "PartyId",
    "PartyRuntime",
    "PrfSetup",
    "RingElem",
    "SharedTensor",
    "make_shares",
    "reconstruct",
    "reconstruct_tensor",
    "run_simulated",
    "run_tcp",
    "run_tcp_local",
    "share_tensor",
    "__version__",
]
