"""Radio network simulator: codecs, base-station/IAM/CC-TX event loop, logger-side filtering."""

from daleforge.rfnet.codec import Packet, decode_cctx, decode_iam, encode_cctx, encode_iam
from daleforge.rfnet.logger import derive_button_events, filter_reading
from daleforge.rfnet.simulator import (
    CcTxNode,
    IamNode,
    SimConfig,
    SimResult,
    make_cctx,
    make_iam,
    run_simulation,
)

__all__ = [
    "Packet",
    "encode_iam",
    "decode_iam",
    "encode_cctx",
    "decode_cctx",
    "filter_reading",
    "derive_button_events",
    "IamNode",
    "CcTxNode",
    "SimConfig",
    "SimResult",
    "make_iam",
    "make_cctx",
    "run_simulation",
]
