"""Polar coding library with soft-output fast list decoding.

Encode with `build_code_spec` + `encode`, decode hard with `scl_decode` or
`fscl_decode`, decode soft with `so_scl_decode` / `so_fscl_decode`, and
verify small codes against the exact `reference_oracle`.  `sim_harness`
drives Monte Carlo sweeps and the time-step latency reports; the `polarsoft`
CLI wraps it.
"""

from .channel import (ChannelParams, LlrFrame, awgn_transmit, channel_llr,
                      channel_posterior, modulate_bpsk)
from .code_construction import (ALL_STATIC, FIVE_G, GAUSSIAN_APPROX,
                                POLAR_WEIGHT, XOR_RULE, CodeSpec,
                                build_code_spec, crc_check, crc_compute,
                                dynamic_frozen_fill, encode, polar_transform)
from .fscl_core import (decode_rate0, decode_rate1, decode_rep, decode_spc,
                        fscl_decode, modify_llrs_dynamic)
from .latency_model import (LatencyReport, latency_summary, node_cost,
                            scl_closed_form, total_latency)
from .node_tree import DecodingTree, TreeNode, classify_node, decompose
from .reference_oracle import (OracleResult, exact_app_llrs,
                               exact_codebook_prob, ml_decode)
from .scl_core import (DecoderPath, PathList, crc_select, f_op,
                       forced_path_metric, g_op, pm_increment, scl_decode)
from .soft_output import (CodebookProbTracker, ResidualError,
                          SoftDecodeOutput, app_llrs, pyndiah_decode,
                          pyndiah_llrs, so_fscl_decode, so_scl_decode,
                          total_codebook_prob)

__version__ = "0.1.0"
