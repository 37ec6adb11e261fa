"""Wyner-Ziv coding of Gaussian sources with polar lattice codes and one-bit feedback.

The encoder knows the source variance but not how noisy the decoder's side
information is.  It sends a short hash, then one lattice part per round,
each coded for a larger guess of the noise variance, until the decoder's
closeness test acknowledges.
"""
from .construction import Codebook, ConstructionConfig, build_codebook
from .errors import (CacheMissError, DegenerateWeightError, InvalidArgumentError, InvalidParameterError,
                     ProtocolViolationError, SessionExhaustedError, TestDegenerateError)
from .hashtest import Feedback, HashParams, QuantizedHash, choose_hash_params, closeness_test, make_hash
from .lattice import DiscreteGaussianSpec, Lattice1D, dg_pmf, dg_sample
from .model import GuessSchedule, RoundParams, SourceParams, make_schedule, round_params, sample_source
from .polar import CodeSets, covering_encode, packing_decode, sc_pass, transform
from .protocol import SessionSeeds, SessionTranscript, run_session

__version__ = "0.1.0"

__all__ = [
    "CacheMissError", "CodeSets", "Codebook", "ConstructionConfig", "DegenerateWeightError",
    "DiscreteGaussianSpec", "Feedback", "GuessSchedule", "HashParams", "InvalidArgumentError",
    "InvalidParameterError", "Lattice1D", "ProtocolViolationError", "QuantizedHash", "RoundParams",
    "SessionExhaustedError", "SessionSeeds", "SessionTranscript", "SourceParams", "TestDegenerateError",
    "build_codebook", "choose_hash_params", "closeness_test", "covering_encode", "dg_pmf", "dg_sample",
    "make_hash", "make_schedule", "packing_decode", "round_params", "run_session", "sample_source",
    "sc_pass", "transform",
]
