"""The interactive session: encoder and decoder rounds, messages, stopping rule.

Round 0 sends a quantized hash of ``x``.  Round ``k`` sends one lattice part,
coded against guess ``k``; the decoder answers ACK or NACK with one bit.

Two decoding modes are supported.  With ``redecode=True`` (the default) the
decoder re-runs the decoding of every earlier part at the current guess, and
the encoder tops up each earlier part with the extra bits that the noisier
guess needs.  With ``redecode=False`` only the new part is decoded and earlier
parts are kept as first decoded.

Wire framing of a message: one type byte (``0`` hash, ``1`` payload, ``2``
feedback), then for payloads a big-endian ``uint16`` round number; hash and
payload bodies are preceded by a big-endian ``uint32`` bit count and packed
MSB-first into bytes, zero-padded.  Payload bits are ordered part by part (new
part first, then earlier parts ascending), level ascending within a part and
index ascending within a level.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .construction import Codebook
from .errors import (InvalidArgumentError, InvalidParameterError, ProtocolViolationError,
                     SessionExhaustedError, TestDegenerateError)
from .hashtest import (Feedback, HashParams, QuantizedHash, closeness_statistic, make_hash,
                       pack_hash, projection_matrix, unpack_hash, ACK_FACTOR)
from .lattice import planes_to_int
from .model import SourceParams, mmse_gain, round_params, zprime_variance
from .polar import CodeSets, PartChannel, covering_encode, packing_decode

_HASH, _PAYLOAD, _FEEDBACK = 0, 1, 2


# ---------------------------------------------------------------- messages

@dataclass(frozen=True)
class Round0Hash:
    hash: QuantizedHash
    params: HashParams

    @property
    def bits(self) -> int:
        return self.params.bits

    def to_bytes(self) -> bytes:
        return struct.pack(">BI", _HASH, self.bits) + pack_hash(self.hash, self.params)


@dataclass(frozen=True)
class RoundPayload:
    k: int
    payload: np.ndarray  # uint8 bits

    @property
    def bits(self) -> int:
        return int(self.payload.size)

    def to_bytes(self) -> bytes:
        head = struct.pack(">BHI", _PAYLOAD, self.k, self.bits)
        return head + np.packbits(self.payload.astype(np.uint8)).tobytes()


@dataclass(frozen=True)
class FeedbackMessage:
    flag: Feedback

    bits = 1

    def to_bytes(self) -> bytes:
        return struct.pack(">BB", _FEEDBACK, int(self.flag is Feedback.ACK))


def decode_message(data: bytes, hash_params: HashParams | None = None):
    """Inverse of ``to_bytes`` for all three message kinds."""
    if not data:
        raise ProtocolViolationError("empty message")
    kind = data[0]
    if kind == _FEEDBACK:
        return FeedbackMessage(Feedback.ACK if data[1] else Feedback.NACK)
    if kind == _HASH:
        if hash_params is None:
            raise InvalidArgumentError("hash messages need the hash parameters")
        (nbits,) = struct.unpack(">I", data[1:5])
        if nbits != hash_params.bits:
            raise ProtocolViolationError("hash length does not match the parameters")
        return Round0Hash(unpack_hash(data[5:], hash_params), hash_params)
    if kind == _PAYLOAD:
        k, nbits = struct.unpack(">HI", data[1:7])
        bits = np.unpackbits(np.frombuffer(data[7:], dtype=np.uint8))
        if bits.size < nbits:
            raise ProtocolViolationError("payload shorter than its header")
        return RoundPayload(k, bits[:nbits].copy())
    raise ProtocolViolationError(f"unknown message type {kind}")


# ------------------------------------------------------------------ states

@dataclass
class EncoderState:
    x: np.ndarray
    a: np.ndarray
    round: int = 0
    spent_bits: int = 0
    parts_u: list = field(default_factory=list)  # transform-domain bits of every part sent


@dataclass
class DecoderState:
    y: np.ndarray
    a_hat: np.ndarray
    round: int = 0
    x_hat: np.ndarray | None = None
    parts: list = field(default_factory=list)     # decoded lattice parts, in units of the scale
    received: list = field(default_factory=list)  # per part: (mask, bits) of all bits received


def initial_encoder_state(x) -> EncoderState:
    x = np.asarray(x, dtype=float)
    return EncoderState(x=x, a=np.zeros_like(x))


def initial_decoder_state(y) -> DecoderState:
    y = np.asarray(y, dtype=float)
    return DecoderState(y=y, a_hat=np.zeros_like(y))


def part_channel(code: Codebook, part: int, guess: int) -> PartChannel:
    """Channel seen by the decoder of ``part`` (0-based) at guess ``guess``.

    ``guess = 0`` gives the encoder's channel.
    """
    src = SourceParams(code.sigma_x2, 0.0, code.delta)
    rp = round_params(part + 1, code.sched, src)
    noise = rp.encoder_noise
    if guess:
        noise += zprime_variance(code.sched.sigma2[guess], code.sigma_x2)
    return PartChannel(code.lattice, code.ell, rp.var_part, noise)


def _refresh_parts(code: Codebook, k: int, redecode: bool) -> range:
    return range(k - 1) if redecode else range(0)


# ------------------------------------------------------------------ rounds

def encoder_round(state: EncoderState, code: Codebook, shared_seed: int, rng: np.random.Generator,
                  redecode: bool = True) -> tuple[RoundPayload, EncoderState]:
    """Quantize the current residual into the next part and emit its bits."""
    k = state.round + 1
    if k > code.r:
        raise SessionExhaustedError(f"no round {k}: schedule has {code.r} rounds")
    sets = code.round(k).sets
    x_k = state.x - state.a
    u, planes, sent = covering_encode(x_k, sets, part_channel(code, k - 1, 0), shared_seed, k, rng)
    chunks = [sent]
    for p in _refresh_parts(code, k, redecode):
        chunks.append(state.parts_u[p][code.refresh_mask(p, k)])
    payload = np.concatenate(chunks).astype(np.uint8)
    lam = planes_to_int(planes) * code.lattice.scale
    new = EncoderState(x=state.x, a=state.a + lam, round=k,
                       spent_bits=state.spent_bits + payload.size,
                       parts_u=state.parts_u + [u])
    return RoundPayload(k, payload), new


def _split_payload(code: Codebook, k: int, payload: np.ndarray, redecode: bool) -> list:
    """``(part, mask, bits)`` triples in wire order."""
    layout = [(k - 1, code.round(k).sets.df)]
    layout += [(p, code.refresh_mask(p, k)) for p in _refresh_parts(code, k, redecode)]
    need = sum(int(mask.sum()) for _, mask in layout)
    if payload.size != need:
        raise ProtocolViolationError(f"round {k}: expected {need} payload bits, received {payload.size}")
    out, pos = [], 0
    for p, mask in layout:
        cnt = int(mask.sum())
        out.append((p, mask, payload[pos:pos + cnt]))
        pos += cnt
    return out


def _decode_part(code: Codebook, part: int, guess: int, obs: np.ndarray, received, shared_seed: int,
                 i2: np.ndarray) -> np.ndarray:
    mask, bits = received
    sets = CodeSets(code.f1(part), i2)
    known = ~i2 & ~sets.f1
    if np.any(known & ~mask):
        raise ProtocolViolationError(f"part {part + 1}: bits outside the MAP set are missing")
    _, planes = packing_decode(obs, sets, part_channel(code, part, guess), bits[known],
                               shared_seed, part + 1, known=known)
    return planes_to_int(planes)


def decoder_round(state: DecoderState, code: Codebook, msg: RoundPayload, shared_seed: int,
                  hash_msg: Round0Hash, R: np.ndarray, redecode: bool = True
                  ) -> tuple[FeedbackMessage, DecoderState]:
    """Decode round ``msg.k``, update the reconstruction and run the closeness test."""
    k = state.round + 1
    if msg.k != k:
        raise ProtocolViolationError(f"expected round {k}, got round {msg.k}")
    if k > code.r:
        raise SessionExhaustedError(f"no round {k}: schedule has {code.r} rounds")
    n, ell = code.n, code.ell
    received = [(m.copy(), b.copy()) for m, b in state.received]
    received.append((np.zeros((ell, n), bool), np.zeros((ell, n), np.uint8)))
    for p, mask, bits in _split_payload(code, k, np.asarray(msg.payload, np.uint8), redecode):
        rmask, rbits = received[p]
        rbits[mask] = bits
        rmask |= mask

    src = SourceParams(code.sigma_x2, 0.0, code.delta)
    rp = round_params(k, code.sched, src)
    ybar = state.y * rp.ybar_scale
    s = code.lattice.scale
    if redecode:
        parts, acc = [], np.zeros(n)
        for p in range(k):
            m = _decode_part(code, p, k, ybar - acc, received[p], shared_seed, code.i2(p, k))
            parts.append(m)
            acc = acc + m * s
    else:
        acc_prev = state.a_hat
        m = _decode_part(code, k - 1, k, ybar - acc_prev, received[k - 1], shared_seed,
                         code.round(k).sets.i2)
        parts = state.parts + [m]
        acc = acc_prev + m * s
    x_hat = acc + mmse_gain(src, rp) * (ybar - acc)
    try:
        gamma = closeness_statistic(hash_msg.hash, R.T @ x_hat, hash_msg.params)
        flag = Feedback.ACK if gamma <= ACK_FACTOR * n * code.delta else Feedback.NACK
    except TestDegenerateError:
        flag = Feedback.NACK
    new = DecoderState(y=state.y, a_hat=acc, round=k, x_hat=x_hat, parts=parts, received=received)
    return FeedbackMessage(flag), new


# ----------------------------------------------------------------- session

@dataclass(frozen=True)
class SessionSeeds:
    """Independent seeds for one session.

    ``source`` draws ``(x, y)``, ``encoder`` drives the randomized rounding,
    ``shared`` is the common randomness of both endpoints and ``projection``
    generates the hash matrix.
    """

    source: int
    encoder: int
    shared: int
    projection: int

    @classmethod
    def from_master(cls, master: int, trial: int) -> "SessionSeeds":
        ss = np.random.SeedSequence([int(master), int(trial)])
        a, b, c, d = (int(v) for v in ss.generate_state(4))
        return cls(a, b, c, d)


@dataclass
class SessionTranscript:
    tau: int
    per_round_bits: list
    hash_bits: int
    n: int
    mse: float
    success: bool
    feedback: list
    x_hat: np.ndarray
    in_sync: list  # per round: decoder auxiliary equals the encoder's
    messages: list = field(default_factory=list)

    @property
    def total_rate(self) -> float:
        return (self.hash_bits + sum(self.per_round_bits)) / self.n

    @property
    def feedback_bits(self) -> int:
        return len(self.feedback)


def run_session(src: SourceParams, code: Codebook, hash_params: HashParams, seeds: SessionSeeds,
                redecode: bool = True, x=None, y=None, keep_messages: bool = False) -> SessionTranscript:
    """Run rounds until the decoder acknowledges or the schedule is exhausted.

    ``x`` and ``y`` default to a fresh draw from ``src``; ``src.sigma_z2`` is
    only used for that draw.
    """
    if not math.isclose(src.sigma_x2, code.sigma_x2) or not math.isclose(src.delta, code.delta):
        raise InvalidParameterError("source parameters do not match the codebook")
    if hash_params.m < 1:
        raise InvalidParameterError("hash needs at least one projection")
    if x is None or y is None:
        from .model import sample_source
        x, y = sample_source(code.n, src, seeds.source)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (code.n,) or y.shape != (code.n,):
        raise InvalidArgumentError("x and y must have the codebook's block length")

    hp = HashParams(hash_params.m, hash_params.q, hash_params.t_range, seeds.projection)
    R = projection_matrix(hp, code.n)
    hmsg = Round0Hash(make_hash(x, hp, R), hp)
    messages = [hmsg.to_bytes()] if keep_messages else []

    rng = np.random.default_rng(seeds.encoder)
    enc = initial_encoder_state(x)
    dec = initial_decoder_state(y)
    bits, fb, sync = [], [], []
    for _ in range(code.r):
        payload, enc = encoder_round(enc, code, seeds.shared, rng, redecode)
        reply, dec = decoder_round(dec, code, payload, seeds.shared, hmsg, R, redecode)
        bits.append(payload.bits)
        fb.append(reply.flag)
        sync.append(bool(np.allclose(enc.a, dec.a_hat, atol=1e-9)))
        if keep_messages:
            messages += [payload.to_bytes(), reply.to_bytes()]
        if reply.flag is Feedback.ACK:
            break
    success = fb[-1] is Feedback.ACK
    mse = float(np.mean((x - dec.x_hat) ** 2))
    return SessionTranscript(tau=len(fb), per_round_bits=bits, hash_bits=hp.bits, n=code.n, mse=mse,
                             success=success, feedback=fb, x_hat=dec.x_hat, in_sync=sync,
                             messages=messages)
