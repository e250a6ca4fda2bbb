"""CNN-BLSTM utterance quality scorer (inference only) and the pMOS loss.

Network
-------
The log-mel spectrogram ``[T, num_mels]`` is a one-channel image with time
on the first axis. Each conv layer uses odd kernels with "same" padding, so
output size along an axis is ``ceil(in / stride)``, followed by ReLU. The
conv output ``[C, T', F']`` is flattened channel-major per time step into
``C * F'`` features and fed to a bidirectional LSTM (zero initial state,
gate order input, forget, cell, output; one combined bias per direction).
Forward and backward hidden states are concatenated and passed through the
FC stack (ReLU between layers, linear last layer, one output). Each frame
score is clamped to ``score_clamp`` and the utterance score is their mean.

Weights container (all integers little-endian)
-----------------------------------------------
====== ======================= ==============================================
offset size                    content
====== ======================= ==============================================
0      4                       magic ``b"PMOS"``
4      4                       format version, uint32 (currently 1)
8      4                       header length ``H`` in bytes, uint32
12     H                       UTF-8 JSON of the ScorerSpec, keys sorted,
                               separators ``(",", ":")``
12+H   4 * n_params            float32 tensors, row-major, in this order:
                               per conv layer ``weight[out, in, kh, kw]``,
                               ``bias[out]``; forward LSTM ``w_ih[4h, in]``,
                               ``w_hh[4h, h]``, ``bias[4h]``; backward LSTM
                               likewise; per FC layer ``weight[out, in]``,
                               ``bias[out]``
end-4  4                       CRC-32 (zlib) of every preceding byte, uint32
====== ======================= ==============================================
"""
from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dsp import MelSpectrogram
from .errors import BadChecksum, CorruptFile, ShapeMismatch, UnsupportedVersion

MAGIC = b"PMOS"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class ConvSpec:
    in_ch: int
    out_ch: int
    kernel: tuple[int, int]
    stride: tuple[int, int]


@dataclass(frozen=True)
class LstmSpec:
    input_size: int
    hidden_size: int


@dataclass(frozen=True)
class FcSpec:
    in_features: int
    out_features: int


@dataclass(frozen=True)
class ScorerSpec:
    input_mels: int
    conv_layers: tuple[ConvSpec, ...]
    blstm: LstmSpec
    fc: tuple[FcSpec, ...]
    score_clamp: tuple[float, float] = (1.0, 5.0)

    def conv_output_width(self) -> int:
        width = self.input_mels
        for layer in self.conv_layers:
            width = -(-width // layer.stride[1])
        return width

    def validate(self) -> None:
        """Raise ``ShapeMismatch`` unless every layer's dimensions chain into the next."""
        if self.input_mels < 1:
            raise ShapeMismatch("input_mels must be positive")
        channels = 1
        for k, layer in enumerate(self.conv_layers):
            if layer.in_ch != channels:
                raise ShapeMismatch(f"conv {k} expects {layer.in_ch} channels, gets {channels}")
            if any(s % 2 == 0 or s < 1 for s in layer.kernel):
                raise ShapeMismatch(f"conv {k} kernel {layer.kernel} must be odd")
            if any(s < 1 for s in layer.stride):
                raise ShapeMismatch(f"conv {k} stride {layer.stride} must be positive")
            channels = layer.out_ch
        features = channels * self.conv_output_width()
        if self.blstm.input_size != features:
            raise ShapeMismatch(f"BLSTM input {self.blstm.input_size} != conv features {features}")
        width = 2 * self.blstm.hidden_size
        if not self.fc:
            raise ShapeMismatch("at least one FC layer is required")
        for k, layer in enumerate(self.fc):
            if layer.in_features != width:
                raise ShapeMismatch(f"fc {k} expects {layer.in_features} inputs, gets {width}")
            width = layer.out_features
        if width != 1:
            raise ShapeMismatch(f"last FC layer must have 1 output, has {width}")
        lo, hi = self.score_clamp
        if not hi > lo:
            raise ShapeMismatch(f"score_clamp {self.score_clamp} needs hi > lo")

    def param_shapes(self) -> list[tuple[str, tuple[int, ...]]]:
        shapes = []
        for k, c in enumerate(self.conv_layers):
            shapes.append((f"conv{k}.weight", (c.out_ch, c.in_ch, *c.kernel)))
            shapes.append((f"conv{k}.bias", (c.out_ch,)))
        h, n_in = self.blstm.hidden_size, self.blstm.input_size
        for d in ("fwd", "bwd"):
            shapes.append((f"lstm.{d}.w_ih", (4 * h, n_in)))
            shapes.append((f"lstm.{d}.w_hh", (4 * h, h)))
            shapes.append((f"lstm.{d}.bias", (4 * h,)))
        for k, f in enumerate(self.fc):
            shapes.append((f"fc{k}.weight", (f.out_features, f.in_features)))
            shapes.append((f"fc{k}.bias", (f.out_features,)))
        return shapes

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "ScorerSpec":
        try:
            return cls(
                input_mels=int(d["input_mels"]),
                conv_layers=tuple(
                    ConvSpec(int(c["in_ch"]), int(c["out_ch"]), tuple(map(int, c["kernel"])),
                             tuple(map(int, c["stride"])))
                    for c in d["conv_layers"]
                ),
                blstm=LstmSpec(int(d["blstm"]["input_size"]), int(d["blstm"]["hidden_size"])),
                fc=tuple(FcSpec(int(f["in_features"]), int(f["out_features"])) for f in d["fc"]),
                score_clamp=tuple(map(float, d["score_clamp"])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ShapeMismatch(f"malformed scorer header: {exc}") from exc


def default_spec(input_mels: int = 80) -> ScorerSpec:
    """Desk-scale reference layout: two 3x3 convs (1->16, 16->16, stride 1x3), BLSTM(64), FC 128->32->1."""
    convs = (ConvSpec(1, 16, (3, 3), (1, 3)), ConvSpec(16, 16, (3, 3), (1, 3)))
    width = input_mels
    for c in convs:
        width = -(-width // c.stride[1])
    return ScorerSpec(
        input_mels=input_mels,
        conv_layers=convs,
        blstm=LstmSpec(16 * width, 64),
        fc=(FcSpec(128, 32), FcSpec(32, 1)),
    )


@dataclass(frozen=True, eq=False)
class Scorer:
    spec: ScorerSpec
    params: dict = field(repr=False)

    def __post_init__(self):
        self.spec.validate()
        expected = dict(self.spec.param_shapes())
        if set(self.params) != set(expected):
            raise ShapeMismatch(f"parameter names {sorted(self.params)} do not match spec")
        fixed = {}
        for name, shape in expected.items():
            arr = np.asarray(self.params[name], dtype=np.float32)
            if arr.shape != shape:
                raise ShapeMismatch(f"{name}: shape {arr.shape}, spec says {shape}")
            fixed[name] = arr
        object.__setattr__(self, "params", fixed)

    def p64(self, name: str) -> np.ndarray:
        return self.params[name].astype(np.float64)


@dataclass
class MosScore:
    utterance_score: float
    frame_scores: np.ndarray = field(repr=False)


def scorer_to_bytes(s: Scorer) -> bytes:
    header = s.spec.to_json().encode("utf-8")
    body = bytearray(MAGIC)
    body += struct.pack("<II", FORMAT_VERSION, len(header))
    body += header
    for name, _ in s.spec.param_shapes():
        body += s.params[name].astype("<f4").tobytes(order="C")
    body += struct.pack("<I", zlib.crc32(bytes(body)) & 0xFFFFFFFF)
    return bytes(body)


def save_scorer(s: Scorer, path) -> None:
    Path(path).write_bytes(scorer_to_bytes(s))


def scorer_from_bytes(blob: bytes) -> Scorer:
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise CorruptFile("not a scorer weights file")
    version, header_len = struct.unpack_from("<II", blob, 4)
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"weights format version {version}, expected {FORMAT_VERSION}")
    (stored,) = struct.unpack_from("<I", blob, len(blob) - 4)
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored:
        raise BadChecksum("weights checksum does not match contents")
    if 12 + header_len > len(blob) - 4:
        raise ShapeMismatch("header runs past end of file")
    try:
        header = json.loads(blob[12:12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptFile(f"unreadable scorer header: {exc}") from exc
    spec = ScorerSpec.from_dict(header)
    spec.validate()
    shapes = spec.param_shapes()
    payload = blob[12 + header_len:-4]
    n_expected = sum(math.prod(shape) for _, shape in shapes)
    if len(payload) != 4 * n_expected:
        raise ShapeMismatch(
            f"tensor payload holds {len(payload) // 4} floats, header implies {n_expected}"
        )
    flat = np.frombuffer(payload, dtype="<f4")
    params, pos = {}, 0
    for name, shape in shapes:
        n = math.prod(shape)
        params[name] = flat[pos:pos + n].reshape(shape).astype(np.float32)
        pos += n
    return Scorer(spec, params)


def load_scorer(weights_path) -> Scorer:
    return scorer_from_bytes(Path(weights_path).read_bytes())


def stub_scorer(seed: int, spec: ScorerSpec | None = None) -> Scorer:
    """Deterministic scorer with weights drawn uniformly from [-0.1, 0.1].

    The final bias is shifted to the middle of ``score_clamp`` so scores land
    inside the clamp range instead of all pinning to its lower end.
    """
    spec = spec or default_spec()
    rng = np.random.default_rng(seed)
    params = {
        name: rng.uniform(-0.1, 0.1, size=shape).astype(np.float32)
        for name, shape in spec.param_shapes()
    }
    last = f"fc{len(spec.fc) - 1}.bias"
    params[last] = (params[last] + np.float32(0.5 * sum(spec.score_clamp))).astype(np.float32)
    return Scorer(spec, params)


def zero_scorer(spec: ScorerSpec | None = None) -> Scorer:
    spec = spec or default_spec()
    return Scorer(spec, {name: np.zeros(shape, np.float32) for name, shape in spec.param_shapes()})


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _conv2d_relu(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, stride) -> np.ndarray:
    # x [C_in, T, F]; weight [C_out, C_in, kh, kw]
    kh, kw = weight.shape[2:]
    xp = np.pad(x, ((0, 0), (kh // 2, kh // 2), (kw // 2, kw // 2)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    win = win[:, ::stride[0], ::stride[1]]
    out = np.einsum("ctfhw,ochw->otf", win, weight) + bias[:, None, None]
    return np.maximum(out, 0.0)


def _lstm(seq: np.ndarray, w_ih, w_hh, bias, reverse: bool = False) -> np.ndarray:
    T = seq.shape[0]
    H = w_hh.shape[1]
    h = np.zeros(H)
    c = np.zeros(H)
    out = np.empty((T, H))
    pre = seq @ w_ih.T + bias
    steps = range(T - 1, -1, -1) if reverse else range(T)
    for t in steps:
        z = pre[t] + w_hh @ h
        i = _sigmoid(z[:H])
        f = _sigmoid(z[H:2 * H])
        g = np.tanh(z[2 * H:3 * H])
        o = _sigmoid(z[3 * H:])
        c = f * c + i * g
        h = o * np.tanh(c)
        out[t] = h
    return out


def score_utterance(s: Scorer, m: MelSpectrogram) -> MosScore:
    """Frame-level quality scores and their mean for one log-mel spectrogram."""
    frames = np.asarray(m.frames if isinstance(m, MelSpectrogram) else m, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] != s.spec.input_mels:
        raise ShapeMismatch(
            f"mel input {frames.shape} does not fit scorer expecting [T, {s.spec.input_mels}]"
        )
    x = frames[None, :, :]
    for k, layer in enumerate(s.spec.conv_layers):
        x = _conv2d_relu(x, s.p64(f"conv{k}.weight"), s.p64(f"conv{k}.bias"), layer.stride)
    seq = x.transpose(1, 0, 2).reshape(x.shape[1], -1)
    fwd = _lstm(seq, s.p64("lstm.fwd.w_ih"), s.p64("lstm.fwd.w_hh"), s.p64("lstm.fwd.bias"))
    bwd = _lstm(seq, s.p64("lstm.bwd.w_ih"), s.p64("lstm.bwd.w_hh"), s.p64("lstm.bwd.bias"),
                reverse=True)
    z = np.concatenate([fwd, bwd], axis=1)
    n_fc = len(s.spec.fc)
    for k in range(n_fc):
        z = z @ s.p64(f"fc{k}.weight").T + s.p64(f"fc{k}.bias")
        if k < n_fc - 1:
            z = np.maximum(z, 0.0)
    lo, hi = s.spec.score_clamp
    frame_scores = np.clip(z[:, 0], lo, hi)
    return MosScore(float(np.mean(frame_scores)), frame_scores)


def mos_loss_from_scores(score_x: float, score_y: float, lambda_mos: float = 1.0) -> float:
    return lambda_mos * abs(score_x - score_y)


def mos_loss(s: Scorer, x_mel: MelSpectrogram, y_mel: MelSpectrogram, lambda_mos: float = 1.0) -> float:
    """``lambda_mos * |MOS(x) - MOS(y)|`` on utterance-level scores."""
    return mos_loss_from_scores(
        score_utterance(s, x_mel).utterance_score,
        score_utterance(s, y_mel).utterance_score,
        lambda_mos,
    )
