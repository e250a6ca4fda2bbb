"""Perceptual losses for voice conversion: STOI, predicted-MOS and pitch-correlation
losses, weighted objectives, and a batch evaluator."""

from .audio import PairEntry, Waveform, load_wav, parse_manifest, resample, write_wav
from .config import EvalConfig, load_config
from .dsp import (
    BandEnvelopes,
    MelParams,
    MelSpectrogram,
    PowerSpectrogram,
    frame_signal,
    mel_spectrogram,
    remove_silent_frames,
    stft_power,
    third_octave_envelopes,
)
from .evaluate import PairReport, SummaryReport, aggregate_reports, evaluate_pair
from .mos import MosScore, Scorer, ScorerSpec, load_scorer, mos_loss, save_scorer, score_utterance, stub_scorer
from .objective import (
    DiscriminatorComponents,
    GeneratorComponents,
    LambdaWeights,
    LossBreakdown,
    discriminator_objective,
    generator_objective,
)
from .pitch import F0Contour, F0Params, align_contours, extract_f0, interpolate_unvoiced, pcc_loss
from .stoi import StoiLossValue, StoiParams, stoi_frame_score, stoi_loss, stoi_score

__version__ = "0.1.0"
