from features.fbank import (
    FBANK_DIM,
    AudioClip,
    FbankFeatures,
    FbankSettings,
    FbankStats,
    compute_fbank_stats,
    extract_fbank,
    mel_band_centers,
    normalize_global,
)
from features.lips import LIP_SIZE, LipFrames, preprocess_lip
