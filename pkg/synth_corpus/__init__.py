from synth_corpus.corpus import (
    MANIFEST_COLUMNS,
    SPLITS,
    CorpusDataset,
    CorpusManifest,
    CorpusSettings,
    build_corpus,
    load_fbank_stats,
    split_plan,
)
from synth_corpus.generator import (
    CLIP_SAMPLES,
    SNR_LEVELS,
    VIDEO_FRAMES,
    Sample,
    aperture_track,
    babble_noise,
    canonical_aperture,
    mix_noise,
    noise_gain,
    pink_noise,
    snr_label,
    synth_sample,
    template_score,
    wake_template,
)
from synth_corpus.records import RecordLayout, open_records, read_sample, write_records
