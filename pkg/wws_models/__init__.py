from wws_models.checkpoint import load_checkpoint, save_checkpoint
from wws_models.fusion import fuse
from wws_models.loss import decide, wws_loss
from wws_models.models import (
    MODALITIES,
    AudioModel,
    AVModel,
    Batch,
    EncoderCostView,
    LipEncoder,
    VideoModel,
    WWSModel,
    build_model,
)
from wws_models.optim import Adam
from wws_models.topology import BackendTopology, EncoderTopology, Topology
from wws_models.trainer import EpochRecord, Trainer
