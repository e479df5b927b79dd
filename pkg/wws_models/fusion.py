"""
Audio-visual feature fusion by frame repetition and concatenation
"""

from tensor_core.errors import ContractError, ShapeError
from tensor_core.ops import as_tensor, concat, expand, reshape
from tensor_core.tensor import Tensor


def fuse(fbank, embeddings) -> Tensor:
    """
    Concatenate F_A with E_V upsampled to the audio frame rate

    Each embedding row is repeated k = time_a / time_v times along time.

    Args:
        fbank: [batch, time_a, 40] or [time_a, 40]
        embeddings: [batch, time_v, d] or [time_v, d]

    Returns:
        [batch, time_a, 40 + d] (batch axis dropped for unbatched inputs)
    """
    audio, video = as_tensor(fbank), as_tensor(embeddings)
    unbatched = audio.ndim == 2
    if unbatched:
        audio = reshape(audio, (1,) + audio.shape)
        video = reshape(video, (1,) + video.shape)
    if audio.ndim != 3 or video.ndim != 3 or audio.shape[0] != video.shape[0]:
        raise ShapeError(f"fuse: incompatible shapes {list(audio.shape)} and {list(video.shape)}")

    batch, time_a, _ = audio.shape
    _, time_v, width = video.shape
    if time_a % time_v:
        raise ContractError(f"fuse: audio frames {time_a} are not an integer multiple of video frames {time_v}")
    k = time_a // time_v

    repeated = expand(reshape(video, (batch, time_v, 1, width)), (batch, time_v, k, width))
    fused = concat([audio, reshape(repeated, (batch, time_a, width))], axis=2)
    if unbatched:
        return reshape(fused, fused.shape[1:])
    return fused
