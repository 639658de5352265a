"""8-bit RGB PNG and flow-field I/O."""

from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .tensorfile import TensorFile, read_tensor_file, write_tensor_file


class ImageError(Exception):
    pass


class NonRgbError(ImageError):
    pass


class DecodeError(ImageError):
    pass


def read_image(path):
    """Load an 8-bit RGB PNG as float32 in [0, 1]."""
    try:
        img = Image.open(path)
        img.load()
    except (UnidentifiedImageError, OSError) as e:
        raise DecodeError(f"cannot decode {path}: {e}") from e
    if img.mode != "RGB":
        raise NonRgbError(f"{path}: mode {img.mode}, need RGB")
    return np.asarray(img, dtype=np.float32) / 255.0


def quantize_u8(img):
    """Round-half-up quantization of [0, 1] floats to uint8."""
    v = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


def write_image(img, path):
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ImageError(f"expected HxWx3 image, got shape {img.shape}")
    Image.fromarray(quantize_u8(img), mode="RGB").save(path, format="PNG")


def encode_png(img):
    """PNG bytes for an HxWx3 float image (same quantization as write_image)."""
    import io

    buf = io.BytesIO()
    Image.fromarray(quantize_u8(img), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


@dataclass
class FlowField:
    """Per-pixel displacement (+x right, +y down) with a binary validity mask."""

    flow: np.ndarray  # (H, W, 2) f32
    mask: np.ndarray  # (H, W) f32 in {0, 1}

    def __post_init__(self):
        self.flow = np.asarray(self.flow, dtype=np.float32)
        self.mask = np.asarray(self.mask, dtype=np.float32)
        if self.flow.shape[:2] != self.mask.shape or self.flow.shape[2:] != (2,):
            raise ImageError(f"flow {self.flow.shape} / mask {self.mask.shape} shape mismatch")
        if not np.all((self.mask == 0) | (self.mask == 1)):
            raise ImageError("mask must be binary")


def read_flow(path):
    tf = read_tensor_file(path)
    return FlowField(flow=tf["flow"], mask=tf["mask"])


def write_flow(field, path):
    write_tensor_file(TensorFile([("flow", field.flow), ("mask", field.mask)]), path)
