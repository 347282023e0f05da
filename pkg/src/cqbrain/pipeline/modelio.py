"""Model <-> checkpoint packing.

Architecture hyperparameters ride along as reserved "meta_*" tensors so a
checkpoint is self-describing; small integers and floats survive the f32
wire format exactly enough to rebuild the same model.
"""
from __future__ import annotations

import numpy as np

from ..cqcnn import CqcnnConfig, CqcnnModel, HEAD_CLASSICAL, HEAD_QUANTUM
from ..diffusion import NoisePredictor, NoisePredictorConfig
from ..errors import BadFormat
from ..rng import Rng
from ..skullnet import UNet, UNetConfig

_HEAD_CODES = {HEAD_QUANTUM: 0, HEAD_CLASSICAL: 1}
_HEAD_NAMES = {v: k for k, v in _HEAD_CODES.items()}


def _meta(value) -> np.ndarray:
    return np.asarray(value, dtype=np.float32)


def _require(tensors: dict, key: str) -> np.ndarray:
    if key not in tensors:
        raise BadFormat(f"checkpoint missing {key!r}")
    return tensors[key]


# -- classifier ----------------------------------------------------------

def pack_cqcnn(model: CqcnnModel) -> dict[str, np.ndarray]:
    cfg = model.config
    out = {f"param_{k}": v for k, v in model.params().items()}
    out["meta_kind"] = _meta(0.0)
    out["meta_image_size"] = _meta(cfg.image_size)
    out["meta_n_qubits"] = _meta(cfg.n_qubits)
    out["meta_fc_width"] = _meta(cfg.fc_out)
    out["meta_head"] = _meta(_HEAD_CODES[cfg.head])
    out["meta_dropout"] = _meta(cfg.dropout_rate)
    out["meta_conv1_out"] = _meta(cfg.conv1_out)
    out["meta_conv2_out"] = _meta(cfg.conv2_out)
    out["meta_kernel"] = _meta(cfg.kernel)
    return out


def unpack_cqcnn(tensors: dict[str, np.ndarray]) -> CqcnnModel:
    if int(_require(tensors, "meta_kind")) != 0:
        raise BadFormat("checkpoint does not hold a classifier")
    cfg = CqcnnConfig(
        image_size=int(_require(tensors, "meta_image_size")),
        conv1_out=int(_require(tensors, "meta_conv1_out")),
        conv2_out=int(_require(tensors, "meta_conv2_out")),
        kernel=int(_require(tensors, "meta_kernel")),
        dropout_rate=float(_require(tensors, "meta_dropout")),
        n_qubits=int(_require(tensors, "meta_n_qubits")),
        fc_width=int(_require(tensors, "meta_fc_width")),
        head=_HEAD_NAMES[int(_require(tensors, "meta_head"))],
    )
    model = CqcnnModel(cfg, Rng(0))
    for key, value in model.params().items():
        stored = _require(tensors, f"param_{key}")
        value[...] = stored.reshape(value.shape)
    return model


# -- segmenter -----------------------------------------------------------

def pack_unet(model: UNet) -> dict[str, np.ndarray]:
    cfg = model.config
    out = {f"param_{k}": v for k, v in model.params.items()}
    out["meta_kind"] = _meta(1.0)
    out["meta_input_size"] = _meta(cfg.input_size)
    out["meta_widths"] = _meta(cfg.scaled_widths)
    out["meta_in_channels"] = _meta(cfg.in_channels)
    out["meta_out_channels"] = _meta(cfg.out_channels)
    return out


def unpack_unet(tensors: dict[str, np.ndarray]) -> UNet:
    if int(_require(tensors, "meta_kind")) != 1:
        raise BadFormat("checkpoint does not hold a segmenter")
    cfg = UNetConfig(
        input_size=int(_require(tensors, "meta_input_size")),
        widths=tuple(int(w) for w in _require(tensors, "meta_widths")),
        in_channels=int(_require(tensors, "meta_in_channels")),
        out_channels=int(_require(tensors, "meta_out_channels")),
    )
    model = UNet(cfg, Rng(0))
    for key, value in model.params.items():
        value[...] = _require(tensors, f"param_{key}").reshape(value.shape)
    return model


# -- denoiser ------------------------------------------------------------

def pack_predictor(model: NoisePredictor, schedule_params: tuple[int, float, float]) -> dict[str, np.ndarray]:
    cfg = model.config
    out = {f"param_{k}": v for k, v in model.params().items()}
    out["meta_kind"] = _meta(2.0)
    out["meta_image_size"] = _meta(cfg.image_size)
    out["meta_widths"] = _meta(cfg.widths)
    out["meta_emb_dim"] = _meta(cfg.emb_dim)
    t_steps, beta_start, beta_end = schedule_params
    out["meta_T"] = _meta(t_steps)
    out["meta_beta_start"] = _meta(beta_start)
    out["meta_beta_end"] = _meta(beta_end)
    return out


def unpack_predictor(tensors: dict[str, np.ndarray]) -> tuple[NoisePredictor, tuple[int, float, float]]:
    if int(_require(tensors, "meta_kind")) != 2:
        raise BadFormat("checkpoint does not hold a denoiser")
    cfg = NoisePredictorConfig(
        image_size=int(_require(tensors, "meta_image_size")),
        widths=tuple(int(w) for w in _require(tensors, "meta_widths")),
        emb_dim=int(_require(tensors, "meta_emb_dim")),
    )
    model = NoisePredictor(cfg, Rng(0))
    for key, value in model.params().items():
        value[...] = _require(tensors, f"param_{key}").reshape(value.shape)
    schedule_params = (int(_require(tensors, "meta_T")),
                       float(_require(tensors, "meta_beta_start")),
                       float(_require(tensors, "meta_beta_end")))
    return model, schedule_params
