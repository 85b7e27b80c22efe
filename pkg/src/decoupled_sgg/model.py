"""Decoupled dual-branch transformer for per-frame relationship-triplet detection.

A shared convolutional backbone produces one token map per frame. A relation
branch and an object branch each encode it with their own transformer encoder
and decode their own learnable queries in two stages: a temporal decoder lets
the queries attend to the branch's output embeddings from the previous frame,
and a spatial decoder attends to the branch's encoded tokens. Object
embeddings feed subject/object box and class heads; relation embeddings feed
the relation-label head and the relation-region box head. The output
embeddings are carried to the next frame.

All modules take a leading batch dimension so several videos can be stepped
through their frames in lockstep.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ConfigError, InvalidInputError
from .structures import PredictionSet

QuerySharing = Literal["none", "o_to_r", "r_to_o"]


@dataclass
class ModelConfig:
    num_objects: int
    num_relations: int
    d: int = 256
    num_queries: int = 64
    num_heads: int = 8
    ffn_dim: int = 2048
    enc_layers: int = 6
    obj_dec_layers: int = 6
    rel_dec_layers: int = 3
    temporal_layers: int = 1
    in_channels: int = 3
    image_size: tuple[int, int] = (64, 64)
    backbone_channels: tuple[int, ...] = (32, 64, 128)
    subject_fixed: bool = False
    separate_encoders: bool = True
    separate_decoders: bool = True
    relation_region: bool = True
    query_sharing: QuerySharing = "none"
    detach_prev: bool = True

    def __post_init__(self):
        self.image_size = tuple(self.image_size)
        self.backbone_channels = tuple(self.backbone_channels)
        if self.d % self.num_heads:
            raise ConfigError(f"d={self.d} is not divisible by num_heads={self.num_heads}")
        for name in ("enc_layers", "obj_dec_layers", "rel_dec_layers", "temporal_layers",
                     "num_queries", "num_objects", "num_relations"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not self.backbone_channels:
            raise ConfigError("backbone needs at least one stage")
        h, w = self.image_size
        if h % self.stride or w % self.stride:
            raise ConfigError(f"image size {self.image_size} not divisible by backbone stride {self.stride}")
        if self.query_sharing not in ("none", "o_to_r", "r_to_o"):
            raise ConfigError(f"unknown query sharing {self.query_sharing!r}")
        if self.query_sharing != "none" and not self.separate_decoders:
            raise ConfigError("query sharing needs two decoders")

    @property
    def stride(self) -> int:
        return 2 ** len(self.backbone_channels)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> ModelConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown model config fields: {sorted(unknown)}")
        return cls(**data)


@dataclass
class FeatureMap:
    tokens: torch.Tensor  # (B, H'*W', d)
    height: int
    width: int


@dataclass
class Embeddings:
    """Decoder outputs of one frame, carried to the next. ``rel`` is None for single-branch models."""

    obj: torch.Tensor
    rel: Optional[torch.Tensor] = None
    frame_index: int = 0

    def detach(self) -> Embeddings:
        return Embeddings(self.obj.detach(), None if self.rel is None else self.rel.detach(), self.frame_index)


def sine_position_embedding(height: int, width: int, d: int, temperature: float = 10000.0,
                            dtype=torch.float32) -> torch.Tensor:
    """Fixed 2-D sinusoidal embedding, ``(height*width, d)``; first half encodes y, second half x."""
    if d % 4:
        raise ConfigError("positional embedding width must be divisible by 4")
    npf = d // 2
    y = torch.arange(1, height + 1, dtype=torch.float64)[:, None].expand(height, width)
    x = torch.arange(1, width + 1, dtype=torch.float64)[None, :].expand(height, width)
    scale = 2 * math.pi
    y = y / height * scale
    x = x / width * scale
    dim_t = temperature ** (2 * (torch.arange(npf, dtype=torch.float64) // 2) / npf)
    px, py = x[..., None] / dim_t, y[..., None] / dim_t
    px = torch.stack((px[..., 0::2].sin(), px[..., 1::2].cos()), dim=-1).flatten(-2)
    py = torch.stack((py[..., 0::2].sin(), py[..., 1::2].cos()), dim=-1).flatten(-2)
    return torch.cat((py, px), dim=-1).reshape(height * width, d).to(dtype)


class Backbone(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        layers, c_in = [], cfg.in_channels
        for c_out in cfg.backbone_channels:
            layers += [nn.Conv2d(c_in, c_out, 3, stride=2, padding=1), nn.ReLU()]
            c_in = c_out
        self.body = nn.Sequential(*layers)
        self.proj = nn.Conv2d(c_in, cfg.d, 1)
        self.cfg = cfg

    def forward(self, frames: torch.Tensor) -> FeatureMap:
        b, c, h, w = frames.shape
        if c != self.cfg.in_channels:
            raise ConfigError(f"frame has {c} channels, model expects {self.cfg.in_channels}")
        if (h, w) != self.cfg.image_size:
            raise ConfigError(f"frame size {(h, w)} differs from configured {self.cfg.image_size}")
        feat = self.proj(self.body(frames))
        hh, ww = feat.shape[-2:]
        pos = sine_position_embedding(hh, ww, self.cfg.d, dtype=feat.dtype)
        return FeatureMap(feat.flatten(2).transpose(1, 2) + pos, hh, ww)


class FFN(nn.Module):
    def __init__(self, d: int, hidden: int):
        super().__init__()
        self.fc1 = nn.Linear(d, hidden)
        self.fc2 = nn.Linear(hidden, d)

    def forward(self, x):
        return self.fc2(F.relu(self.fc1(x)))


class EncoderLayer(nn.Module):
    def __init__(self, d, heads, ffn_dim):
        super().__init__()
        self.attn = nn.MultiheadAttention(d, heads, batch_first=True)
        self.norm1 = nn.LayerNorm(d)
        self.ffn = FFN(d, ffn_dim)
        self.norm2 = nn.LayerNorm(d)

    def forward(self, x):
        x = self.norm1(x + self.attn(x, x, x, need_weights=False)[0])
        return self.norm2(x + self.ffn(x))


class Encoder(nn.Module):
    def __init__(self, d, heads, ffn_dim, num_layers):
        super().__init__()
        self.layers = nn.ModuleList(EncoderLayer(d, heads, ffn_dim) for _ in range(num_layers))

    def forward(self, f: FeatureMap) -> FeatureMap:
        x = f.tokens
        for layer in self.layers:
            x = layer(x)
        return FeatureMap(x, f.height, f.width)


class TemporalDecoderLayer(nn.Module):
    """Cross-attention of current queries over previous-frame embeddings, then FFN."""

    def __init__(self, d, heads, ffn_dim):
        super().__init__()
        self.cross_attn = nn.MultiheadAttention(d, heads, batch_first=True)
        self.norm1 = nn.LayerNorm(d)
        self.ffn = FFN(d, ffn_dim)
        self.norm2 = nn.LayerNorm(d)

    def forward(self, queries, prev):
        x = self.norm1(queries + self.cross_attn(queries, prev, prev, need_weights=False)[0])
        return self.norm2(x + self.ffn(x))


class TemporalDecoder(nn.Module):
    def __init__(self, d, heads, ffn_dim, num_layers):
        super().__init__()
        self.layers = nn.ModuleList(TemporalDecoderLayer(d, heads, ffn_dim) for _ in range(num_layers))

    def forward(self, queries: torch.Tensor, prev: Optional[torch.Tensor]) -> torch.Tensor:
        # First frame of a video: the queries pass through untouched.
        if prev is None:
            return queries
        if prev.shape != queries.shape:
            raise InvalidInputError(f"previous embeddings {tuple(prev.shape)} vs queries {tuple(queries.shape)}")
        x = queries
        for layer in self.layers:
            x = layer(x, prev)
        return x


class SpatialDecoderLayer(nn.Module):
    def __init__(self, d, heads, ffn_dim):
        super().__init__()
        self.self_attn = nn.MultiheadAttention(d, heads, batch_first=True)
        self.norm1 = nn.LayerNorm(d)
        self.cross_attn = nn.MultiheadAttention(d, heads, batch_first=True)
        self.norm2 = nn.LayerNorm(d)
        self.ffn = FFN(d, ffn_dim)
        self.norm3 = nn.LayerNorm(d)

    def forward(self, tgt, memory, pe):
        q = tgt + pe
        tgt = self.norm1(tgt + self.self_attn(q, q, tgt, need_weights=False)[0])
        tgt = self.norm2(tgt + self.cross_attn(tgt + pe, memory, memory, need_weights=False)[0])
        return self.norm3(tgt + self.ffn(tgt))


class SpatialDecoder(nn.Module):
    def __init__(self, d, heads, ffn_dim, num_layers):
        super().__init__()
        self.layers = nn.ModuleList(SpatialDecoderLayer(d, heads, ffn_dim) for _ in range(num_layers))

    def forward(self, encoded: FeatureMap, pe: torch.Tensor, aggregated: torch.Tensor) -> torch.Tensor:
        x = aggregated
        for layer in self.layers:
            x = layer(x, encoded.tokens, pe)
        return x


class MLP(nn.Module):
    def __init__(self, d_in, hidden, d_out, num_layers):
        super().__init__()
        dims = [d_in] + [hidden] * (num_layers - 1) + [d_out]
        self.layers = nn.ModuleList(nn.Linear(a, b) for a, b in zip(dims[:-1], dims[1:]))

    def forward(self, x):
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = F.relu(x)
        return x


class ObjectHead(nn.Module):
    """Four FFNs: subject box, object box, subject class, object class."""

    def __init__(self, d, num_objects):
        super().__init__()
        self.sub_box = MLP(d, d, 4, 3)
        self.obj_box = MLP(d, d, 4, 3)
        self.sub_cls = nn.Linear(d, num_objects + 1)
        self.obj_cls = nn.Linear(d, num_objects + 1)

    def forward(self, emb):
        return (self.sub_box(emb).sigmoid(), self.obj_box(emb).sigmoid(),
                self.sub_cls(emb), self.obj_cls(emb))


class RelationHead(nn.Module):
    """Relation logits (multi-label) and, optionally, the relation-region box."""

    def __init__(self, d, num_relations, with_region=True):
        super().__init__()
        self.cls = nn.Linear(d, num_relations)
        self.box = MLP(d, d, 4, 3) if with_region else None

    def forward(self, emb):
        return self.cls(emb), None if self.box is None else self.box(emb).sigmoid()


class Branch(nn.Module):
    """Queries, query positional embeddings, and the temporal + spatial decoders of one branch."""

    def __init__(self, cfg: ModelConfig, spatial_layers: int):
        super().__init__()
        self.queries = nn.Parameter(torch.randn(cfg.num_queries, cfg.d))
        self.pe = nn.Parameter(torch.randn(cfg.num_queries, cfg.d))
        self.temporal = TemporalDecoder(cfg.d, cfg.num_heads, cfg.ffn_dim, cfg.temporal_layers)
        self.spatial = SpatialDecoder(cfg.d, cfg.num_heads, cfg.ffn_dim, spatial_layers)

    def forward(self, encoded: FeatureMap, prev: Optional[torch.Tensor],
                queries: Optional[torch.Tensor] = None) -> torch.Tensor:
        b = encoded.tokens.shape[0]
        if queries is None:
            queries = self.queries.expand(b, -1, -1)
        aggregated = self.temporal(queries, prev)
        return self.spatial(encoded, self.pe.expand(b, -1, -1), aggregated)


class DDSNet(nn.Module):
    """Relation/object dual-branch network; ablation variants are selected by :class:`ModelConfig` flags.

    ``separate_decoders=False`` gives the single-branch base network: one
    encoder, one query set, and all heads reading the same embeddings.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.backbone = Backbone(cfg)
        enc = lambda: Encoder(cfg.d, cfg.num_heads, cfg.ffn_dim, cfg.enc_layers)  # noqa: E731
        self.obj_encoder = enc()
        self.rel_encoder = enc() if cfg.separate_decoders and cfg.separate_encoders else None
        self.obj_branch = Branch(cfg, cfg.obj_dec_layers)
        self.rel_branch = Branch(cfg, cfg.rel_dec_layers) if cfg.separate_decoders else None
        self.object_head = ObjectHead(cfg.d, cfg.num_objects)
        self.relation_head = RelationHead(cfg.d, cfg.num_relations, cfg.relation_region)

    # stage-level entry points

    def backbone_extract(self, frames: torch.Tensor) -> FeatureMap:
        return self.backbone(frames if frames.dim() == 4 else frames[None])

    def encode(self, f: FeatureMap) -> tuple[FeatureMap, FeatureMap]:
        """Return ``(relation_encoded, object_encoded)``."""
        o = self.obj_encoder(f)
        return (self.rel_encoder(f) if self.rel_encoder is not None else o), o

    def decode(self, rel_f: FeatureMap, obj_f: FeatureMap, prev: Optional[Embeddings]) -> Embeddings:
        prev_obj = None if prev is None else prev.obj
        prev_rel = None if prev is None else prev.rel
        if self.rel_branch is None:
            return Embeddings(self.obj_branch(obj_f, prev_obj))
        sharing = self.cfg.query_sharing
        if sharing == "o_to_r":
            obj = self.obj_branch(obj_f, prev_obj)
            rel = self.rel_branch(rel_f, prev_rel, queries=obj)
        elif sharing == "r_to_o":
            rel = self.rel_branch(rel_f, prev_rel)
            obj = self.obj_branch(obj_f, prev_obj, queries=rel)
        else:
            rel = self.rel_branch(rel_f, prev_rel)
            obj = self.obj_branch(obj_f, prev_obj)
        return Embeddings(obj, rel)

    def heads(self, emb: Embeddings) -> list[PredictionSet]:
        sb, ob, sl, ol = self.object_head(emb.obj)
        rl, rb = self.relation_head(emb.rel if emb.rel is not None else emb.obj)
        return [PredictionSet(sb[i], ob[i], sl[i], ol[i], rl[i], None if rb is None else rb[i])
                for i in range(sb.shape[0])]

    def forward_frame(self, frames: torch.Tensor, prev: Optional[Embeddings] = None,
                      frame_index: int = 0) -> tuple[list[PredictionSet], Embeddings]:
        """One time step for a batch of videos. ``frames`` is ``(B, C, H, W)``."""
        feat = self.backbone_extract(frames)
        rel_f, obj_f = self.encode(feat)
        if prev is not None and self.cfg.detach_prev:
            prev = prev.detach()
        emb = self.decode(rel_f, obj_f, prev)
        emb.frame_index = frame_index
        return self.heads(emb), emb

    def forward(self, videos: torch.Tensor) -> list[list[PredictionSet]]:
        """``videos`` is ``(B, T, C, H, W)``; returns predictions indexed ``[t][b]``."""
        if videos.dim() != 5 or videos.shape[1] == 0:
            raise InvalidInputError("expected a non-empty (B, T, C, H, W) batch of videos")
        out, prev = [], None
        for t in range(videos.shape[1]):
            preds, prev = self.forward_frame(videos[:, t], prev, t)
            out.append(preds)
        return out

    def forward_video(self, frames: torch.Tensor | Sequence[torch.Tensor]) -> list[PredictionSet]:
        """Run one video frame by frame; ``frames`` is ``(T, C, H, W)`` or a list of ``(C, H, W)``."""
        if len(frames) == 0:
            raise InvalidInputError("video has no frames")
        if not torch.is_tensor(frames):
            frames = torch.stack(list(frames))
        return [p[0] for p in self(frames[None])]


def build_model(cfg: ModelConfig, seed: int = 0, dtype=torch.float32) -> DDSNet:
    """Construct a model with parameters drawn deterministically from ``seed``."""
    gen_state = torch.random.get_rng_state()
    torch.manual_seed(seed)
    try:
        model = DDSNet(cfg)
    finally:
        torch.random.set_rng_state(gen_state)
    return model.to(dtype)


def branch_parameters(model: DDSNet) -> dict[str, list[str]]:
    """Parameter names owned exclusively by each branch downstream of the shared token map."""
    groups = {"relation": [], "object": [], "shared": []}
    for name, _ in model.named_parameters():
        if name.startswith(("rel_encoder.", "rel_branch.", "relation_head.")):
            groups["relation"].append(name)
        elif name.startswith(("obj_encoder.", "obj_branch.", "object_head.")):
            groups["object"].append(name)
        else:
            groups["shared"].append(name)
    return groups
