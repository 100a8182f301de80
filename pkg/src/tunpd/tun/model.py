"""The two-branch per-point classifier."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nn
from ..errors import ShapeError
from ..features import FeatureBundle
from .config import TunConfig

PD_IN = 4
PC_IN = 3
HIDDEN = 64

# dropout stream ids
_DROP_FUSION, _DROP_CLF1, _DROP_CLF2 = 1, 2, 3


@dataclass
class Batch:
    pd: np.ndarray  # (B, N_pd, 4)
    mask: np.ndarray  # (B, N_pd) bool
    aux: np.ndarray  # (B, A)
    cloud: np.ndarray  # (B, N_pc, 3)
    labels: np.ndarray | None = None  # (B, N_pd) bool

    def __len__(self):
        return len(self.pd)


def collate(bundles: list[FeatureBundle]) -> Batch:
    if not bundles:
        raise ShapeError("collate: empty batch")
    labels = None
    if all(b.labels is not None for b in bundles):
        labels = np.stack([b.labels for b in bundles])
    return Batch(
        pd=np.stack([b.pd_feats for b in bundles]),
        mask=np.stack([b.mask for b in bundles]),
        aux=np.stack([b.aux for b in bundles]),
        cloud=np.stack([b.cloud for b in bundles]),
        labels=labels,
    )


class TunModel:
    def __init__(self, cfg: TunConfig, store: nn.ParamStore | None = None):
        self.cfg = cfg
        self.store = store if store is not None else nn.ParamStore(cfg.seed)
        s, H, F = self.store, cfg.H, cfg.F

        # persistence-diagram branch
        self.pd1 = nn.Block(s, "pd.mlp1", PD_IN, HIDDEN)
        self.pd2 = nn.Block(s, "pd.mlp2", HIDDEN, HIDDEN)
        self.pd3 = nn.Linear(s, "pd.mlp3", HIDDEN, H)
        self.attn = nn.Attention(s, "pd.attn", H, cfg.heads)

        # point-cloud branch
        if cfg.use_cloud:
            self.pc1 = nn.Block(s, "pc.mlp1", PC_IN, HIDDEN)
            self.pc2 = nn.Block(s, "pc.mlp2", HIDDEN, HIDDEN)
            self.pc3 = nn.Block(s, "pc.mlp3", HIDDEN, H)
            self.pcg1 = nn.Block(s, "pc.global1", H, 2 * H)
            self.pcg2 = nn.Linear(s, "pc.global2", 2 * H, H)

        # fusion
        self.proj_pd = nn.Linear(s, "fusion.proj_pd", H, F // 2)
        if cfg.use_cloud:
            self.proj_pc = nn.Linear(s, "fusion.proj_pc", H, F // 2)
        if cfg.aux_groups:
            self.aux_bn = nn.BatchNorm(s, "fusion.aux_bn", cfg.aux_dim)
            self.proj_aux = nn.Linear(s, "fusion.proj_aux", cfg.aux_dim, F // 2)
        self.fuse1 = nn.Block(s, "fusion.mlp1", cfg.fusion_dim, F, cfg.dropout_fusion, _DROP_FUSION)
        self.fuse2 = nn.Linear(s, "fusion.mlp2", F, F)

        # per-point head
        self.clf1 = nn.Block(s, "clf.mlp1", H + F, F, cfg.dropout_clf1, _DROP_CLF1)
        self.clf2 = nn.Block(s, "clf.mlp2", F, F // 2, cfg.dropout_clf2, _DROP_CLF2)
        self.clf3 = nn.Linear(s, "clf.out", F // 2, 2)

        # the fusion width must match the sum of the projections
        n_proj = 1 + int(cfg.use_cloud) + int(bool(cfg.aux_groups))
        assert n_proj * (F // 2) == cfg.fusion_dim == self.fuse1.lin.fan_in

    @property
    def fusion_dim(self) -> int:
        return self.fuse1.lin.fan_in

    def check(self, batch: Batch):
        c = self.cfg
        b = len(batch.pd)
        if batch.pd.shape != (b, c.N_pd, PD_IN) or batch.mask.shape != (b, c.N_pd):
            raise ShapeError(
                f"diagram features {batch.pd.shape} / mask {batch.mask.shape} do not match "
                f"N_pd={c.N_pd}")
        if c.use_cloud and batch.cloud.shape != (b, c.N_pc, PC_IN):
            raise ShapeError(f"cloud {batch.cloud.shape} does not match N_pc={c.N_pc}")
        if c.aux_groups and batch.aux.shape != (b, c.aux_dim):
            raise ShapeError(f"aux {batch.aux.shape} does not match aux dim {c.aux_dim}")

    def forward(self, batch: Batch, ctx: nn.Context | None = None) -> nn.Tensor:
        """Logits of shape (B, N_pd, 2)."""
        ctx = ctx or nn.Context(training=False)
        self.check(batch)
        mask = batch.mask
        b, n = mask.shape

        h = self.pd1(batch.pd, ctx, mask)
        h = self.pd2(h, ctx, mask)
        h = self.pd3(h)
        feats = nn.add(h, self.attn(h, mask))  # contextualised per-point features
        g_pd = nn.mean_pool(feats, mask)

        parts = [self.proj_pd(g_pd)]
        if self.cfg.use_cloud:
            p = self.pc1(batch.cloud, ctx)
            p = self.pc2(p, ctx)
            p = self.pc3(p, ctx)
            p = self.pcg2(self.pcg1(p, ctx))
            parts.append(self.proj_pc(nn.max_pool(p)))
        if self.cfg.aux_groups:
            parts.append(self.proj_aux(self.aux_bn(batch.aux, ctx.training)))
        fused = self.fuse2(self.fuse1(nn.concat(parts, -1), ctx))

        x = nn.concat([feats, nn.expand(fused, n)], -1)
        x = self.clf1(x, ctx, mask)
        x = self.clf2(x, ctx, mask)
        return self.clf3(x)

    __call__ = forward

    def probabilities(self, batch: Batch) -> np.ndarray:
        logits = self.forward(batch, nn.Context(training=False)).data
        return nn.softmax(logits, axis=-1).data
