"""Parameterized graph convolutional autoencoder over the part mesh.

Encoder: two graph-convolution layers, mean pool, dense head to a latent
vector. A parallel fully connected branch maps the dwell time into the same
latent space; the decoder expands a latent vector back to a per-node field
through a dense head, node broadcast, and two graph convolutions. All
forward/backward passes are hand-written numpy; no autograd.

Graph convolutions use the symmetric normalization with self-loops,
``D^{-1/2} (A + I) D^{-1/2}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse

from .dataset import MeshGeometry
from .errors import ConfigurationError, CorruptionError, FormatError, ShapeError

__all__ = [
    "Graph",
    "GcaArchitecture",
    "GcaModel",
    "GcaForwardResult",
    "build_graph",
    "elu",
    "gc_layer_forward",
    "init_gca",
    "gca_forward",
    "gca_loss",
    "gca_backward",
    "predict_gca",
    "save_gca",
    "load_gca",
]

GCA_VERSION = 1


@dataclass(frozen=True)
class Graph:
    """Normalized adjacency (with self-loops) of the mesh graph."""

    n_nodes: int
    adjacency_norm: scipy.sparse.csr_matrix
    node_feature_dim: int = 1


def build_graph(mesh: MeshGeometry) -> Graph:
    """Build ``D^{-1/2} (A + I) D^{-1/2}`` from the mesh edges."""
    n = mesh.n_nodes
    e = mesh.edges
    ones = np.ones(len(e))
    adj = scipy.sparse.coo_matrix((ones, (e[:, 0], e[:, 1])), shape=(n, n))
    adj = adj + adj.T + scipy.sparse.identity(n, format="coo")
    deg = np.asarray(adj.sum(axis=1)).ravel()
    dinv = 1.0 / np.sqrt(deg)
    norm = adj.tocsr().multiply(dinv[:, None]).multiply(dinv[None, :])
    return Graph(n_nodes=n, adjacency_norm=norm.tocsr())


def elu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0.0, x, np.expm1(np.minimum(x, 0.0)))


def _elu_grad(pre: np.ndarray) -> np.ndarray:
    return np.where(pre > 0.0, 1.0, np.exp(np.minimum(pre, 0.0)))


def gc_layer_forward(graph: Graph, features: np.ndarray, weights: np.ndarray,
                     bias: np.ndarray, activation: str = "elu") -> np.ndarray:
    """One graph convolution: ``act(A_hat @ features @ W + b)``."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != graph.n_nodes:
        raise ShapeError(
            f"features must be ({graph.n_nodes}, d_in), got {features.shape}"
        )
    if weights.shape[0] != features.shape[1] or bias.shape != (weights.shape[1],):
        raise ShapeError("layer weights/bias inconsistent with features")
    pre = graph.adjacency_norm @ features @ weights + bias
    if activation == "elu":
        return elu(pre)
    if activation == "identity":
        return pre
    raise ConfigurationError(f"unknown activation {activation!r}")


@dataclass(frozen=True)
class GcaArchitecture:
    """Layer widths, tied to a mesh size by the decoder's seed layer."""

    n_nodes: int
    enc_widths: tuple[int, int] = (16, 32)
    latent_dim: int = 12
    fc_width: int = 32

    def param_shapes(self) -> list[tuple[str, tuple[int, ...]]]:
        h1, h2 = self.enc_widths
        lat, f = self.latent_dim, self.fc_width
        # the decoder head seeds every node with h2 features, giving the
        # graph-convolution stack a spatially resolved starting point
        seed = self.n_nodes * h2
        return [
            ("enc_gc1_w", (1, h1)), ("enc_gc1_b", (h1,)),
            ("enc_gc2_w", (h1, h2)), ("enc_gc2_b", (h2,)),
            ("enc_head_w", (h2, lat)), ("enc_head_b", (lat,)),
            ("dec_head_w", (lat, seed)), ("dec_head_b", (seed,)),
            ("dec_gc1_w", (h2, h1)), ("dec_gc1_b", (h1,)),
            ("dec_gc2_w", (h1, 1)), ("dec_gc2_b", (1,)),
            ("fc1_w", (1, f)), ("fc1_b", (f,)),
            ("fc2_w", (f, f)), ("fc2_b", (f,)),
            ("fc3_w", (f, lat)), ("fc3_b", (lat,)),
        ]


@dataclass(frozen=True)
class GcaModel:
    """Trained (or freshly initialized) autoencoder weights."""

    arch: GcaArchitecture
    params: dict[str, np.ndarray]
    dt_offset: float
    dt_scale: float
    seed: int

    def normalize_dt(self, dwell_time: float) -> float:
        return (dwell_time - self.dt_offset) / self.dt_scale


@dataclass(frozen=True)
class GcaForwardResult:
    x_hat: np.ndarray   # (n, 1) reconstructed field
    z: np.ndarray       # (latent,) encoder latent
    z_p: np.ndarray     # (latent,) parameter-branch latent


def init_params(arch: GcaArchitecture, seed: int) -> dict[str, np.ndarray]:
    """Glorot-uniform weights, zero biases, drawn in fixed layer order."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in arch.param_shapes():
        if name.endswith("_b"):
            params[name] = np.zeros(shape)
        else:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-limit, limit, shape)
    return params


def init_gca(arch: GcaArchitecture, dt_offset: float = 0.0,
             dt_scale: float = 1.0, seed: int = 0) -> GcaModel:
    return GcaModel(arch=arch, params=init_params(arch, seed),
                    dt_offset=dt_offset, dt_scale=dt_scale, seed=seed)


def _aggregate(adj, feats: np.ndarray) -> np.ndarray:
    """Apply the normalized adjacency to each sample of (B, n, d) features."""
    b, n, d = feats.shape
    flat = feats.transpose(1, 0, 2).reshape(n, b * d)
    out = adj @ flat
    return out.reshape(n, b, d).transpose(1, 0, 2)


def _forward_batch(params: dict, graph: Graph, x: np.ndarray, t: np.ndarray):
    """Batched forward pass. x: (B, n, 1) fields, t: (B, 1) normalized dts."""
    p = params
    adj = graph.adjacency_norm
    cache = {"x": x, "t": t}

    cache["ax"] = _aggregate(adj, x)
    cache["s1"] = cache["ax"] @ p["enc_gc1_w"] + p["enc_gc1_b"]
    h1 = elu(cache["s1"])
    cache["ah1"] = _aggregate(adj, h1)
    cache["s2"] = cache["ah1"] @ p["enc_gc2_w"] + p["enc_gc2_b"]
    h2 = elu(cache["s2"])
    cache["pool"] = h2.mean(axis=1)                       # (B, h2)
    z = cache["pool"] @ p["enc_head_w"] + p["enc_head_b"]  # (B, latent)

    cache["s4"] = z @ p["dec_head_w"] + p["dec_head_b"]   # (B, n*h2)
    h4 = elu(cache["s4"])
    hb = h4.reshape(x.shape[0], graph.n_nodes, -1)         # (B, n, h2)
    cache["ahb"] = _aggregate(adj, hb)
    cache["s5"] = cache["ahb"] @ p["dec_gc1_w"] + p["dec_gc1_b"]
    h5 = elu(cache["s5"])
    cache["ah5"] = _aggregate(adj, h5)
    x_hat = cache["ah5"] @ p["dec_gc2_w"] + p["dec_gc2_b"]  # (B, n, 1)

    cache["f1"] = t @ p["fc1_w"] + p["fc1_b"]
    a1 = elu(cache["f1"])
    cache["a1"] = a1
    cache["f2"] = a1 @ p["fc2_w"] + p["fc2_b"]
    a2 = elu(cache["f2"])
    cache["a2"] = a2
    z_p = a2 @ p["fc3_w"] + p["fc3_b"]

    cache["z"], cache["z_p"] = z, z_p
    return x_hat, z, z_p, cache


def _backward_batch(params: dict, graph: Graph, cache: dict, x_hat: np.ndarray,
                    target: np.ndarray, lam: float) -> dict[str, np.ndarray]:
    """Gradients of the batch-mean loss w.r.t. every parameter array."""
    p = params
    adj = graph.adjacency_norm
    b, n, _ = x_hat.shape
    z, z_p = cache["z"], cache["z_p"]
    lat = z.shape[1]
    g = {}

    d_xhat = 2.0 * (x_hat - target) / (b * n)
    g["dec_gc2_w"] = np.einsum("bni,bnj->ij", cache["ah5"], d_xhat)
    g["dec_gc2_b"] = d_xhat.sum(axis=(0, 1))
    d_h5 = _aggregate(adj, d_xhat @ p["dec_gc2_w"].T)
    d_s5 = d_h5 * _elu_grad(cache["s5"])
    g["dec_gc1_w"] = np.einsum("bni,bnj->ij", cache["ahb"], d_s5)
    g["dec_gc1_b"] = d_s5.sum(axis=(0, 1))
    d_hb = _aggregate(adj, d_s5 @ p["dec_gc1_w"].T)
    d_h4 = d_hb.reshape(b, -1)                             # (B, n*h2)
    d_s4 = d_h4 * _elu_grad(cache["s4"])
    g["dec_head_w"] = z.T @ d_s4
    g["dec_head_b"] = d_s4.sum(axis=0)

    d_latent = 2.0 * lam * (z - z_p) / (b * lat)
    d_z = d_s4 @ p["dec_head_w"].T + d_latent
    d_zp = -d_latent

    g["enc_head_w"] = cache["pool"].T @ d_z
    g["enc_head_b"] = d_z.sum(axis=0)
    d_pool = d_z @ p["enc_head_w"].T                       # (B, h2)
    d_h2 = np.broadcast_to(d_pool[:, None, :] / n,
                           (b, n, d_pool.shape[1]))
    d_s2 = d_h2 * _elu_grad(cache["s2"])
    g["enc_gc2_w"] = np.einsum("bni,bnj->ij", cache["ah1"], d_s2)
    g["enc_gc2_b"] = d_s2.sum(axis=(0, 1))
    d_h1 = _aggregate(adj, d_s2 @ p["enc_gc2_w"].T)
    d_s1 = d_h1 * _elu_grad(cache["s1"])
    g["enc_gc1_w"] = np.einsum("bni,bnj->ij", cache["ax"], d_s1)
    g["enc_gc1_b"] = d_s1.sum(axis=(0, 1))

    d_a2 = d_zp @ p["fc3_w"].T
    g["fc3_w"] = cache["a2"].T @ d_zp
    g["fc3_b"] = d_zp.sum(axis=0)
    d_f2 = d_a2 * _elu_grad(cache["f2"])
    g["fc2_w"] = cache["a1"].T @ d_f2
    g["fc2_b"] = d_f2.sum(axis=0)
    d_a1 = d_f2 @ p["fc2_w"].T
    d_f1 = d_a1 * _elu_grad(cache["f1"])
    g["fc1_w"] = cache["t"].T @ d_f1
    g["fc1_b"] = d_f1.sum(axis=0)
    return g


def batch_loss_and_grads(params: dict, graph: Graph, inputs: np.ndarray,
                         targets: np.ndarray, t: np.ndarray, lam: float):
    """Full-batch loss (and components) plus parameter gradients.

    inputs/targets: (B, n) fields; inputs may be corrupted, targets are clean.
    t: (B,) normalized dwell times.
    """
    x = inputs[:, :, None]
    target = targets[:, :, None]
    x_hat, z, z_p, cache = _forward_batch(params, graph, x, t[:, None])
    l_rec = float(np.mean((target - x_hat) ** 2))
    l_param = float(np.mean((z - z_p) ** 2))
    grads = _backward_batch(params, graph, cache, x_hat, target, lam)
    return l_rec + lam * l_param, l_rec, l_param, grads


def batch_loss(params: dict, graph: Graph, inputs: np.ndarray,
               targets: np.ndarray, t: np.ndarray, lam: float) -> float:
    """Forward-only counterpart of :func:`batch_loss_and_grads`."""
    x_hat, z, z_p, _ = _forward_batch(params, graph, inputs[:, :, None],
                                      t[:, None])
    l_rec = float(np.mean((targets[:, :, None] - x_hat) ** 2))
    l_param = float(np.mean((z - z_p) ** 2))
    return l_rec + lam * l_param


def gca_forward(model: GcaModel, graph: Graph, x: np.ndarray,
                dwell_time: float) -> GcaForwardResult:
    """Run encoder, parameter branch, and decoder for one sample."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != graph.n_nodes:
        raise ShapeError(f"field has {x.shape[0]} nodes, graph {graph.n_nodes}")
    t = np.array([[model.normalize_dt(dwell_time)]])
    x_hat, z, z_p, _ = _forward_batch(model.params, graph, x[None, :, None], t)
    return GcaForwardResult(x_hat=x_hat[0], z=z[0], z_p=z_p[0])


def gca_loss(x: np.ndarray, x_hat: np.ndarray, z: np.ndarray, z_p: np.ndarray,
             lam: float) -> float:
    """Mean-squared reconstruction error plus lam x mean-squared latent gap."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    x_hat = np.asarray(x_hat, dtype=np.float64).reshape(-1)
    if x.shape != x_hat.shape:
        raise ShapeError("x and x_hat lengths differ")
    return float(np.mean((x - x_hat) ** 2) + lam * np.mean((z - z_p) ** 2))


def gca_backward(model: GcaModel, graph: Graph, x: np.ndarray,
                 dwell_time: float, lam: float,
                 target: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Analytic gradients of the single-sample loss for every parameter."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    target = x if target is None else np.asarray(target, dtype=np.float64).reshape(-1)
    t = np.array([model.normalize_dt(dwell_time)])
    _, _, _, grads = batch_loss_and_grads(
        model.params, graph, x[None, :], target[None, :], t, lam
    )
    return grads


def predict_gca(model: GcaModel, graph: Graph, dwell_time: float) -> np.ndarray:
    """Decode the parameter branch's latent vector; the encoder is not used."""
    p = model.params
    t = np.array([[model.normalize_dt(dwell_time)]])
    a1 = elu(t @ p["fc1_w"] + p["fc1_b"])
    a2 = elu(a1 @ p["fc2_w"] + p["fc2_b"])
    z_p = a2 @ p["fc3_w"] + p["fc3_b"]

    h4 = elu(z_p @ p["dec_head_w"] + p["dec_head_b"])
    hb = h4.reshape(1, graph.n_nodes, -1)
    s5 = _aggregate(graph.adjacency_norm, hb) @ p["dec_gc1_w"] + p["dec_gc1_b"]
    h5 = elu(s5)
    x_hat = (_aggregate(graph.adjacency_norm, h5) @ p["dec_gc2_w"]
             + p["dec_gc2_b"])
    return x_hat[0, :, 0]


# Checkpoint I/O ==============================================================

def save_gca(model: GcaModel, mesh: MeshGeometry, path) -> None:
    """Write ``gca.json`` (manifest + mesh) and ``gca_weights.bin``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "version": GCA_VERSION,
        "model": "gca",
        "seed": model.seed,
        "n_nodes": model.arch.n_nodes,
        "latent_dim": model.arch.latent_dim,
        "enc_widths": list(model.arch.enc_widths),
        "fc_width": model.arch.fc_width,
        "dt_offset": model.dt_offset,
        "dt_scale": model.dt_scale,
        "param_order": [[name, list(shape)]
                        for name, shape in model.arch.param_shapes()],
        "mesh": {
            "node_coords": mesh.node_coords.tolist(),
            "layer_index": mesh.layer_index.tolist(),
            "edges": mesh.edges.tolist(),
        },
    }
    (path / "gca.json").write_bytes(
        json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    )
    blob = b"".join(
        np.ascontiguousarray(model.params[name]).astype("<f8").tobytes()
        for name, _ in model.arch.param_shapes()
    )
    (path / "gca_weights.bin").write_bytes(blob)


def load_gca(path) -> tuple[GcaModel, MeshGeometry]:
    """Load a checkpoint written by :func:`save_gca`."""
    path = Path(path)
    manifest_path = path / "gca.json"
    if not manifest_path.is_file():
        raise FormatError(f"{manifest_path} is missing")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("version") != GCA_VERSION:
        raise FormatError(f"unsupported GCA version {manifest.get('version')}")
    arch = GcaArchitecture(
        n_nodes=manifest["n_nodes"],
        enc_widths=tuple(manifest["enc_widths"]),
        latent_dim=manifest["latent_dim"],
        fc_width=manifest["fc_width"],
    )
    raw = (path / "gca_weights.bin").read_bytes()
    expected = 8 * sum(int(np.prod(shape)) for _, shape in arch.param_shapes())
    if len(raw) != expected:
        raise CorruptionError(
            f"gca_weights.bin holds {len(raw)} bytes, manifest implies {expected}"
        )
    params = {}
    offset = 0
    for name, shape in arch.param_shapes():
        count = int(np.prod(shape))
        params[name] = np.frombuffer(
            raw, "<f8", count=count, offset=offset
        ).reshape(shape).copy()
        offset += 8 * count
    mesh = MeshGeometry(
        np.array(manifest["mesh"]["node_coords"], dtype=np.float64),
        np.array(manifest["mesh"]["layer_index"], dtype=np.int64),
        np.array(manifest["mesh"]["edges"], dtype=np.int64).reshape(-1, 2),
    )
    if mesh.n_nodes != arch.n_nodes:
        raise CorruptionError(
            f"manifest mesh has {mesh.n_nodes} nodes but the architecture "
            f"expects {arch.n_nodes}"
        )
    model = GcaModel(arch=arch, params=params,
                     dt_offset=manifest["dt_offset"],
                     dt_scale=manifest["dt_scale"], seed=manifest["seed"])
    return model, mesh
