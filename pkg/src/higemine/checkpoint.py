"""Versioned binary checkpoint container.

Layout: 8-byte magic, uint32 format version, uint64 header length, a UTF-8
JSON header (sorted keys) and then the raw little-endian float64 tensor bytes
in header order. Nothing time- or host-dependent is written, so identical
models give identical files.
"""

from __future__ import annotations

import json
import struct
from dataclasses import fields, is_dataclass

import numpy as np

from . import gcn
from .errors import DataError

MAGIC = b"HGMCKPT\x00"
FORMAT_VERSION = 1


def _arrays(obj, prefix=""):
    out = {}
    for f in fields(obj):
        value = getattr(obj, f.name)
        if isinstance(value, np.ndarray):
            out[prefix + f.name] = value
        elif is_dataclass(value):
            out.update(_arrays(value, prefix + f.name + "."))
    return out


def save_checkpoint(path, model, config_hash: str = "", metadata: dict | None = None, extras: dict | None = None) -> None:
    if isinstance(model, gcn.Level1Model):
        kind = "level1"
        structure = {}
    elif isinstance(model, gcn.Level2Model):
        kind = "level2"
        structure = {
            "use_label_network": model.label_net is not None,
            "learn_label_embeddings": model.learn_label_embeddings,
        }
    else:
        raise TypeError(f"cannot checkpoint {type(model).__name__}")
    tensors = dict(_arrays(model))
    for name, arr in (extras or {}).items():
        tensors["extra." + name] = np.asarray(arr, dtype=np.float64)
    entries = []
    blobs = []
    offset = 0
    for name, arr in tensors.items():
        data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(data)})
        blobs.append(data)
        offset += len(data)
    header = {
        "kind": kind,
        "structure": structure,
        "config_hash": config_hash,
        "metadata": metadata or {},
        "tensors": entries,
    }
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", FORMAT_VERSION, len(raw)))
        fh.write(raw)
        for blob in blobs:
            fh.write(blob)


def read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise DataError(f"{path}: not a checkpoint file")
    version, hlen = struct.unpack_from("<IQ", data, 8)
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    start = 8 + struct.calcsize("<IQ")
    header = json.loads(data[start : start + hlen].decode("utf-8"))
    body = start + hlen
    tensors = {}
    for ent in header["tensors"]:
        lo = body + ent["offset"]
        arr = np.frombuffer(data[lo : lo + ent["nbytes"]], dtype="<f8").astype(np.float64)
        tensors[ent["name"]] = arr.reshape(ent["shape"])
    return header, tensors


def _gcn_layer(t, p):
    return gcn.GcnLayerParams(t[p + ".weight"], t[p + ".bias"])


def _dense(t, p):
    return gcn.DenseParams(t[p + ".weight"], t[p + ".bias"])


def _path(t, p):
    return gcn.PathParams(_gcn_layer(t, p + ".gcn1"), _gcn_layer(t, p + ".gcn2"), _dense(t, p + ".dense1"), _dense(t, p + ".dense2"))


def load_checkpoint(path):
    """Returns (model, header, extras)."""
    header, t = read_checkpoint(path)
    extras = {k[len("extra."):]: v for k, v in t.items() if k.startswith("extra.")}
    if header["kind"] == "level1":
        model = gcn.Level1Model(_path(t, "blurb"), _path(t, "review"))
    else:
        s = header["structure"]
        label_net = label_head = None
        if s["use_label_network"]:
            label_net = gcn.LabelNetParams(
                _gcn_layer(t, "label_net.gcn1"), _gcn_layer(t, "label_net.gcn2"), _dense(t, "label_net.dense")
            )
        else:
            label_head = _dense(t, "label_head")
        model = gcn.Level2Model(
            _path(t, "blurb"),
            _path(t, "review"),
            t["label_static"],
            t["label_learnable"],
            label_net,
            label_head,
            s["learn_label_embeddings"],
        )
    return model, header, extras
